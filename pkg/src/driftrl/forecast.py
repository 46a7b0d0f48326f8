"""Probabilistic offset forecasting behind a zero-shot-style interface.

Given C past offsets per dimension the forecaster emits l sample paths over a
P-step horizon. Two dependency-free reference methods are provided; the CSV
import path is the seam where an external foundation model's samples would
plug in instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numkit import Rng

FORECAST_METHODS = ("seasonal-naive-bootstrap", "ar-bootstrap")

_AR_LAGS = 4


@dataclass(frozen=True)
class ForecastRequest:
    context: list[np.ndarray]  # one context sequence per forecast dimension
    horizon: int
    n_samples: int

    def __post_init__(self):
        if self.horizon < 1 or self.n_samples < 1:
            raise ValueError("horizon and sample count must be >= 1")
        ctx = [np.asarray(c, dtype=float) for c in self.context]
        for c in ctx:
            if len(c) < 2:
                raise ValueError("context must hold at least 2 values")
        object.__setattr__(self, "context", ctx)


@dataclass(frozen=True)
class ForecastSamples:
    """Per-dimension sample paths, shape (dims, n_samples, horizon)."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 3:
            raise ValueError("samples must have shape (dims, n_samples, horizon)")
        if not np.isfinite(arr).all():
            raise ValueError("forecast samples must be finite")
        object.__setattr__(self, "samples", arr)

    @property
    def n_dims(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def horizon(self) -> int:
        return self.samples.shape[2]

    def at_step(self, step: int) -> np.ndarray:
        """(n_samples, dims) offset draws for one horizon step."""
        return self.samples[:, :, step].T


def _detect_season(x: np.ndarray) -> int:
    """Lag in [2, len/2] maximizing the autocorrelation; 1 if none usable."""
    n = len(x)
    max_lag = n // 2
    if max_lag < 2:
        return 1
    centered = x - x.mean()
    denom = float(centered @ centered)
    if denom <= 0.0:
        return 1
    best_lag, best_val = 1, -np.inf
    for lag in range(2, max_lag + 1):
        val = float(centered[lag:] @ centered[:-lag]) / denom
        if val > best_val:
            best_lag, best_val = lag, val
    return best_lag


def _seasonal_naive_dim(x: np.ndarray, horizon: int, n_samples: int, rng: Rng) -> np.ndarray:
    season = _detect_season(x)
    if len(x) < 2 * season:
        season = max(1, len(x) // 2)
    point = np.array([x[len(x) - season + (h % season)] for h in range(horizon)])
    # One-season-ahead residuals observed inside the context.
    resid = x[season:] - x[:-season]
    if len(resid) == 0:
        resid = np.zeros(1)
    out = np.empty((n_samples, horizon))
    for j in range(n_samples):
        sub = rng.child(j)
        idx = sub.integers(0, len(resid) - 1, horizon)
        out[j] = point + resid[idx]
    return out


def _ar_fit(x: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray] | None:
    """Least-squares AR(p) with intercept; None when the context degenerates."""
    if len(x) < p + 2 or np.ptp(x) == 0.0:
        return None
    rows = len(x) - p
    X = np.empty((rows, p + 1))
    X[:, 0] = 1.0
    for i in range(p):
        X[:, 1 + i] = x[p - 1 - i:len(x) - 1 - i]
    y = x[p:]
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    return coef, resid


def _ar_bootstrap_dim(x: np.ndarray, horizon: int, n_samples: int, rng: Rng) -> np.ndarray:
    p = min(_AR_LAGS, len(x) - 2)
    fit = _ar_fit(x, p) if p >= 1 else None
    out = np.empty((n_samples, horizon))
    if fit is None:
        # All-equal context: constant forecast plus a token noise floor.
        for j in range(n_samples):
            sub = rng.child(j)
            out[j] = x[-1] + 1e-8 * sub.gaussian_vec(horizon)
        return out
    coef, resid = fit
    if len(resid) == 0 or float(np.abs(resid).max()) == 0.0:
        resid = np.zeros(1)
    for j in range(n_samples):
        sub = rng.child(j)
        lags = list(x[-p:][::-1])  # most recent first
        idx = sub.integers(0, len(resid) - 1, horizon)
        for h in range(horizon):
            val = coef[0] + float(np.dot(coef[1:], lags)) + resid[idx[h]]
            out[j, h] = val
            lags = [val] + lags[:-1]
    return out


def forecast(method: str, request: ForecastRequest, rng: Rng) -> ForecastSamples:
    """Forecast every dimension independently with per-dim derived streams."""
    if method not in FORECAST_METHODS:
        raise ValueError(f"unknown forecast method {method!r}")
    dims = len(request.context)
    out = np.empty((dims, request.n_samples, request.horizon))
    for d, ctx in enumerate(request.context):
        sub = rng.child(1000 + d)
        if method == "seasonal-naive-bootstrap":
            out[d] = _seasonal_naive_dim(ctx, request.horizon, request.n_samples, sub)
        else:
            out[d] = _ar_bootstrap_dim(ctx, request.horizon, request.n_samples, sub)
    return ForecastSamples(out)


def point_mean(samples: ForecastSamples) -> np.ndarray:
    """(dims, horizon) columnwise mean over the sample paths."""
    return samples.samples.mean(axis=1)


def point_median(samples: ForecastSamples) -> np.ndarray:
    return np.median(samples.samples, axis=1)


def load_forecast_csv(path: str, dims: int, n_samples: int, horizon: int) -> ForecastSamples:
    """Import externally produced samples: columns step,dim,sample,value."""
    arr = np.full((dims, n_samples, horizon), np.nan)
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "step,dim,sample,value":
            raise ValueError("expected header 'step,dim,sample,value'")
        for line in fh:
            if not line.strip():
                continue
            step, dim, sample, value = line.strip().split(",")
            arr[int(dim), int(sample), int(step)] = float(value)
    if np.isnan(arr).any():
        raise ValueError("forecast CSV does not cover the full sample grid")
    return ForecastSamples(arr)


def save_forecast_csv(samples: ForecastSamples, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("step,dim,sample,value\n")
        for d in range(samples.n_dims):
            for j in range(samples.n_samples):
                for h in range(samples.horizon):
                    fh.write(f"{h},{d},{j},{float(samples.samples[d, j, h])!r}\n")
