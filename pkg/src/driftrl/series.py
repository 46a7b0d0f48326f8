"""Time-series ingestion, synthesis, and offset-driver normalizations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numkit import Rng

SYNTH_KINDS = ("seasonal", "trend-seasonal", "random-walk", "regime-switch", "ar")


@dataclass(frozen=True)
class Series:
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) == 0:
            raise ValueError("series must be a nonempty 1-D sequence")
        if not np.isfinite(vals).all():
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class NormalizationStats:
    mean: float
    lo: float
    hi: float

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / (self.hi - self.lo)

    def invert(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * (self.hi - self.lo) + self.mean


def load_series_csv(path: str, column: str | int | None = None, skip_header: bool = False) -> Series:
    """Read one numeric column; '#' lines are comments.

    `column` may be an index or a header name (the latter implies a header
    row). With no column the file must be one value per line.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"empty series in {path}")
    col = 0
    if isinstance(column, str):
        header = [h.strip() for h in lines[0].split(",")]
        if column not in header:
            raise ValueError(f"column {column!r} not in header {header}")
        col = header.index(column)
        lines = lines[1:]
    else:
        if column is not None:
            col = column
        if skip_header:
            lines = lines[1:]
    if not lines:
        raise ValueError(f"empty series in {path}")
    vals = []
    for ln in lines:
        cells = ln.split(",")
        if col >= len(cells):
            raise ValueError(f"row {ln!r} has no column {col}")
        try:
            vals.append(float(cells[col]))
        except ValueError as exc:
            raise ValueError(f"non-numeric cell {cells[col]!r} in {path}") from exc
    return Series(np.array(vals), name=path)


def context_stats(series: Series, context_len: int) -> NormalizationStats:
    if context_len < 2:
        raise ValueError("context length must be >= 2")
    ctx = series.values[:context_len]
    lo, hi = float(ctx.min()), float(ctx.max())
    if hi == lo:
        raise ValueError("constant context: degenerate normalization range")
    return NormalizationStats(float(ctx.mean()), lo, hi)


def normalize(series: Series, context_len: int) -> tuple[Series, NormalizationStats]:
    """Center and range-scale using stats from the context prefix only.

    Values beyond the context are transformed with the same stats, so nothing
    computed at test time leaks into them.
    """
    stats = context_stats(series, context_len)
    return Series(stats.apply(series.values), name=series.name), stats


def affine_scale_transform(series: Series, beta: float, context_len: int) -> Series:
    """Map a series into a strictly positive scale factor around 1."""
    stats = context_stats(series, context_len)
    x = series.values
    out = 1.0 - beta + beta * np.exp((x - stats.mean) / (2.0 * (stats.hi - stats.lo)))
    return Series(out, name=series.name)


def synth_series(kind: str, length: int, rng: Rng, **params) -> Series:
    """Deterministic-per-seed synthetic offset drivers.

    Kinds: seasonal (sine + noise), trend-seasonal, random-walk,
    regime-switch (level jumps at geometric intervals), ar (stationary AR(1)).
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    t = np.arange(length, dtype=float)
    if kind == "seasonal":
        period = params.get("period", 12)
        noise = params.get("noise", 0.1)
        vals = np.sin(2 * math.pi * t / period)
        vals += noise * rng.gaussian_vec(length)
    elif kind == "trend-seasonal":
        period = params.get("period", 12)
        slope = params.get("slope", 0.01)
        noise = params.get("noise", 0.1)
        vals = slope * t + np.sin(2 * math.pi * t / period)
        vals += noise * rng.gaussian_vec(length)
    elif kind == "random-walk":
        step_std = params.get("step_std", 0.2)
        vals = np.cumsum(step_std * rng.gaussian_vec(length))
    elif kind == "regime-switch":
        switch_prob = params.get("switch_prob", 0.1)
        level_std = params.get("level_std", 1.0)
        noise = params.get("noise", 0.05)
        vals = np.empty(length)
        level = level_std * rng.gaussian()
        for i in range(length):
            if rng.uniform() < switch_prob:
                level = level_std * rng.gaussian()
            vals[i] = level + noise * rng.gaussian()
    elif kind == "ar":
        phi = params.get("phi", 0.9)
        noise = params.get("noise", 0.3)
        vals = np.empty(length)
        x = 0.0
        for i in range(length):
            x = phi * x + noise * rng.gaussian()
            vals[i] = x
    else:
        raise ValueError(f"unknown series kind {kind!r} (choose from {SYNTH_KINDS})")
    return Series(vals, name=kind)
