"""Candidate fusion and robust offset aggregation.

X rows are diffusion candidates, Y rows are forecast-implied states
(observation minus sampled offset). All estimators break ties toward the
lowest index so results are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numkit import Rng

MAD_FLOOR = 1e-9
STD_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-300


def _check_sets(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise ValueError("candidate sets must share a dimension")
    if not (np.isfinite(X).all() and np.isfinite(Y).all()):
        raise ValueError("candidate sets must be finite")
    return X, Y


def dcm(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Dimension-wise closest match.

    For each dimension d, adopt the coordinate of the Y row whose distance to
    the nearest X coordinate in that dimension is minimal.
    """
    X, Y = _check_sets(X, Y)
    n = X.shape[1]
    z = np.empty(n)
    for d in range(n):
        # scores[j] = min_i |x_id - y_jd|; argmin keeps the lowest j on ties.
        dist = np.abs(X[:, d][:, None] - Y[:, d][None, :])
        scores = dist.min(axis=0)
        z[d] = Y[int(np.argmin(scores)), d]
    return z


def scott_bandwidth(samples: np.ndarray) -> float:
    """Univariate Scott rule: sample std times m^(-1/5), floored."""
    samples = np.asarray(samples, dtype=float)
    m = len(samples)
    if m < 2:
        raise ValueError("need at least 2 samples for a bandwidth")
    h = float(samples.std(ddof=1)) * m ** (-0.2)
    return max(h, STD_FLOOR)


def kde_fuse(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Weight every Y row by the product of per-dim Gaussian KDEs fit on X."""
    X, Y = _check_sets(X, Y)
    k, n = X.shape
    log_w = np.zeros(len(Y))
    for d in range(n):
        h = scott_bandwidth(X[:, d]) if k >= 2 else STD_FLOOR
        u = (Y[:, d][:, None] - X[:, d][None, :]) / h
        dens = np.exp(-0.5 * u * u).sum(axis=1) / (k * h * math.sqrt(2 * math.pi))
        with np.errstate(divide="ignore"):
            log_w += np.log(dens)
    w = np.exp(log_w - log_w.max()) if np.isfinite(log_w).any() else np.zeros(len(Y))
    # Underflow fallback on the raw (unshifted) weights.
    if not np.isfinite(log_w).any() or np.exp(log_w[np.isfinite(log_w)]).sum() < WEIGHT_FLOOR:
        return Y.mean(axis=0)
    w = np.where(np.isfinite(log_w), w, 0.0)
    return (w[:, None] * Y).sum(axis=0) / w.sum()


def max_likelihood_fuse(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pick the X row most likely under a diagonal Gaussian fit to Y."""
    X, Y = _check_sets(X, Y)
    mu = Y.mean(axis=0)
    sigma = np.maximum(Y.std(axis=0, ddof=0), STD_FLOOR)
    scores = -np.sum(((X - mu) / sigma) ** 2, axis=1)
    return X[int(np.argmax(scores))].copy()


def closest_to_center(X: np.ndarray, center: np.ndarray) -> np.ndarray:
    """X row with minimal Euclidean distance to the given center."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    center = np.asarray(center, dtype=float)
    d2 = np.sum((X - center) ** 2, axis=1)
    return X[int(np.argmin(d2))].copy()


def mad_offset_estimate(o: np.ndarray, X: np.ndarray, eps: float = 3.0) -> np.ndarray:
    """Robust MAD-filtered median of the offsets implied by each candidate."""
    o = np.asarray(o, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    offsets = o - X
    med = np.median(offsets, axis=0)
    mad = np.maximum(np.median(np.abs(offsets - med), axis=0), MAD_FLOOR)
    keep = np.all(np.abs(offsets - med) <= eps * mad, axis=1)
    est = np.median(offsets[keep], axis=0) if keep.any() else med
    return o - est


def ransac_offset_estimate(
    o: np.ndarray, X: np.ndarray, rng: Rng, eps: float = 2.5, iters: int = 100
) -> np.ndarray:
    """RANSAC over candidate offsets with a per-dim eps*MAD inlier threshold."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    o = np.asarray(o, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    offsets = o - X
    med = np.median(offsets, axis=0)
    mad = np.maximum(np.median(np.abs(offsets - med), axis=0), MAD_FLOOR)
    thresh = eps * mad
    best_count, best_inliers = -1, None
    for _ in range(iters):
        cand = offsets[rng.integer(0, len(offsets) - 1)]
        inliers = np.all(np.abs(offsets - cand) <= thresh, axis=1)
        count = int(inliers.sum())
        if count > best_count:
            best_count, best_inliers = count, inliers
    est = offsets[best_inliers].mean(axis=0)
    return o - est


@dataclass
class WelfordState:
    """Single-pass running mean and M2 over vectors."""

    dim: int
    count: int = 0
    mean: np.ndarray = None
    m2: np.ndarray = None

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.dim)
        if self.m2 is None:
            self.m2 = np.zeros(self.dim)

    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros(self.dim)
        return self.m2 / (self.count - 1)

    def reset(self) -> "WelfordState":
        return WelfordState(self.dim)


def welford_update(state: WelfordState, sample: np.ndarray) -> WelfordState:
    sample = np.asarray(sample, dtype=float)
    if sample.shape != (state.dim,):
        raise ValueError("sample dimension mismatch")
    count = state.count + 1
    delta = sample - state.mean
    mean = state.mean + delta / count
    m2 = state.m2 + delta * (sample - mean)
    return WelfordState(state.dim, count, mean, m2)
