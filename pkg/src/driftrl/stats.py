"""Metrics and statistics: prediction-error summaries and Welch's t-test.

The t-distribution tail probability is computed in-house via the regularized
incomplete beta function (continued-fraction evaluation), so the package
carries no statistics dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .agent import EpisodeLog


def l2_error_stats(logs: list[EpisodeLog]) -> tuple[float, float, float, float]:
    """(mean, std, max, min) of per-step estimate errors over all episodes."""
    if not logs:
        raise ValueError("no episode logs")
    errs = np.concatenate([log.l2_errors() for log in logs])
    return float(errs.mean()), float(errs.std()), float(errs.max()), float(errs.min())


@dataclass(frozen=True)
class RunSummary:
    mode: str
    series: str
    seed: int
    score_mean: float
    score_std: float
    err_mean: float
    err_std: float
    err_max: float
    err_min: float
    episodes: int

    @classmethod
    def from_logs(cls, mode: str, series: str, seed: int, logs: list[EpisodeLog]) -> "RunSummary":
        scores = np.array([log.score for log in logs])
        err_mean, err_std, err_max, err_min = l2_error_stats(logs)
        return cls(mode, series, seed, float(scores.mean()), float(scores.std()),
                   err_mean, err_std, err_max, err_min, len(logs))


SUMMARY_HEADER = "mode,series,seed,score,score_std,err_mean,err_std,err_max,err_min,episodes"


def write_summary_csv(summaries: list[RunSummary], path: str) -> None:
    with open(path, "w") as fh:
        fh.write(SUMMARY_HEADER + "\n")
        for s in summaries:
            fh.write(f"{s.mode},{s.series},{s.seed},{s.score_mean!r},{s.score_std!r},"
                     f"{s.err_mean!r},{s.err_std!r},{s.err_max!r},{s.err_min!r},{s.episodes}\n")


# -- incomplete beta / Student t --------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta function (modified Lentz)."""
    MAXIT, EPS, FPMIN = 200, 3e-14, 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if abs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf2(t: float, dof: float) -> float:
    """Two-sided p-value for a Student-t statistic."""
    if dof <= 0.0:
        raise ValueError("degrees of freedom must be positive")
    x = dof / (dof + t * t)
    return regularized_incomplete_beta(dof / 2.0, 0.5, x)


def welch_t_test(sample_a, sample_b) -> tuple[float, float, float]:
    """Welch statistic, Welch-Satterthwaite dof, two-sided p."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least 2 values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = len(a), len(b)
    se2 = va / na + vb / nb
    if se2 <= 0.0:
        raise ValueError("degenerate variance: samples are constant")
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    dof = se2**2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return float(t), float(dof), float(student_t_sf2(t, dof))


@dataclass(frozen=True)
class SweepResult:
    """Mean score per (alpha, mode) with across-seed spread."""

    grid: tuple[float, ...]
    modes: tuple[str, ...]
    score_mean: np.ndarray  # (len(grid), len(modes))
    score_std: np.ndarray

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("alpha,mode,score,score_std\n")
            for i, alpha in enumerate(self.grid):
                for j, mode in enumerate(self.modes):
                    fh.write(f"{alpha!r},{mode},{self.score_mean[i, j]!r},"
                             f"{self.score_std[i, j]!r}\n")


def aggregate_sweep(grid, modes, cell_scores: dict[tuple[float, str], list[float]]) -> SweepResult:
    """Collect per-seed scores into the sorted (alpha, mode) grid."""
    grid = tuple(sorted(set(grid)))
    modes = tuple(modes)
    mean = np.zeros((len(grid), len(modes)))
    std = np.zeros((len(grid), len(modes)))
    for i, alpha in enumerate(grid):
        for j, mode in enumerate(modes):
            vals = np.array(cell_scores[(alpha, mode)])
            mean[i, j] = vals.mean()
            std[i, j] = vals.std()
    return SweepResult(grid, modes, mean, std)
