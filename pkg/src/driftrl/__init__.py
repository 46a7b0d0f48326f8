"""Test-time state estimation for control under time-varying observation offsets.

A diffusion denoiser proposes ground-truth state candidates from short
in-episode trajectory windows, a bootstrap forecaster predicts the offset from
its past values, and a dimension-wise closest-match rule fuses the two.  A
small continuous maze environment with scriptable offset schedules is included
for end-to-end evaluation.
"""

__version__ = "0.1.0"

from .diffusion import (
    VpSchedule,
    alpha_bar,
    build_denoiser,
    forward_noise,
    load_checkpoint,
    reverse_step,
    sample_candidates,
    save_checkpoint,
    vp_alpha,
)
from .fusion import dcm, kde_fuse, max_likelihood_fuse
from .maze import Maze, OffsetSchedule, build_offset_schedule, observe, reset, step
from .numkit import Rng
from .series import Series, load_series_csv, normalize, synth_series
from .forecast import ForecastRequest, ForecastSamples, forecast
from .agent import (
    Dataset,
    EstimatorConfig,
    EvalConfig,
    StateEstimator,
    generate_dataset,
    run_evaluation,
    train_denoiser,
    windows_from_dataset,
)
from .stats import RunSummary, welch_t_test

__all__ = [
    "Rng",
    "VpSchedule", "vp_alpha", "alpha_bar", "forward_noise", "reverse_step",
    "build_denoiser", "sample_candidates", "save_checkpoint", "load_checkpoint",
    "dcm", "kde_fuse", "max_likelihood_fuse",
    "Maze", "OffsetSchedule", "build_offset_schedule", "observe", "reset", "step",
    "Series", "load_series_csv", "normalize", "synth_series",
    "ForecastRequest", "ForecastSamples", "forecast",
    "Dataset", "EstimatorConfig", "EvalConfig", "StateEstimator",
    "generate_dataset", "run_evaluation", "train_denoiser", "windows_from_dataset",
    "RunSummary", "welch_t_test",
]
