"""Test-time orchestration: windows, scripted policy, datasets, estimators.

The episode loop follows a fixed ordering: act from the current estimate,
observe, push the (delta-observation, action) pair, re-estimate. Estimators
never see the true state or the offset schedule; the oracle mode is the one
exception and receives the truth through a dedicated argument.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import fusion
from .diffusion import DenoiserModel, TrainBatch, sample_candidates, training_step
from .forecast import ForecastRequest, ForecastSamples, forecast, point_mean, point_median
from .maze import (
    ACTION_DIM,
    STATE_DIM,
    Maze,
    OffsetSchedule,
    SimState,
    observe,
    reset,
    step,
)
from .numkit import Rng, adam_init

MODES = (
    "oracle",
    "raw-obs",
    "forecast-mean",
    "forecast-median",
    "dcm",
    "kde",
    "maxlik",
    "fs-mean",
    "fs-median",
    "dm",
    "dm-mad",
    "dm-ransac",
    "dm-running-mean",
    "dm-running-mean-ep",
    "med-noise",
    "med-dcm",
    "hist-forecast",
    "hist-forecast-dcm",
)

# Modes whose estimates consume forecasts fitted on revealed past offsets.
FORECAST_MODES = frozenset(
    {"forecast-mean", "forecast-median", "dcm", "kde", "maxlik", "fs-mean", "fs-median"}
)
# Modes that sample diffusion candidates.
MODEL_MODES = frozenset(
    {"dcm", "kde", "maxlik", "fs-mean", "fs-median", "dm", "dm-mad", "dm-ransac",
     "dm-running-mean", "dm-running-mean-ep", "med-noise", "med-dcm",
     "hist-forecast", "hist-forecast-dcm"}
)


class TrajWindow:
    """Ring buffer of the most recent (delta-observation, action) pairs."""

    def __init__(self, size: int, state_dim: int = STATE_DIM, action_dim: int = ACTION_DIM):
        if size < 1:
            raise ValueError("window size must be >= 1")
        self.size = size
        self.state_dim = state_dim
        self.action_dim = action_dim
        self._pairs: deque = deque(maxlen=size)

    def push(self, delta_o: np.ndarray, action: np.ndarray) -> None:
        self._pairs.append((np.asarray(delta_o, dtype=float).copy(),
                            np.asarray(action, dtype=float).copy()))

    def __len__(self) -> int:
        return len(self._pairs)

    @property
    def full(self) -> bool:
        return len(self._pairs) == self.size

    def flatten(self) -> np.ndarray:
        """Oldest-first [delta_o, action] concatenation; requires a full buffer."""
        if not self.full:
            raise ValueError("window not full")
        return np.concatenate([np.concatenate(pair) for pair in self._pairs])


def scripted_policy(maze: Maze, believed: np.ndarray, kp: float = 2.0, kd: float = 1.2) -> np.ndarray:
    """BFS-waypoint navigation with proportional-derivative control.

    Operates entirely on the believed state; a wrong belief produces wrong
    (but well-formed) actions, which is exactly the failure mode the state
    estimators are measured on.
    """
    believed = np.asarray(believed, dtype=float)
    pos = np.clip(believed[:2], 0.0, [maze.n_cols, maze.n_rows])
    vel = believed[2:4]
    goal_cell = maze.cell_of(maze.goal)
    dist = maze.distance_field(goal_cell)
    cell = maze.cell_of(pos)
    if maze.walls[cell] or not np.isfinite(dist[cell]):
        free = [c for c in maze.free_cells() if np.isfinite(dist[c])]
        if not free:
            return np.zeros(2)
        cell = min(free, key=lambda c: (c[1] + 0.5 - pos[0]) ** 2 + (c[0] + 0.5 - pos[1]) ** 2)
    if cell == goal_cell:
        target = maze.goal
        if float(np.linalg.norm(pos - maze.goal)) < 1e-9:
            return np.zeros(2)
    else:
        best = cell
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = (cell[0] + dr, cell[1] + dc)
            if 0 <= nb[0] < maze.n_rows and 0 <= nb[1] < maze.n_cols \
                    and dist[nb] < dist[best]:
                best = nb
        target = np.array([best[1] + 0.5, best[0] + 0.5])
    return np.clip(kp * (target - pos) - kd * vel, -1.0, 1.0)


def _waypoint_policy(maze: Maze, pos: np.ndarray, vel: np.ndarray,
                     waypoint_cell: tuple[int, int]) -> np.ndarray:
    dist = maze.distance_field(waypoint_cell)
    cell = maze.cell_of(pos)
    if not np.isfinite(dist[cell]):
        return np.zeros(2)
    if cell == waypoint_cell:
        target = np.array([cell[1] + 0.5, cell[0] + 0.5])
    else:
        best = cell
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb = (cell[0] + dr, cell[1] + dc)
            if 0 <= nb[0] < maze.n_rows and 0 <= nb[1] < maze.n_cols \
                    and dist[nb] < dist[best]:
                best = nb
        target = np.array([best[1] + 0.5, best[0] + 0.5])
    return np.clip(2.0 * (target - pos) - 1.2 * vel, -1.0, 1.0)


@dataclass
class Dataset:
    """Offset-free transitions grouped by episode."""

    states: np.ndarray       # (n, STATE_DIM)
    actions: np.ndarray      # (n, ACTION_DIM)
    next_states: np.ndarray  # (n, STATE_DIM)
    rewards: np.ndarray      # (n,)
    episode_ids: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.states)

    def save_jsonl(self, path: str) -> None:
        with open(path, "w") as fh:
            for i in range(len(self)):
                fh.write(json.dumps({
                    "s": self.states[i].tolist(),
                    "a": self.actions[i].tolist(),
                    "sp": self.next_states[i].tolist(),
                    "r": float(self.rewards[i]),
                    "ep": int(self.episode_ids[i]),
                }) + "\n")

    @classmethod
    def load_jsonl(cls, path: str) -> "Dataset":
        s, a, sp, r, ep = [], [], [], [], []
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                s.append(rec["s"]); a.append(rec["a"]); sp.append(rec["sp"])
                r.append(rec["r"]); ep.append(rec["ep"])
        if not s:
            raise ValueError(f"empty dataset in {path}")
        return cls(np.array(s), np.array(a), np.array(sp), np.array(r), np.array(ep))


def generate_dataset(maze: Maze, episodes: int, exploration_noise: float, rng: Rng) -> Dataset:
    """Expert-with-noise rollouts toward randomized waypoints, offsets off."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    goal_cell = maze.cell_of(maze.goal)
    s_list, a_list, sp_list, r_list, ep_list = [], [], [], [], []
    for ep in range(episodes):
        ep_rng = rng.child(ep)
        state = reset(maze, ep_rng)
        reach = maze.distance_field(maze.cell_of(state.pos))
        choices = [c for c in maze.free_cells() if np.isfinite(reach[c]) and c != goal_cell]
        if not choices:
            choices = [maze.cell_of(state.pos)]
        waypoint = choices[ep_rng.integer(0, len(choices) - 1)]
        for t in range(maze.t_max):
            a = _waypoint_policy(maze, state.pos, state.vel, waypoint)
            if exploration_noise > 0.0:
                a = np.clip(a + exploration_noise * ep_rng.gaussian_vec(2), -1.0, 1.0)
            nxt, r, done = step(maze, state, a)
            s_list.append(state.as_vector()); a_list.append(a)
            sp_list.append(nxt.as_vector()); r_list.append(r); ep_list.append(ep)
            state = nxt
            if done:
                break
            wc = np.array([waypoint[1] + 0.5, waypoint[0] + 0.5])
            if float(np.linalg.norm(state.pos - wc)) < 0.4:
                waypoint = choices[ep_rng.integer(0, len(choices) - 1)]
    return Dataset(np.array(s_list), np.array(a_list), np.array(sp_list),
                   np.array(r_list), np.array(ep_list))


def windows_from_dataset(dataset: Dataset, window: int) -> tuple[np.ndarray, np.ndarray]:
    """All (state, flattened window) training pairs with a full history."""
    states_out, windows_out = [], []
    for ep in np.unique(dataset.episode_ids):
        idx = np.where(dataset.episode_ids == ep)[0]
        # States along the episode: s_0 .. s_L with s_i -> a_i -> s_{i+1}.
        seq = np.vstack([dataset.states[idx], dataset.next_states[idx[-1]][None, :]])
        acts = dataset.actions[idx]
        deltas = np.diff(seq, axis=0)  # deltas[i] = s_{i+1} - s_i
        L = len(acts)
        for t in range(window, L + 1):
            pairs = [np.concatenate([deltas[t - window + i], acts[t - window + i]])
                     for i in range(window)]
            states_out.append(seq[t])
            windows_out.append(np.concatenate(pairs))
    if not states_out:
        raise ValueError("no windows: episodes shorter than the window size")
    return np.array(states_out), np.array(windows_out)


def fit_normalization(model: DenoiserModel, states: np.ndarray, windows: np.ndarray) -> DenoiserModel:
    """Attach dataset statistics so training/sampling share one scaling."""
    pair = model.state_dim + model.action_dim
    feats = windows.reshape(-1, pair)
    model.state_mu = states.mean(axis=0)
    model.state_sigma = np.maximum(states.std(axis=0), 1e-6)
    model.feat_mu = feats.mean(axis=0)
    model.feat_sigma = np.maximum(feats.std(axis=0), 1e-6)
    return model


def train_denoiser(
    model: DenoiserModel,
    states: np.ndarray,
    windows: np.ndarray,
    steps: int,
    rng: Rng,
    batch_size: int = 128,
    lr: float = 9e-4,
    val_fraction: float = 0.05,
    log_every: int = 250,
) -> tuple[DenoiserModel, list[tuple[int, float, float]]]:
    """Minibatch training; returns the model and a (step, loss, val_loss) curve."""
    n = len(states)
    perm = rng.child(1).permutation(n)
    n_val = max(1, int(n * val_fraction))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    opt = adam_init(model.params, lr=lr)
    curve: list[tuple[int, float, float]] = []
    draw = rng.child(2)
    noise = rng.child(3)
    for s in range(steps):
        batch_idx = train_idx[draw.integers(0, len(train_idx) - 1, batch_size)]
        batch = TrainBatch(states[batch_idx], windows[batch_idx])
        model, opt, loss = training_step(model, batch, opt, noise.child(s))
        if s % log_every == 0 or s == steps - 1:
            val_loss = validation_loss(model, states[val_idx], windows[val_idx], rng.child(4))
            curve.append((s, loss, val_loss))
    return model, curve


def validation_loss(model: DenoiserModel, states: np.ndarray, windows: np.ndarray, rng: Rng) -> float:
    """Noise-prediction loss on held-out pairs with a fixed evaluation stream."""
    sched = model.schedule
    B = len(states)
    ns = rng.integers(1, sched.n_steps, B)
    eps = rng.gaussian_vec(B * model.state_dim).reshape(B, model.state_dim)
    z0 = model.normalize_state(states)
    ab = np.array([sched.alpha_bar(int(n)) for n in ns])[:, None]
    z_n = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps
    pred = model.predict_eps(z_n, model.normalize_window(windows), ns)
    return float(np.mean(np.sum((pred - eps) ** 2, axis=1)))


@dataclass
class EpisodeLog:
    episode: int
    states: np.ndarray     # (T+1, STATE_DIM) ground truth
    observations: np.ndarray
    estimates: np.ndarray
    actions: np.ndarray    # (T, ACTION_DIM)
    rewards: np.ndarray    # (T,)
    success: bool
    offsets: np.ndarray    # (T+1, STATE_DIM) offset applied at each step

    @property
    def score(self) -> float:
        return 100.0 * float(self.success)

    def l2_errors(self) -> np.ndarray:
        return np.linalg.norm(self.states - self.estimates, axis=1)


@dataclass
class EstimatorConfig:
    mode: str
    window: int = 16
    k: int = 50
    l: int = 50
    mask: tuple[int, ...] = (0, 1)
    offset_ranges: np.ndarray | None = None  # per masked dim, for med-* scales
    mad_eps: float = 3.0
    ransac_eps: float = 2.5
    ransac_iters: int = 100
    med_noise_std: float = 0.0
    hist_context: int = 64
    hist_method: str = "ar-bootstrap"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown estimator mode {self.mode!r}")


class StateEstimator:
    """Dispatches one of the estimation strategies, keeping per-run state.

    For the first `window` steps every forecast-backed mode falls back to
    observation minus the forecast sample mean; model-only modes fall back to
    the raw observation.
    """

    def __init__(self, cfg: EstimatorConfig, model: DenoiserModel | None = None):
        if cfg.mode in MODEL_MODES and model is None:
            raise ValueError(f"mode {cfg.mode!r} requires a diffusion model")
        self.cfg = cfg
        self.model = model
        self.welford = fusion.WelfordState(STATE_DIM)
        self.offset_history: list[np.ndarray] = []   # per-episode medians (hist/med modes)
        self._episode_offsets: list[np.ndarray] = []
        self._med_prev: np.ndarray | None = None     # med-* carried offset estimate
        self._hist_samples: ForecastSamples | None = None
        self._forecast: ForecastSamples | None = None
        self._intervals_per_episode = 1
        self._episode_in_block = 0

    # -- block / episode lifecycle -------------------------------------------------

    def begin_block(self, rng: Rng) -> None:
        cfg = self.cfg
        if cfg.mode in ("hist-forecast", "hist-forecast-dcm") and self.offset_history:
            hist = np.array(self.offset_history[-cfg.hist_context:])
            horizon = 0  # set in begin_episode via P; computed lazily instead
            self._hist_block_rng = rng
            self._hist_context_arr = hist
        else:
            self._hist_context_arr = None

    def fit_hist_forecast(self, horizon: int, rng: Rng) -> None:
        cfg = self.cfg
        if self._hist_context_arr is None or len(self._hist_context_arr) < 2:
            self._hist_samples = None
            return
        ctx = [self._hist_context_arr[:, d] for d in cfg.mask]
        req = ForecastRequest(ctx, horizon, cfg.l)
        self._hist_samples = forecast(cfg.hist_method, req, rng)

    def begin_episode(self, episode_in_block: int, forecast_samples: ForecastSamples | None,
                      intervals_per_episode: int, rng: Rng) -> None:
        cfg = self.cfg
        self._forecast = forecast_samples
        self._intervals_per_episode = intervals_per_episode
        self._episode_in_block = episode_in_block
        self._episode_offsets = []
        self._ep_rng = rng
        if cfg.mode == "dm-running-mean-ep":
            self.welford = self.welford.reset()
        if cfg.mode == "med-noise" and self._med_prev is not None:
            walk = cfg.med_noise_std * rng.child(77).gaussian_vec(STATE_DIM)
            walk[[d for d in range(STATE_DIM) if d not in cfg.mask]] = 0.0
            self._med_prev = self._med_prev + walk

    def end_episode(self) -> None:
        if self._episode_offsets:
            med = np.median(np.array(self._episode_offsets), axis=0)
            self.offset_history.append(med)
            if self.cfg.mode in ("med-noise", "med-dcm"):
                if self.cfg.mode == "med-dcm" or self._med_prev is None:
                    self._med_prev = med

    # -- helpers -------------------------------------------------------------------

    def _embed_offsets(self, masked: np.ndarray) -> np.ndarray:
        """(l, len(mask)) masked-dim offsets -> (l, STATE_DIM) full vectors."""
        out = np.zeros((masked.shape[0], STATE_DIM))
        out[:, list(self.cfg.mask)] = masked
        return out

    def _forecast_offsets(self, horizon_step: int, samples: ForecastSamples) -> np.ndarray:
        return self._embed_offsets(samples.at_step(horizon_step))

    def _mean_offset(self, horizon_step: int, samples: ForecastSamples, median: bool = False) -> np.ndarray:
        path = point_median(samples) if median else point_mean(samples)
        full = np.zeros(STATE_DIM)
        full[list(self.cfg.mask)] = path[:, horizon_step]
        return full

    def _candidates(self, window: TrajWindow, rng: Rng, k: int | None = None) -> np.ndarray:
        return sample_candidates(self.model, window.flatten(), k or self.cfg.k, rng)

    def _record_offset(self, o: np.ndarray, chosen: np.ndarray) -> None:
        off = np.zeros(STATE_DIM)
        off[list(self.cfg.mask)] = (o - chosen)[list(self.cfg.mask)]
        self._episode_offsets.append(off)

    # -- the dispatch --------------------------------------------------------------

    def estimate(
        self,
        o: np.ndarray,
        window: TrajWindow,
        t: int,
        horizon_step: int,
        rng: Rng,
        true_state: np.ndarray | None = None,
    ) -> np.ndarray:
        cfg = self.cfg
        mode = cfg.mode
        o = np.asarray(o, dtype=float)
        model_ready = window.full and t > cfg.window

        if mode == "oracle":
            if true_state is None:
                raise ValueError("oracle mode needs the true state")
            return np.asarray(true_state, dtype=float).copy()
        if mode == "raw-obs":
            return o.copy()

        if mode in FORECAST_MODES:
            if self._forecast is None:
                raise ValueError(f"mode {mode!r} needs forecast samples")
            fs = self._forecast
            if mode == "forecast-mean":
                return o - self._mean_offset(horizon_step, fs)
            if mode == "forecast-median":
                return o - self._mean_offset(horizon_step, fs, median=True)
            if not model_ready:
                return o - self._mean_offset(horizon_step, fs)
            X = self._candidates(window, rng)
            Y = o - self._forecast_offsets(horizon_step, fs)
            if mode == "dcm":
                return fusion.dcm(X, Y)
            if mode == "kde":
                return fusion.kde_fuse(X, Y)
            if mode == "maxlik":
                return fusion.max_likelihood_fuse(X, Y)
            if mode == "fs-mean":
                return fusion.closest_to_center(X, Y.mean(axis=0))
            return fusion.closest_to_center(X, np.median(Y, axis=0))

        # Model-only and history modes below.
        if mode == "dm":
            if not model_ready:
                return o.copy()
            X = self._candidates(window, rng)
            chosen = X[0]
            self._record_offset(o, chosen)
            return chosen.copy()

        if mode in ("dm-mad", "dm-ransac"):
            if not model_ready:
                return o.copy()
            X = self._candidates(window, rng)
            if mode == "dm-mad":
                return fusion.mad_offset_estimate(o, X, cfg.mad_eps)
            return fusion.ransac_offset_estimate(o, X, rng.child(31), cfg.ransac_eps,
                                                 cfg.ransac_iters)

        if mode in ("dm-running-mean", "dm-running-mean-ep"):
            if model_ready:
                X = self._candidates(window, rng)
                for row in X:
                    off = np.zeros(STATE_DIM)
                    off[list(cfg.mask)] = (o - row)[list(cfg.mask)]
                    self.welford = fusion.welford_update(self.welford, off)
            if self.welford.count == 0:
                return o.copy()
            return o - self.welford.mean

        if mode == "med-noise":
            if self._med_prev is not None:
                return o - self._med_prev
            # First episode: behave like dm while collecting offsets.
            if not model_ready:
                return o.copy()
            X = self._candidates(window, rng)
            chosen = X[0]
            self._record_offset(o, chosen)
            return chosen.copy()

        if mode == "med-dcm":
            if self._med_prev is None:
                if not model_ready:
                    return o.copy()
                X = self._candidates(window, rng)
                chosen = X[0]
                self._record_offset(o, chosen)
                return chosen.copy()
            if not model_ready:
                return o - self._med_prev
            X = self._candidates(window, rng)
            ranges = self.cfg.offset_ranges
            std = 0.1 * (ranges if ranges is not None else np.ones(len(cfg.mask)))
            draws = self._med_prev[list(cfg.mask)] + std * np.stack(
                [rng.child(400 + j).gaussian_vec(len(cfg.mask)) for j in range(cfg.l)]
            )
            Y = o - self._embed_offsets(draws)
            z = fusion.dcm(X, Y)
            self._record_offset(o, z)
            return z

        if mode in ("hist-forecast", "hist-forecast-dcm"):
            fs = self._hist_samples
            if model_ready:
                X = self._candidates(window, rng)
                self._record_offset(o, X[0])
            else:
                X = None
            if fs is None:
                return o.copy()
            if mode == "hist-forecast" or X is None:
                return o - self._mean_offset(horizon_step, fs)
            Y = o - self._forecast_offsets(horizon_step, fs)
            return fusion.dcm(X, Y)

        raise AssertionError(f"unhandled mode {mode!r}")


def run_episode(
    maze: Maze,
    schedule: OffsetSchedule | None,
    episode: int,
    episode_in_block: int,
    estimator: StateEstimator,
    rng: Rng,
    forecast_samples: ForecastSamples | None = None,
) -> EpisodeLog:
    """One evaluation episode with the act/observe/push/estimate ordering."""
    cfg = estimator.cfg
    ipe = schedule.intervals_per_episode if schedule is not None else 1
    f = schedule.f if schedule is not None else maze.t_max
    window = TrajWindow(cfg.window)
    est_rng = rng.child(1)
    env_rng = rng.child(2)

    state = reset(maze, env_rng)
    o = observe(state, schedule, episode, 0)
    hstep = episode_in_block * ipe + (min(0 // f, ipe - 1) if ipe > 1 else 0)
    estimator.begin_episode(episode_in_block, forecast_samples, ipe, rng.child(3))
    s_tilde = estimator.estimate(o, window, 0, hstep, est_rng.child(0),
                                 true_state=state.as_vector() if cfg.mode == "oracle" else None)

    states = [state.as_vector()]
    obs = [o]
    estimates = [s_tilde]
    offsets = [o - state.as_vector()]
    actions, rewards = [], []
    success = False
    for t in range(maze.t_max):
        a = scripted_policy(maze, s_tilde)
        nxt, r, done = step(maze, state, a)
        o_next = observe(nxt, schedule, episode, t + 1)
        window.push(o_next - o, a)
        seg = min((t + 1) // f, ipe - 1) if ipe > 1 else 0
        hstep = episode_in_block * ipe + seg
        s_tilde = estimator.estimate(
            o_next, window, t + 1, hstep, est_rng.child(t + 1),
            true_state=nxt.as_vector() if cfg.mode == "oracle" else None,
        )
        states.append(nxt.as_vector())
        obs.append(o_next)
        estimates.append(s_tilde)
        offsets.append(o_next - nxt.as_vector())
        actions.append(a)
        rewards.append(r)
        state, o = nxt, o_next
        if done:
            success = True
            break
    estimator.end_episode()
    return EpisodeLog(episode, np.array(states), np.array(obs), np.array(estimates),
                      np.array(actions), np.array(rewards), success, np.array(offsets))


@dataclass
class EvalConfig:
    episodes_per_block: int = 10   # P
    blocks: int = 5
    context_len: int = 64          # C
    n_forecast_samples: int = 50   # l
    forecast_method: str = "seasonal-naive-bootstrap"


def run_evaluation(
    maze: Maze,
    schedule: OffsetSchedule,
    estimator: StateEstimator,
    cfg: EvalConfig,
    seed_rng: Rng,
    initial_context: list[np.ndarray] | None = None,
) -> list[EpisodeLog]:
    """Blocks of P episodes; the forecaster refits on revealed offsets between
    blocks, history modes refit on their own model-derived history."""
    mask = list(estimator.cfg.mask)
    ipe = schedule.intervals_per_episode
    P = cfg.episodes_per_block
    horizon = P * ipe
    needs_forecast = estimator.cfg.mode in FORECAST_MODES
    context = [np.asarray(c, dtype=float).copy() for c in (initial_context or [])]
    logs: list[EpisodeLog] = []
    for block in range(cfg.blocks):
        block_rng = seed_rng.child(10_000 + block)
        samples = None
        if needs_forecast:
            if not context:
                raise ValueError("forecast-backed modes need an initial offset context")
            ctx = [c[-cfg.context_len:] for c in context]
            req = ForecastRequest(ctx, horizon, cfg.n_forecast_samples)
            samples = forecast(cfg.forecast_method, req, block_rng.child(1))
        estimator.begin_block(block_rng.child(2))
        if estimator.cfg.mode in ("hist-forecast", "hist-forecast-dcm"):
            estimator.fit_hist_forecast(horizon, block_rng.child(3))
        for p in range(P):
            episode = block * P + p
            logs.append(run_episode(maze, schedule, episode, p, estimator,
                                    block_rng.child(100 + p), samples))
        # Reveal the block's true offsets and extend the forecaster context.
        if needs_forecast:
            revealed = np.array([
                schedule.alpha_scale * schedule.base[(block * P + p) * ipe + s]
                for p in range(P) for s in range(ipe)
            ])
            context = [np.concatenate([c, revealed[:, d]]) for c, d in zip(context, mask)]
    return logs
