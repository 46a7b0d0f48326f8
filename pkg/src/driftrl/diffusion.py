"""Conditional denoising diffusion model over maze states.

The denoiser is a plain MLP fed with the concatenation of the noisy state,
the flattened (delta-observation, action) window, and a sinusoidal embedding
of the diffusion step. Training and sampling run in a normalized state space;
the normalization constants live in the checkpoint so evaluation can never
mismatch the training configuration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .numkit import (
    AdamState,
    MlpParams,
    Rng,
    adam_step,
    mlp_backward,
    mlp_forward,
    mlp_from_json,
    mlp_init,
    mlp_to_json,
    sinusoidal_embed_batch,
)

CHECKPOINT_VERSION = 1


class VpSchedule:
    """Variance-preserving schedule: per-step alpha(n) and its running product."""

    def __init__(self, n_steps: int = 10, beta_min: float = 0.1, beta_max: float = 10.0):
        if n_steps < 1:
            raise ValueError("n_steps must be >= 1")
        if not (0.0 < beta_min < beta_max):
            raise ValueError("need 0 < beta_min < beta_max")
        self.n_steps = n_steps
        self.beta_min = beta_min
        self.beta_max = beta_max
        n = np.arange(1, n_steps + 1)
        exponent = beta_min / n_steps + (beta_max - beta_min) * (2 * n - 1) / (2 * n_steps**2)
        self._alphas = np.exp(-exponent)
        self._alpha_bars = np.cumprod(self._alphas)

    def alpha(self, n: int) -> float:
        if not 1 <= n <= self.n_steps:
            raise ValueError(f"diffusion step {n} outside 1..{self.n_steps}")
        return float(self._alphas[n - 1])

    def alpha_bar(self, n: int) -> float:
        if not 1 <= n <= self.n_steps:
            raise ValueError(f"diffusion step {n} outside 1..{self.n_steps}")
        return float(self._alpha_bars[n - 1])


def vp_alpha(n: int, schedule: VpSchedule) -> float:
    return schedule.alpha(n)


def alpha_bar(n: int, schedule: VpSchedule) -> float:
    return schedule.alpha_bar(n)


def forward_noise(s0: np.ndarray, n: int, eps: np.ndarray, schedule: VpSchedule) -> np.ndarray:
    """Noise a clean sample up to diffusion step n."""
    s0 = np.asarray(s0, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if s0.shape != eps.shape:
        raise ValueError("noise shape must match sample shape")
    ab = schedule.alpha_bar(n)
    return math.sqrt(ab) * s0 + math.sqrt(1.0 - ab) * eps


def reverse_step(
    schedule: VpSchedule,
    s_n: np.ndarray,
    eps_pred: np.ndarray,
    n: int,
    noise: np.ndarray,
) -> np.ndarray:
    """One denoising step; the stochastic term is forced to zero at n=1."""
    a = schedule.alpha(n)
    ab = schedule.alpha_bar(n)
    mean = s_n / math.sqrt(a) - (1.0 - a) / math.sqrt(a * (1.0 - ab)) * eps_pred
    if n == 1:
        return mean
    return mean + math.sqrt(1.0 - a) * noise


@dataclass
class DenoiserModel:
    """Noise-prediction MLP plus everything needed to use it consistently."""

    params: MlpParams
    schedule: VpSchedule
    state_dim: int
    action_dim: int
    window: int
    embed_dim: int
    # Normalization: states map to (s - state_mu) / state_sigma before the
    # diffusion process; window features are scaled per (delta-obs, action) slot.
    state_mu: np.ndarray = None
    state_sigma: np.ndarray = None
    feat_mu: np.ndarray = None
    feat_sigma: np.ndarray = None

    def __post_init__(self):
        if self.state_mu is None:
            self.state_mu = np.zeros(self.state_dim)
        if self.state_sigma is None:
            self.state_sigma = np.ones(self.state_dim)
        pair = self.state_dim + self.action_dim
        if self.feat_mu is None:
            self.feat_mu = np.zeros(pair)
        if self.feat_sigma is None:
            self.feat_sigma = np.ones(pair)
        expect_in = self.state_dim + self.window * pair + self.embed_dim
        if self.params.in_dim != expect_in:
            raise ValueError(f"MLP input dim {self.params.in_dim}, expected {expect_in}")
        if self.params.out_dim != self.state_dim:
            raise ValueError("MLP output dim must equal state dim")

    @property
    def window_feat_dim(self) -> int:
        return self.window * (self.state_dim + self.action_dim)

    def normalize_state(self, s: np.ndarray) -> np.ndarray:
        return (np.asarray(s, dtype=float) - self.state_mu) / self.state_sigma

    def denormalize_state(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.state_sigma + self.state_mu

    def normalize_window(self, flat: np.ndarray) -> np.ndarray:
        flat = np.asarray(flat, dtype=float)
        pair = self.state_dim + self.action_dim
        shaped = flat.reshape(*flat.shape[:-1], self.window, pair)
        out = (shaped - self.feat_mu) / self.feat_sigma
        return out.reshape(*flat.shape[:-1], self.window_feat_dim)

    def eps_model_input(self, z_n: np.ndarray, window_norm: np.ndarray, ns: np.ndarray) -> np.ndarray:
        emb = sinusoidal_embed_batch(ns, self.embed_dim)
        return np.concatenate([z_n, window_norm, emb], axis=1)

    def predict_eps(self, z_n: np.ndarray, window_norm: np.ndarray, ns: np.ndarray) -> np.ndarray:
        """Batched noise prediction in normalized space."""
        return mlp_forward(self.params, self.eps_model_input(z_n, window_norm, ns))


def build_denoiser(
    state_dim: int,
    action_dim: int,
    window: int,
    rng: Rng,
    schedule: VpSchedule | None = None,
    hidden: tuple[int, ...] = (128, 128, 128),
    embed_dim: int = 64,
) -> DenoiserModel:
    schedule = schedule or VpSchedule()
    in_dim = state_dim + window * (state_dim + action_dim) + embed_dim
    params = mlp_init([in_dim, *hidden, state_dim], rng)
    # Zero-init the output layer so a fresh model predicts zero noise; this
    # keeps the first training steps well-scaled.
    params.weights[-1][:] = 0.0
    params.biases[-1][:] = 0.0
    return DenoiserModel(params, schedule, state_dim, action_dim, window, embed_dim)


@dataclass
class TrainBatch:
    """Clean states paired with their flattened conditioning windows."""

    states: np.ndarray   # (B, state_dim)
    windows: np.ndarray  # (B, window * (state_dim + action_dim))

    def __post_init__(self):
        if len(self.states) == 0:
            raise ValueError("empty batch")
        if self.states.shape[0] != self.windows.shape[0]:
            raise ValueError("states/windows batch mismatch")


def training_step(
    model: DenoiserModel,
    batch: TrainBatch,
    opt: AdamState,
    rng: Rng,
    eps_override: np.ndarray | None = None,
) -> tuple[DenoiserModel, AdamState, float]:
    """One Adam step on the mean squared noise-prediction error.

    Per item: a uniform diffusion step, a fresh standard-normal noise vector,
    a noisy sample from the forward process, and the squared error between
    injected and predicted noise. Returns the pre-step loss. `eps_override`
    exists for oracle wiring in tests.
    """
    sched = model.schedule
    B = batch.states.shape[0]
    d = model.state_dim
    ns = rng.integers(1, sched.n_steps, B)
    if eps_override is not None:
        eps = np.asarray(eps_override, dtype=float)
    else:
        eps = rng.gaussian_vec(B * d).reshape(B, d)

    z0 = model.normalize_state(batch.states)
    ab = np.array([sched.alpha_bar(int(n)) for n in ns])[:, None]
    z_n = np.sqrt(ab) * z0 + np.sqrt(1.0 - ab) * eps

    w_norm = model.normalize_window(batch.windows)
    x = model.eps_model_input(z_n, w_norm, ns)
    pred = model.predict_eps(z_n, w_norm, ns)
    resid = pred - eps
    loss = float(np.mean(np.sum(resid * resid, axis=1)))
    if not math.isfinite(loss):
        raise ValueError("non-finite training loss")

    upstream = 2.0 * resid / B
    grads, _ = mlp_backward(model.params, x, upstream)
    new_params, new_opt = adam_step(model.params, grads, opt)
    new_model = DenoiserModel(
        new_params, sched, model.state_dim, model.action_dim, model.window,
        model.embed_dim, model.state_mu, model.state_sigma,
        model.feat_mu, model.feat_sigma,
    )
    return new_model, new_opt, loss


def sample_candidates(model: DenoiserModel, window_flat: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    """Run k reverse chains in parallel and return a (k, state_dim) matrix.

    Chain i draws all of its noise from the child stream keyed by i, so the
    first chain is identical whether k=1 or k=50.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    window_flat = np.asarray(window_flat, dtype=float)
    if window_flat.shape != (model.window_feat_dim,):
        raise ValueError(
            f"window has shape {window_flat.shape}, expected ({model.window_feat_dim},)"
        )
    sched = model.schedule
    d = model.state_dim
    chains = [rng.child(i) for i in range(k)]
    z = np.stack([c.gaussian_vec(d) for c in chains])
    w_norm = np.tile(model.normalize_window(window_flat), (k, 1))
    for n in range(sched.n_steps, 0, -1):
        ns = np.full(k, n)
        eps_pred = model.predict_eps(z, w_norm, ns)
        if n > 1:
            noise = np.stack([c.gaussian_vec(d) for c in chains])
        else:
            noise = np.zeros((k, d))
        a = sched.alpha(n)
        ab = sched.alpha_bar(n)
        z = z / math.sqrt(a) - (1.0 - a) / math.sqrt(a * (1.0 - ab)) * eps_pred
        if n > 1:
            z = z + math.sqrt(1.0 - a) * noise
        if not np.isfinite(z).all():
            raise ValueError(f"non-finite sample at diffusion step {n}")
    return model.denormalize_state(z)


def save_checkpoint(model: DenoiserModel, path: str) -> None:
    obj = {
        "version": CHECKPOINT_VERSION,
        "state_dim": model.state_dim,
        "action_dim": model.action_dim,
        "window": model.window,
        "embed_dim": model.embed_dim,
        "schedule": {
            "n_steps": model.schedule.n_steps,
            "beta_min": model.schedule.beta_min,
            "beta_max": model.schedule.beta_max,
        },
        "state_mu": model.state_mu.tolist(),
        "state_sigma": model.state_sigma.tolist(),
        "feat_mu": model.feat_mu.tolist(),
        "feat_sigma": model.feat_sigma.tolist(),
        "mlp": mlp_to_json(model.params),
    }
    with open(path, "w") as fh:
        json.dump(obj, fh)


def load_checkpoint(path: str) -> DenoiserModel:
    with open(path) as fh:
        obj = json.load(fh)
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {obj.get('version')}")
    sched = VpSchedule(
        obj["schedule"]["n_steps"], obj["schedule"]["beta_min"], obj["schedule"]["beta_max"]
    )
    return DenoiserModel(
        mlp_from_json(obj["mlp"]),
        sched,
        obj["state_dim"],
        obj["action_dim"],
        obj["window"],
        obj["embed_dim"],
        np.array(obj["state_mu"]),
        np.array(obj["state_sigma"]),
        np.array(obj["feat_mu"]),
        np.array(obj["feat_sigma"]),
    )
