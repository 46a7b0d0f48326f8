"""Deterministic numeric core: dense MLP with manual backprop, Adam, embeddings, PRNG."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# The generator is pinned: Philox (4x64 counters, 128-bit key). Golden tests
# freeze its output, so changing this breaks reproducibility on purpose.
RNG_ALGORITHM = "philox4x64"

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One round of splitmix64, used to derive child stream ids."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


class Rng:
    """Counter-based PRNG with explicit (seed, stream) identity.

    Identical (seed, stream) pairs produce identical sequences on every
    platform. Child streams are derived with splitmix64 so independent
    components (chains, episodes, dimensions) can draw in parallel without
    coupling.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = seed & _MASK64
        self.stream = stream & _MASK64
        key = (self.stream << 64) | self.seed
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, index: int) -> "Rng":
        """Derive an independent stream keyed by (current stream, index)."""
        derived = _splitmix64(self.stream ^ _splitmix64(index & _MASK64))
        return Rng(self.seed, derived)

    def gaussian(self) -> float:
        return float(self._gen.standard_normal())

    def gaussian_vec(self, dim: int) -> np.ndarray:
        return self._gen.standard_normal(dim)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return float(self._gen.uniform(lo, hi))

    def uniform_vec(self, dim: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
        return self._gen.uniform(lo, hi, dim)

    def integer(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return int(self._gen.integers(lo, hi + 1))

    def integers(self, lo: int, hi: int, size: int) -> np.ndarray:
        return self._gen.integers(lo, hi + 1, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def _silu(z: np.ndarray) -> np.ndarray:
    return z / (1.0 + np.exp(-z))


def _silu_grad(z: np.ndarray) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-z))
    return sig * (1.0 + z * (1.0 - sig))


@dataclass
class MlpParams:
    """Weights/biases for a dense MLP; SiLU on hidden layers, linear output.

    weights[i] has shape (in_dim, out_dim) so batched inputs compose as
    ``x @ W + b``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights/biases length mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: bad shapes {w.shape} / {b.shape}")
            if i > 0 and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: dimension chain broken")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameters")

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def mlp_init(dims: list[int], rng: Rng) -> MlpParams:
    """He-style initialization for the given layer sizes."""
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        scale = math.sqrt(2.0 / d_in)
        w = rng.gaussian_vec(d_in * d_out).reshape(d_in, d_out) * scale
        weights.append(w)
        biases.append(np.zeros(d_out))
    return MlpParams(weights, biases)


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the MLP on a single vector or a (batch, in_dim) matrix."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.in_dim:
        raise ValueError(f"input dim {h.shape[1]} != {params.in_dim}")
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < n_layers - 1:
            h = _silu(h)
    return h[0] if single else h


def mlp_backward(
    params: MlpParams, x: np.ndarray, upstream: np.ndarray
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Gradients of the scalar loss whose output-gradient is `upstream`.

    Returns ([(dW, db), ...], dx). Accepts a single vector or a batch;
    gradients are summed over the batch.
    """
    x = np.asarray(x, dtype=float)
    upstream = np.asarray(upstream, dtype=float)
    single = x.ndim == 1
    h = x[None, :] if single else x
    up = upstream[None, :] if single else upstream
    if h.shape[1] != params.in_dim:
        raise ValueError(f"input dim {h.shape[1]} != {params.in_dim}")
    if up.shape[1] != params.out_dim:
        raise ValueError(f"upstream dim {up.shape[1]} != {params.out_dim}")
    n_layers = len(params.weights)

    # Forward pass caching pre-activations and layer inputs.
    inputs, preacts = [], []
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        preacts.append(z)
        h = _silu(z) if i < n_layers - 1 else z

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * n_layers  # type: ignore
    delta = up
    for i in range(n_layers - 1, -1, -1):
        if i < n_layers - 1:
            delta = delta * _silu_grad(preacts[i])
        grads[i] = (inputs[i].T @ delta, delta.sum(axis=0))
        delta = delta @ params.weights[i].T
    return grads, (delta[0] if single else delta)


@dataclass
class AdamState:
    """Adam moment accumulators matching an MlpParams layout."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    lr: float = 9e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: MlpParams, lr: float = 9e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in params.weights],
        v_w=[np.zeros_like(w) for w in params.weights],
        m_b=[np.zeros_like(b) for b in params.biases],
        v_b=[np.zeros_like(b) for b in params.biases],
        lr=lr, beta1=beta1, beta2=beta2, eps=eps,
    )


def adam_step(
    params: MlpParams,
    grads: list[tuple[np.ndarray, np.ndarray]],
    state: AdamState,
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Pure: returns fresh params and state."""
    for dw, db in grads:
        if not (np.isfinite(dw).all() and np.isfinite(db).all()):
            raise ValueError("non-finite gradient")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_w, new_b = [], []
    m_w, v_w, m_b, v_b = [], [], [], []
    for i, (dw, db) in enumerate(grads):
        mw = b1 * state.m_w[i] + (1 - b1) * dw
        vw = b2 * state.v_w[i] + (1 - b2) * dw * dw
        mb = b1 * state.m_b[i] + (1 - b1) * db
        vb = b2 * state.v_b[i] + (1 - b2) * db * db
        new_w.append(params.weights[i] - state.lr * (mw / c1) / (np.sqrt(vw / c2) + state.eps))
        new_b.append(params.biases[i] - state.lr * (mb / c1) / (np.sqrt(vb / c2) + state.eps))
        m_w.append(mw); v_w.append(vw); m_b.append(mb); v_b.append(vb)
    new_state = AdamState(m_w, v_w, m_b, v_b, step=t, lr=state.lr,
                          beta1=state.beta1, beta2=state.beta2, eps=state.eps)
    return MlpParams(new_w, new_b), new_state


def sinusoidal_embed(n: int, dim: int, base: float = 10000.0) -> np.ndarray:
    """Interleaved sin/cos embedding of an integer step at geometric frequencies."""
    if dim % 2 != 0:
        raise ValueError("embedding dim must be even")
    if n < 0:
        raise ValueError("step index must be >= 0")
    half = dim // 2
    freqs = base ** (-np.arange(half) / half)
    out = np.empty(dim)
    out[0::2] = np.sin(n * freqs)
    out[1::2] = np.cos(n * freqs)
    return out


def sinusoidal_embed_batch(ns: np.ndarray, dim: int, base: float = 10000.0) -> np.ndarray:
    if dim % 2 != 0:
        raise ValueError("embedding dim must be even")
    half = dim // 2
    freqs = base ** (-np.arange(half) / half)
    arg = np.asarray(ns, dtype=float)[:, None] * freqs[None, :]
    out = np.empty((len(ns), dim))
    out[:, 0::2] = np.sin(arg)
    out[:, 1::2] = np.cos(arg)
    return out


def mlp_to_json(params: MlpParams) -> dict:
    return {
        "layers": [
            {"w_shape": list(w.shape), "w": w.ravel().tolist(), "b": b.tolist()}
            for w, b in zip(params.weights, params.biases)
        ]
    }


def mlp_from_json(obj: dict) -> MlpParams:
    weights, biases = [], []
    for layer in obj["layers"]:
        shape = tuple(layer["w_shape"])
        weights.append(np.array(layer["w"], dtype=float).reshape(shape))
        biases.append(np.array(layer["b"], dtype=float))
    return MlpParams(weights, biases)
