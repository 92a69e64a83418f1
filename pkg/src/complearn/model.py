"""Linear / MLP scorers with q output heads, hand-written backprop and Adam.

Parameters live in one flat float64 vector. Layer ``i`` owns a weight block
of shape ``(fan_in, fan_out)`` (row-major) followed by its bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import risk as _risk

__all__ = [
    "ModelConfig",
    "ModelParams",
    "AdamState",
    "init_params",
    "forward",
    "backward",
    "risk_and_grad",
    "ovr_risk_and_grad",
    "adam_init",
    "adam_step",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass(frozen=True)
class ModelConfig:
    """``arch`` is "linear" or "mlp"; ``hidden`` is ignored for linear models."""

    input_dim: int
    output_dim: int
    arch: str = "mlp"
    hidden: tuple = (300, 300, 300)

    def __post_init__(self):
        if self.arch not in ("linear", "mlp"):
            raise ValueError(f"unknown arch {self.arch!r}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        hidden = tuple(int(h) for h in self.hidden) if self.arch == "mlp" else ()
        if self.arch == "mlp" and (not hidden or min(hidden) < 1):
            raise ValueError("mlp needs at least one hidden layer of width >= 1")
        object.__setattr__(self, "hidden", hidden)

    @property
    def widths(self) -> tuple:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def shapes(self) -> list:
        w = self.widths
        return [(w[i], w[i + 1]) for i in range(len(w) - 1)]

    @property
    def n_params(self) -> int:
        return sum(a * b + b for a, b in self.shapes)


@dataclass(frozen=True)
class ModelParams:
    config: ModelConfig
    theta: np.ndarray = field(repr=False)

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (self.config.n_params,):
            raise ValueError(f"expected {self.config.n_params} parameters, got {theta.shape}")
        object.__setattr__(self, "theta", theta)

    def layers(self, theta=None):
        """(W, b) views into ``theta`` (defaults to this instance's vector)."""
        theta = self.theta if theta is None else theta
        out, pos = [], 0
        for a, b in self.config.shapes:
            W = theta[pos:pos + a * b].reshape(a, b)
            pos += a * b
            out.append((W, theta[pos:pos + b]))
            pos += b
        return out

    def with_theta(self, theta) -> "ModelParams":
        return replace(self, theta=theta)

    def __call__(self, X):
        return forward(self, X)


def init_params(config: ModelConfig, seed) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chunks = []
    for a, b in config.shapes:
        limit = np.sqrt(6.0 / (a + b))
        chunks.append(rng.uniform(-limit, limit, size=a * b))
        chunks.append(np.zeros(b))
    return ModelParams(config, np.concatenate(chunks))


def _forward(params: ModelParams, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.config.input_dim:
        raise ValueError(f"expected inputs of width {params.config.input_dim}, got shape {X.shape}")
    cache = []
    h = X
    layers = params.layers()
    for i, (W, b) in enumerate(layers):
        z = h @ W + b
        cache.append((h, z))
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
    return h, cache


def forward(params: ModelParams, X) -> np.ndarray:
    """Scores, shape ``(m, output_dim)``."""
    return _forward(params, X)[0]


def backward(params: ModelParams, cache, dscores) -> np.ndarray:
    """Flat gradient given the upstream derivative with respect to the scores."""
    grads = []
    delta = dscores
    layers = params.layers()
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        h_in, _ = cache[i]
        grads.append((h_in.T @ delta).ravel())
        grads.append(delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (cache[i - 1][1] > 0)
    # grads were appended last layer first, as (dW, db) pairs
    ordered = []
    for j in range(len(grads) - 2, -1, -2):
        ordered.extend((grads[j], grads[j + 1]))
    return np.concatenate(ordered)


def risk_and_grad(params: ModelParams, X, comp_mask, risk_spec):
    """NU risk of a batch (URE or corrected, per ``risk_spec``) and its exact gradient."""
    X = np.asarray(X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    scores, cache = _forward(params, X)
    value, dscores, _ = _risk.nu_risk_with_grad(scores, comp_mask, risk_spec)
    return value, backward(params, cache, dscores)


def ovr_risk_and_grad(params: ModelParams, X, labels):
    """Ordinary-label OVR empirical risk and its gradient."""
    X = np.asarray(X)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    scores, cache = _forward(params, X)
    value, dscores = _risk.ovr_risk_with_grad(scores, labels)
    return value, backward(params, cache, dscores)


# -- Adam ----------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    t: int
    m: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


def adam_init(n: int, lr=1e-3, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(0, np.zeros(n), np.zeros(n), lr, beta1, beta2, eps, weight_decay)


def adam_step(state: AdamState, theta, grads):
    """One Adam update with decoupled weight decay. Returns ``(state, theta)``."""
    theta = np.asarray(theta, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if theta.shape != grads.shape or theta.shape != state.m.shape:
        raise ValueError("parameter, gradient and moment lengths differ")
    t = state.t + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grads
    v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new = theta - state.lr * state.weight_decay * theta
    new = new - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, t=t, m=m, v=v), new


# -- verification ----------------------------------------------------------------

def grad_check(theta, closure, h=1e-5, max_coords=None, seed=0, rel_floor=1e-3) -> float:
    """Largest relative gap between the analytic gradient and central differences.

    ``closure(theta) -> (value, grad)``. Checks every coordinate, or a random
    subset of ``max_coords`` of them. The per-coordinate error is
    ``|a - n| / max(|a|, |n|, rel_floor * max_i |a_i|, 1e-12)``; the floor
    keeps coordinates whose gradient sits at the rounding noise of the
    difference quotient (about ``eps * |f| / h``) from dominating.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.array(theta, dtype=np.float64)
    _, analytic = closure(theta)
    floor = max(rel_floor * float(np.abs(analytic).max(initial=0.0)), 1e-12)
    coords = np.arange(theta.size)
    if max_coords is not None and max_coords < theta.size:
        coords = np.random.default_rng(seed).choice(theta.size, size=max_coords, replace=False)
    worst = 0.0
    for i in coords:
        old = theta[i]
        theta[i] = old + h
        fp = closure(theta)[0]
        theta[i] = old - h
        fm = closure(theta)[0]
        theta[i] = old
        numeric = (fp - fm) / (2 * h)
        a = analytic[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, err)
    return worst


# -- checkpoints -------------------------------------------------------------------

_MAGIC = "complearn-params"


def save_checkpoint(params: ModelParams, path) -> None:
    """Text header line, then the raw little-endian float64 vector."""
    cfg = params.config
    header = (f"{_MAGIC} arch={cfg.arch} input_dim={cfg.input_dim} output_dim={cfg.output_dim} "
              f"hidden={','.join(map(str, cfg.hidden)) or '-'} count={cfg.n_params}\n")
    with Path(path).open("wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(params.theta.astype("<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    fields = raw[:nl].decode("ascii").split()
    if not fields or fields[0] != _MAGIC:
        raise ValueError(f"{path}: not a parameter checkpoint")
    kv = dict(f.split("=", 1) for f in fields[1:])
    hidden = () if kv["hidden"] == "-" else tuple(int(h) for h in kv["hidden"].split(","))
    cfg = ModelConfig(int(kv["input_dim"]), int(kv["output_dim"]), kv["arch"], hidden)
    theta = np.frombuffer(raw[nl + 1:], dtype="<f8").astype(np.float64)
    if theta.size != int(kv["count"]):
        raise ValueError(f"{path}: header says {kv['count']} parameters, file holds {theta.size}")
    return ModelParams(cfg, theta)
