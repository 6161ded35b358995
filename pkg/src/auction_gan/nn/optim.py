"""SGD, Adam and RMSProp over MlpParams, with optional weight clipping."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, NumericError
from .mlp import Gradients, MlpParams

OPTIMIZERS = ("sgd", "adam", "rmsprop")


@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    decay: float = 0.99
    clip: float | None = None
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.kind!r}", key="optimizer")
        if self.clip is not None and self.clip <= 0:
            raise ConfigError("weight clip bound must be positive", key="clip")

    def copy(self) -> "OptimizerState":
        return replace(self, m=[a.copy() for a in self.m], v=[a.copy() for a in self.v])

    def hyperparameters(self) -> dict:
        return {"kind": self.kind, "lr": self.lr, "beta1": self.beta1, "beta2": self.beta2,
                "eps": self.eps, "decay": self.decay, "clip": self.clip}


def make_optimizer(params: MlpParams, kind: str = "adam", **hyper) -> OptimizerState:
    """Fresh state with zero moment buffers shaped like ``params``."""
    state = OptimizerState(kind=kind, **hyper)
    arrays = params.arrays()
    if kind in ("adam", "rmsprop"):
        state.v = [np.zeros_like(a) for a in arrays]
    if kind == "adam":
        state.m = [np.zeros_like(a) for a in arrays]
    return state


def optimizer_step(
    state: OptimizerState, params: MlpParams, grads: Gradients
) -> tuple[MlpParams, OptimizerState]:
    """Apply one update; inputs are left untouched and new values returned."""
    if state.lr < 0:
        raise ConfigError("learning rate must be non-negative", key="lr")
    g_arrays = grads.arrays()
    p_arrays = params.arrays()
    if len(g_arrays) != len(p_arrays) or any(
            g.shape != p.shape for g, p in zip(g_arrays, p_arrays)):
        raise ConfigError("gradients do not match parameter shapes")
    for k, g in enumerate(g_arrays):
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in parameter array {k}")

    # buffers are rebuilt, never mutated, so the old state stays valid
    new = replace(state, step=state.step + 1, m=list(state.m), v=list(state.v))
    t = new.step
    updated = []
    for k, (p, g) in enumerate(zip(p_arrays, g_arrays)):
        if new.kind == "sgd":
            p = p - new.lr * g
        elif new.kind == "adam":
            m = new.beta1 * new.m[k]
            m += (1.0 - new.beta1) * g
            v = new.beta2 * new.v[k]
            v += (1.0 - new.beta2) * (g * g)
            new.m[k], new.v[k] = m, v
            denom = np.sqrt(v / (1.0 - new.beta2 ** t))
            denom += new.eps
            upd = m / (1.0 - new.beta1 ** t)
            upd /= denom
            upd *= new.lr
            p = p - upd
        else:
            v = new.decay * new.v[k]
            v += (1.0 - new.decay) * (g * g)
            new.v[k] = v
            denom = np.sqrt(v)
            denom += new.eps
            upd = g / denom
            upd *= new.lr
            p = p - upd
        if new.clip is not None:
            np.clip(p, -new.clip, new.clip, out=p)
        if not np.isfinite(p).all():
            raise NumericError(f"parameter array {k} became non-finite after update")
        updated.append(p)

    weights = updated[0::2]
    biases = updated[1::2]
    return MlpParams(weights, biases, params.activations), new
