"""Fixed-topology MLPs with hand-written forward and backward passes."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from ..errors import ShapeError
from .rng import SeededRng

ACTIVATIONS = ("relu", "sigmoid", "identity")


def _apply(act: str, z: np.ndarray) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "sigmoid":
        return expit(z)
    return z


def _derivative(act: str, z: np.ndarray, h: np.ndarray) -> np.ndarray | None:
    # None means "multiply by one"; skipping keeps identity layers bit-exact
    if act == "relu":
        return (z > 0.0).astype(z.dtype)
    if act == "sigmoid":
        return h * (1.0 - h)
    return None


@dataclass
class MlpParams:
    """Weights ``(out, in)`` and biases ``(out,)`` per layer, plus activations.

    Hidden layers are ReLU; only the output activation varies between networks.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]

    def __post_init__(self):
        self.activations = tuple(self.activations)
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("weights, biases and activations must have equal length")
        if not self.weights:
            raise ShapeError("an MLP needs at least one layer")
        for k, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r} at layer {k}")
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {k}: weight {w.shape} / bias {b.shape} mismatch")
            if k and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeError(
                    f"layer {k} expects {w.shape[1]} inputs, "
                    f"layer {k - 1} produces {self.weights[k - 1].shape[0]}"
                )

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def output_activation(self) -> str:
        return self.activations[-1]

    @property
    def sizes(self) -> list[int]:
        return [self.in_dim] + [w.shape[0] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activations,
        )

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vector: np.ndarray) -> "MlpParams":
        """Same topology, parameters taken from a flat vector."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.n_params():
            raise ShapeError(f"expected {self.n_params()} values, got {vector.size}")
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vector[pos:pos + w.size].reshape(w.shape).copy())
            pos += w.size
            biases.append(vector[pos:pos + b.size].copy())
            pos += b.size
        return MlpParams(weights, biases, self.activations)

    def checksum(self) -> str:
        h = hashlib.sha256()
        for a in self.arrays():
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    def max_abs(self) -> float:
        return max(float(np.abs(a).max()) for a in self.arrays())


@dataclass
class Gradients:
    """Partial derivatives with the same layout as the MlpParams they belong to."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )

    @classmethod
    def zeros_like(cls, params: MlpParams) -> "Gradients":
        return cls([np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(b) for b in params.biases])


def init_mlp(
    sizes: Sequence[int],
    output_activation: str,
    rng: SeededRng,
    hidden_activation: str = "relu",
) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    if len(sizes) < 2:
        raise ShapeError("sizes needs at least an input and an output dimension")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    activations = (hidden_activation,) * (len(sizes) - 2) + (output_activation,)
    return MlpParams(weights, biases, activations)


@dataclass
class Trace:
    """Forward intermediates kept for the backward pass."""

    inputs: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)

    @property
    def output(self) -> np.ndarray:
        return self.post[-1]


def _as_batch(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise ShapeError(f"network expects (batch, {params.in_dim}) input, got {x.shape}")
    return x


def forward_trace(params: MlpParams, x: np.ndarray) -> Trace:
    x = _as_batch(params, x)
    trace = Trace(x)
    h = x
    for w, b, act in zip(params.weights, params.biases, params.activations):
        z = h @ w.T + b
        h = _apply(act, z)
        trace.pre.append(z)
        trace.post.append(h)
    return trace


def backward_trace(
    params: MlpParams, trace: Trace, upstream: np.ndarray, param_grads: bool = True
) -> tuple[Gradients | None, np.ndarray]:
    """Backpropagate ``upstream`` (per-sample dloss/doutput) through a trace.

    Parameter gradients are averaged over the batch; the returned input
    gradient stays per-sample so it can be chained into another network.
    With ``param_grads=False`` only the input gradient is computed.
    """
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != trace.output.shape:
        raise ShapeError(f"upstream gradient {upstream.shape} != output {trace.output.shape}")
    n = upstream.shape[0]
    g = upstream
    dws, dbs = [], []
    for k in range(len(params.weights) - 1, -1, -1):
        d = _derivative(params.activations[k], trace.pre[k], trace.post[k])
        dz = g if d is None else g * d
        if param_grads:
            h_prev = trace.inputs if k == 0 else trace.post[k - 1]
            dws.append(dz.T @ h_prev / n)
            dbs.append(dz.sum(axis=0) / n)
        g = dz @ params.weights[k]
    if not param_grads:
        return None, g
    return Gradients(dws[::-1], dbs[::-1]), g


def mlp_forward(params: MlpParams, x) -> np.ndarray:
    """Network output for a single input vector or a ``(batch, in)`` matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != params.in_dim:
            raise ShapeError(f"network expects {params.in_dim} inputs, got {x.shape[0]}")
        return forward_trace(params, x[None, :]).output[0]
    return forward_trace(params, x).output


def mlp_backward(
    params: MlpParams, input_batch: np.ndarray, upstream_grad: np.ndarray
) -> tuple[Gradients, np.ndarray]:
    """Gradients of ``mean_b sum_o upstream[b, o] * out[b, o]`` w.r.t. parameters.

    ``input_grad[b]`` is the derivative of sample ``b``'s term (not divided by
    the batch size), ready to feed a preceding network's backward pass.
    """
    trace = forward_trace(params, input_batch)
    return backward_trace(params, trace, upstream_grad)
