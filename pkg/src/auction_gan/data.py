"""Isotropic 2D Gaussian mixtures: the real-data distribution."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError
from .nn.rng import SeededRng


@dataclass(frozen=True)
class GmmSpec:
    """Mixture of isotropic Gaussians with per-mode center, std and weight."""

    centers: np.ndarray  # (M, 2)
    stds: np.ndarray     # (M,)
    weights: np.ndarray  # (M,)

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        stds = np.asarray(self.stds, dtype=np.float64).reshape(-1)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        m = centers.shape[0]
        if m == 0 or stds.shape != (m,) or weights.shape != (m,):
            raise ConfigError("centers, stds and weights must describe the same modes")
        if not np.isfinite(centers).all():
            raise ConfigError("mode centers must be finite")
        if (stds <= 0).any():
            raise ConfigError("every mode std must be positive")
        if (weights <= 0).any() or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError("mode weights must be positive and sum to 1")
        for name, arr in (("centers", centers), ("stds", stds), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def ring(cls, n_modes: int = 8, radius: float = 2.0, std: float = 0.2) -> "GmmSpec":
        """``n_modes`` equal-weight modes spaced evenly on a circle."""
        if n_modes < 1:
            raise ConfigError("n_modes must be >= 1", key="n_modes")
        angles = 2.0 * np.pi * np.arange(n_modes) / n_modes
        centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        return cls(centers, np.full(n_modes, float(std)), np.full(n_modes, 1.0 / n_modes))

    @property
    def n_modes(self) -> int:
        return self.centers.shape[0]

    def to_dict(self) -> dict:
        return {"centers": self.centers.tolist(), "stds": self.stds.tolist(),
                "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GmmSpec":
        if "centers" not in d:
            return cls.ring(d.get("n_modes", 8), d.get("radius", 2.0), d.get("std", 0.2))
        return cls(np.array(d["centers"]), np.array(d["stds"]), np.array(d["weights"]))

    def shifted(self, offset) -> "GmmSpec":
        return GmmSpec(self.centers + np.asarray(offset, dtype=np.float64),
                       self.stds, self.weights)


def gmm_sample(spec: GmmSpec, rng: SeededRng, n: int) -> np.ndarray:
    """Draw ``n`` points: pick a mode by weight, add that mode's noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    modes = rng.choice(spec.n_modes, size=n, p=spec.weights)
    noise = rng.normal((n, 2))
    return spec.centers[modes] + spec.stds[modes, None] * noise


def _component_log_densities(spec: GmmSpec, x: np.ndarray) -> np.ndarray:
    sq = ((x[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=-1)
    var = spec.stds ** 2
    return np.log(spec.weights) - np.log(2.0 * np.pi * var) - sq / (2.0 * var)


def gmm_log_density(spec: GmmSpec, x) -> np.ndarray | float:
    """log sum_k w_k N(x; c_k, s_k^2 I) for one point ``(2,)`` or a batch ``(n, 2)``."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x.reshape(-1, 2)
    out = logsumexp(_component_log_densities(spec, pts), axis=1)
    return float(out[0]) if single else out


def dataset_csv(points: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("x,y\n")
    for px, py in np.asarray(points, dtype=np.float64).tolist():
        buf.write(f"{px!r},{py!r}\n")
    return buf.getvalue()
