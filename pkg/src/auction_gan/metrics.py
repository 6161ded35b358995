"""Sample quality and mode-coverage metrics against a known mixture."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .data import GmmSpec, gmm_log_density
from .errors import ConfigError, UndefinedMetricError

GROUND_METRICS = ("circular", "euclidean")


@dataclass
class ModeHistogram:
    counts: np.ndarray  # int, one per mode
    unassigned: int
    quality_radius: float

    @property
    def total_assigned(self) -> int:
        return int(self.counts.sum())

    @property
    def n_evaluated(self) -> int:
        return self.total_assigned + self.unassigned

    @property
    def n_modes(self) -> int:
        return self.counts.size


@dataclass
class MetricsRecord:
    epoch: int
    gan_id: int
    mean_log_likelihood: float
    coverage_w1: float  # NaN when no sample landed near any mode
    histogram: ModeHistogram
    covered_modes: int


def assign_modes(samples: np.ndarray, spec: GmmSpec,
                 quality_radius_multiplier: float = 3.0) -> ModeHistogram:
    """Nearest-center assignment; samples farther than k*std from it are unassigned."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    if samples.shape[0] < 1:
        raise ValueError("need at least one sample")
    d2 = ((samples[:, None, :] - spec.centers[None, :, :]) ** 2).sum(axis=-1)
    nearest = d2.argmin(axis=1)
    radius = quality_radius_multiplier * spec.stds[nearest]
    ok = d2[np.arange(samples.shape[0]), nearest] <= radius ** 2
    counts = np.bincount(nearest[ok], minlength=spec.n_modes).astype(np.int64)
    return ModeHistogram(counts, int((~ok).sum()), float(quality_radius_multiplier))


def mean_log_likelihood(samples: np.ndarray, spec: GmmSpec) -> float:
    return float(np.mean(gmm_log_density(spec, np.asarray(samples).reshape(-1, 2))))


def _circular_w1(counts: np.ndarray) -> float:
    # On a unit-spaced circle, W1(p, q) = min_c sum_k |F_k - c| with F the
    # cumulative sum of p - q, minimised at the median of F. Scaling by
    # M * total keeps every intermediate an exact integer.
    m = counts.size
    total = int(counts.sum())
    cum = np.cumsum(m * counts.astype(np.int64) - total)
    med = int(np.sort(cum)[m // 2])
    return float(np.abs(cum - med).sum()) / (m * total)


def transport_cost(p: np.ndarray, q: np.ndarray, cost: np.ndarray) -> float:
    """Exact discrete optimal-transport cost via linear programming."""
    m, n = cost.shape
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=np.concatenate([p, q]),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise UndefinedMetricError(f"transport problem failed: {res.message}")
    return float(res.fun)


def coverage_wasserstein(hist: ModeHistogram, ground_metric: str = "circular",
                         spec: GmmSpec | None = None) -> float:
    """W1 distance between the assigned-mode distribution and uniform.

    ``circular`` uses ring distance with unit spacing between adjacent modes;
    ``euclidean`` uses the mixture's center-to-center distances.
    """
    if hist.total_assigned < 1:
        raise UndefinedMetricError("coverage is undefined: no sample was assigned to a mode")
    if ground_metric == "circular":
        return _circular_w1(hist.counts)
    if ground_metric != "euclidean":
        raise ConfigError(f"unknown ground metric {ground_metric!r}", key="ground_metric")
    if spec is None:
        raise ConfigError("euclidean ground metric needs the mixture definition", key="ground_metric")
    m = hist.n_modes
    cost = np.linalg.norm(spec.centers[:, None, :] - spec.centers[None, :, :], axis=-1)
    return transport_cost(hist.counts / hist.total_assigned, np.full(m, 1.0 / m), cost)


def covered_mode_count(hist: ModeHistogram, threshold_fraction: float = 0.02) -> int:
    """Modes holding at least ``threshold_fraction`` of all evaluated samples."""
    frac = hist.counts / max(hist.n_evaluated, 1)
    return int((frac >= threshold_fraction).sum())


def evaluate_samples(samples: np.ndarray, spec: GmmSpec, epoch: int, gan_id: int,
                     quality_radius: float = 3.0, threshold: float = 0.02,
                     ground_metric: str = "circular") -> MetricsRecord:
    hist = assign_modes(samples, spec, quality_radius)
    try:
        w1 = coverage_wasserstein(hist, ground_metric, spec)
    except UndefinedMetricError:
        w1 = float("nan")
    return MetricsRecord(epoch, gan_id, mean_log_likelihood(samples, spec), w1, hist,
                         covered_mode_count(hist, threshold))


def ensemble_summary(records: list[MetricsRecord]) -> dict:
    """Ensemble aggregates: mean and worst per-GAN likelihood, mean coverage."""
    ll = np.array([r.mean_log_likelihood for r in records])
    w1 = np.array([r.coverage_w1 for r in records])
    return {
        "mean_likelihood": float(ll.mean()),
        "min_likelihood": float(ll.min()),
        "mean_coverage_w1": float(np.nanmean(w1)) if np.isfinite(w1).any() else float("nan"),
        "mean_covered_modes": float(np.mean([r.covered_modes for r in records])),
    }
