"""Vanilla GAN and WGAN losses, their gradients, and single training steps.

The same step routine serves individual training and auxiliary training; the
latter only adds a target discriminator and a weight ``lam`` for the
loss-matching term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .nn.mlp import Gradients, MlpParams, backward_trace, forward_trace, init_mlp, mlp_forward
from .nn.optim import OptimizerState, make_optimizer, optimizer_step
from .nn.rng import SeededRng, sample_latent

MODEL_KINDS = ("gan", "wgan")
PROB_CLAMP = 1e-7
AUX_GRANULARITIES = ("sample", "scalar")

# default optimizer settings per model kind; the critic clip applies to D only
DEFAULT_OPTIMIZERS = {
    "gan": {"kind": "adam", "lr": 2e-4, "beta1": 0.5, "beta2": 0.999, "eps": 1e-8},
    "wgan": {"kind": "rmsprop", "lr": 5e-5, "decay": 0.99, "eps": 1e-8},
}
DEFAULT_CLIP = 0.01

SELF = "self"
AuxTarget = Union[MlpParams, str, None]


@dataclass
class GanPair:
    """One generator/discriminator pair with its optimizer states."""

    id: int
    kind: str
    generator: MlpParams
    discriminator: MlpParams
    g_opt: OptimizerState
    d_opt: OptimizerState

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}", key="model")
        if self.discriminator.out_dim != 1:
            raise ShapeError("discriminator must have a single output")
        if self.generator.out_dim != self.discriminator.in_dim:
            raise ShapeError("generator output must match discriminator input (data dim)")
        expected = "sigmoid" if self.kind == "gan" else "identity"
        if self.discriminator.output_activation != expected:
            raise ConfigError(
                f"{self.kind} discriminator needs {expected} output, "
                f"got {self.discriminator.output_activation}")

    @property
    def latent_dim(self) -> int:
        return self.generator.in_dim

    def copy(self) -> "GanPair":
        return GanPair(self.id, self.kind, self.generator.copy(), self.discriminator.copy(),
                       self.g_opt.copy(), self.d_opt.copy())

    def checksum(self) -> str:
        return self.generator.checksum()[:32] + self.discriminator.checksum()[:32]


def make_pair(
    gan_id: int,
    kind: str,
    rng: SeededRng,
    hidden: Sequence[int] = (256, 256),
    latent_dim: int = 2,
    data_dim: int = 2,
    g_opt: dict | None = None,
    d_opt: dict | None = None,
) -> GanPair:
    """Freshly initialised pair; optimizer dicts override the per-kind defaults."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"unknown model kind {kind!r}", key="model")
    gen = init_mlp([latent_dim, *hidden, data_dim], "identity", rng.fork("generator"))
    out_act = "sigmoid" if kind == "gan" else "identity"
    disc = init_mlp([data_dim, *hidden, 1], out_act, rng.fork("discriminator"))
    g_hyper = dict(DEFAULT_OPTIMIZERS[kind], **(g_opt or {}))
    d_hyper = dict(DEFAULT_OPTIMIZERS[kind], **(d_opt or {}))
    if kind == "wgan":
        d_hyper.setdefault("clip", DEFAULT_CLIP)
    g_hyper.pop("clip", None)
    return GanPair(gan_id, kind, gen, disc,
                   make_optimizer(gen, **g_hyper), make_optimizer(disc, **d_hyper))


@dataclass
class DiscriminatorLossBreakdown:
    """Scalar discriminator loss plus the per-sample terms it averages."""

    loss: float
    real_terms: np.ndarray
    fake_terms: np.ndarray

    @property
    def per_sample(self) -> np.ndarray:
        return np.concatenate([self.real_terms, self.fake_terms])


def _branch_terms(kind: str, out: np.ndarray, branch: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss terms and d(term)/d(output) for one batch of D outputs.

    ``branch`` is ``real`` (D should say real), ``fake`` (D should say fake),
    or ``fool`` / ``saturating`` for the two generator losses.
    """
    out = out.reshape(-1)
    if kind == "wgan":
        sign = 1.0 if branch == "fake" else -1.0
        return sign * out, np.full_like(out, sign)
    p = np.clip(out, PROB_CLAMP, 1.0 - PROB_CLAMP)
    inside = ((out >= PROB_CLAMP) & (out <= 1.0 - PROB_CLAMP)).astype(np.float64)
    if branch in ("real", "fool"):
        return -np.log(p), -inside / p
    if branch == "fake":
        return -np.log1p(-p), inside / (1.0 - p)
    if branch == "saturating":
        return np.log1p(-p), -inside / (1.0 - p)
    raise ValueError(f"unknown branch {branch!r}")


def _mean(x: np.ndarray) -> float:
    # correctly rounded sum: the result cannot depend on sample order
    return math.fsum(x.tolist()) / x.size


def _check_batches(real: np.ndarray, fake: np.ndarray) -> None:
    if real.shape[0] < 1 or real.shape != fake.shape:
        raise ShapeError(f"real {real.shape} and fake {fake.shape} batches must match")


def breakdown(kind: str, disc: MlpParams, real: np.ndarray, fake: np.ndarray
              ) -> DiscriminatorLossBreakdown:
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    _check_batches(real, fake)
    real_terms, _ = _branch_terms(kind, mlp_forward(disc, real), "real")
    fake_terms, _ = _branch_terms(kind, mlp_forward(disc, fake), "fake")
    return DiscriminatorLossBreakdown(_mean(real_terms) + _mean(fake_terms),
                                      real_terms, fake_terms)


def disc_loss(pair: GanPair, real_batch: np.ndarray, fake_batch: np.ndarray
              ) -> DiscriminatorLossBreakdown:
    """Vanilla: -mean log D(x) - mean log(1 - D(x_fake)); WGAN: mean D(fake) - mean D(real)."""
    return breakdown(pair.kind, pair.discriminator, real_batch, fake_batch)


def gen_loss(pair: GanPair, latents: np.ndarray, saturating: bool = False) -> float:
    fake = mlp_forward(pair.generator, latents)
    out = mlp_forward(pair.discriminator, fake)
    terms, _ = _branch_terms(pair.kind, out, "saturating" if saturating else "fool")
    return _mean(terms)


@dataclass
class DiscObjective:
    """Value and gradient of L_D + lam * L_aux for one discriminator update."""

    value: float
    loss: DiscriminatorLossBreakdown
    aux: float
    grads: Gradients


def aux_value(terms: DiscriminatorLossBreakdown, target: DiscriminatorLossBreakdown,
              granularity: str = "sample") -> float:
    """Mean squared mismatch between two discriminators' loss outputs."""
    if granularity == "scalar":
        return float((terms.loss - target.loss) ** 2)
    diff = terms.per_sample - target.per_sample
    return _mean(diff * diff)


def disc_objective(
    kind: str,
    disc: MlpParams,
    real: np.ndarray,
    fake: np.ndarray,
    target: AuxTarget = None,
    lam: float = 0.0,
    granularity: str = "sample",
) -> DiscObjective:
    """Loss and analytic gradient for a discriminator, optionally loss-matched.

    ``target`` is a frozen reference discriminator (no gradient flows into
    it), ``"self"`` for a pair that is its own reference, or None.
    """
    if granularity not in AUX_GRANULARITIES:
        raise ConfigError(f"unknown aux granularity {granularity!r}", key="aux_granularity")
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    _check_batches(real, fake)
    tr_real = forward_trace(disc, real)
    tr_fake = forward_trace(disc, fake)
    real_terms, d_real = _branch_terms(kind, tr_real.output, "real")
    fake_terms, d_fake = _branch_terms(kind, tr_fake.output, "fake")
    loss = DiscriminatorLossBreakdown(_mean(real_terms) + _mean(fake_terms),
                                      real_terms, fake_terms)

    aux = 0.0
    if target is not None:
        ref = loss if isinstance(target, str) else breakdown(kind, target, real, fake)
        aux = aux_value(loss, ref, granularity)
        if lam != 0.0:
            if granularity == "sample":
                d_real = d_real * (1.0 + lam * (real_terms - ref.real_terms))
                d_fake = d_fake * (1.0 + lam * (fake_terms - ref.fake_terms))
            else:
                coef = 1.0 + 2.0 * lam * (loss.loss - ref.loss)
                d_real = d_real * coef
                d_fake = d_fake * coef

    g_real, _ = backward_trace(disc, tr_real, d_real[:, None])
    g_fake, _ = backward_trace(disc, tr_fake, d_fake[:, None])
    return DiscObjective(loss.loss + lam * aux, loss, aux, g_real + g_fake)


def gen_objective(pair: GanPair, latents: np.ndarray, saturating: bool = False
                  ) -> tuple[float, Gradients]:
    """Generator loss through the pair's discriminator and its gradient w.r.t. G."""
    tr_g = forward_trace(pair.generator, latents)
    tr_d = forward_trace(pair.discriminator, tr_g.output)
    terms, d_out = _branch_terms(pair.kind, tr_d.output, "saturating" if saturating else "fool")
    _, d_fake = backward_trace(pair.discriminator, tr_d, d_out[:, None], param_grads=False)
    grads, _ = backward_trace(pair.generator, tr_g, d_fake)
    return _mean(terms), grads


@dataclass
class StepLog:
    d_losses: list[float] = field(default_factory=list)
    aux_losses: list[float] = field(default_factory=list)
    g_loss: float = float("nan")


def individual_step(
    pair: GanPair,
    real_batch: np.ndarray | Sequence[np.ndarray],
    rng: SeededRng,
    *,
    n_critic: int = 5,
    saturating: bool = False,
    aux_target: AuxTarget = None,
    lam: float = 0.0,
    granularity: str = "sample",
) -> tuple[GanPair, StepLog]:
    """Discriminator update(s) followed by one generator update.

    ``real_batch`` is either one ``(B, 2)`` array or a sequence of them; a
    sequence gives one discriminator update per batch. A single array is
    reused ``n_critic`` times for WGAN and once for vanilla GANs. Fakes are
    drawn fresh from ``rng`` for every update.
    """
    if isinstance(real_batch, np.ndarray) and real_batch.ndim == 2:
        batches = [real_batch] * (n_critic if pair.kind == "wgan" else 1)
    else:
        batches = list(real_batch)
    log = StepLog()
    gen, disc = pair.generator, pair.discriminator
    g_opt, d_opt = pair.g_opt, pair.d_opt
    try:
        for real in batches:
            z = sample_latent(rng, real.shape[0], pair.latent_dim)
            fake = mlp_forward(gen, z)
            obj = disc_objective(pair.kind, disc, real, fake, aux_target, lam, granularity)
            log.d_losses.append(obj.loss.loss)
            log.aux_losses.append(obj.aux)
            disc, d_opt = optimizer_step(d_opt, disc, obj.grads)
        staged = GanPair(pair.id, pair.kind, gen, disc, g_opt, d_opt)
        z = sample_latent(rng, batches[-1].shape[0], pair.latent_dim)
        log.g_loss, g_grads = gen_objective(staged, z, saturating)
        gen, g_opt = optimizer_step(g_opt, gen, g_grads)
    except NumericError as err:
        raise err.add_context(gan=pair.id)
    return GanPair(pair.id, pair.kind, gen, disc, g_opt, d_opt), log
