"""Numerical substrate: MLPs, optimizers, seeded random streams, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .mlp import (
    Gradients,
    MlpParams,
    Trace,
    backward_trace,
    forward_trace,
    init_mlp,
    mlp_backward,
    mlp_forward,
)
from .optim import OptimizerState, make_optimizer, optimizer_step
from .rng import SeededRng, sample_latent

__all__ = [
    "Gradients",
    "MlpParams",
    "OptimizerState",
    "SeededRng",
    "Trace",
    "backward_trace",
    "forward_trace",
    "init_mlp",
    "load_checkpoint",
    "make_optimizer",
    "mlp_backward",
    "mlp_forward",
    "optimizer_step",
    "sample_latent",
    "save_checkpoint",
]
