"""Run configuration: defaults, validation, and flat key=value / JSON files."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .auction import BID_NORMALIZATIONS
from .data import GmmSpec
from .errors import ConfigError
from .metrics import GROUND_METRICS
from .objectives import AUX_GRANULARITIES, DEFAULT_CLIP, DEFAULT_OPTIMIZERS, MODEL_KINDS
from .nn.optim import OPTIMIZERS

# config keys whose attribute name differs (``lambda`` is a Python keyword)
ALIASES = {"lambda": "lam"}


@dataclass
class TrainConfig:
    model: str = "gan"
    n_gans: int = 8
    lam: float = 0.5
    epochs: int = 200
    batch_size: int = 256
    lot_size: int = 256
    n_data: int = 65536
    steps_per_epoch: int | None = None  # generator steps per phase; default n_data // batch_size
    hidden: tuple[int, ...] = (256, 256)
    latent_dim: int = 2
    optimizer: str | None = None  # None: adam for gan, rmsprop for wgan
    lr: float | None = None
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    rms_decay: float = 0.99
    clip: float | None = None  # critic weight clip; None: 0.01 for wgan, off for gan
    n_critic: int = 5
    n_modes: int = 8
    radius: float = 2.0
    std: float = 0.2
    seed: int = 0
    eval_seed: int | None = None
    baseline: bool = False
    normalize_bids: str = "none"
    saturating: bool = False
    aux_granularity: str = "sample"
    ground_metric: str = "circular"
    quality_radius: float = 3.0
    coverage_threshold: float = 0.02
    eval_interval: int = 1
    n_eval: int = 10000
    checkpoint_interval: int = 10
    auction_dump: bool = False

    # ---- derived values -------------------------------------------------
    @property
    def gmm(self) -> GmmSpec:
        return GmmSpec.ring(self.n_modes, self.radius, self.std)

    def resolved(self) -> "TrainConfig":
        """Copy with every model-dependent default filled in."""
        defaults = DEFAULT_OPTIMIZERS[self.model] if self.model in MODEL_KINDS else {}
        return replace(
            self,
            hidden=tuple(int(h) for h in self.hidden),
            steps_per_epoch=(self.steps_per_epoch if self.steps_per_epoch is not None
                             else max(1, self.n_data // self.batch_size)),
            optimizer=self.optimizer or defaults.get("kind", "adam"),
            lr=self.lr if self.lr is not None else defaults.get("lr", 2e-4),
            clip=self.clip if self.clip is not None else (
                DEFAULT_CLIP if self.model == "wgan" else None),
            eval_seed=self.eval_seed if self.eval_seed is not None else self.seed,
        )

    def optimizer_settings(self) -> tuple[dict, dict]:
        """(generator, discriminator) optimizer hyperparameters."""
        r = self.resolved()
        base = {"kind": r.optimizer, "lr": r.lr, "eps": r.eps}
        if r.optimizer == "adam":
            base.update(beta1=r.beta1, beta2=r.beta2)
        elif r.optimizer == "rmsprop":
            base.update(decay=r.rms_decay)
        return dict(base), dict(base, clip=r.clip)

    def validate(self) -> "TrainConfig":
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}", key=key)

        need(self.model in MODEL_KINDS, "model", f"must be one of {MODEL_KINDS}")
        if self.baseline:
            need(self.n_gans >= 1, "n_gans", "must be >= 1")
        else:
            need(self.n_gans >= 2, "n_gans", "multi-player mode requires n_gans ≥ 2")
        need(self.lam >= 0, "lambda", "must be >= 0")
        need(self.epochs >= 0, "epochs", "must be >= 0")
        for key in ("batch_size", "lot_size", "n_data", "latent_dim", "n_critic",
                    "n_modes", "eval_interval", "n_eval", "checkpoint_interval"):
            need(getattr(self, key) >= 1, key, "must be >= 1")
        need(self.steps_per_epoch is None or self.steps_per_epoch >= 1,
             "steps_per_epoch", "must be >= 1")
        need(len(self.hidden) >= 1 and all(h >= 1 for h in self.hidden), "hidden",
             "needs at least one positive width")
        need(self.optimizer is None or self.optimizer in OPTIMIZERS, "optimizer",
             f"must be one of {OPTIMIZERS}")
        need(self.lr is None or self.lr > 0, "lr", "must be > 0")
        need(self.clip is None or self.clip > 0, "clip", "must be > 0")
        need(self.radius >= 0 and self.std > 0, "std", "radius >= 0 and std > 0 required")
        need(self.normalize_bids in BID_NORMALIZATIONS, "normalize_bids",
             f"must be one of {BID_NORMALIZATIONS}")
        need(self.aux_granularity in AUX_GRANULARITIES, "aux_granularity",
             f"must be one of {AUX_GRANULARITIES}")
        need(self.ground_metric in GROUND_METRICS, "ground_metric",
             f"must be one of {GROUND_METRICS}")
        need(0 < self.coverage_threshold < 1, "coverage_threshold", "must be in (0, 1)")
        need(self.quality_radius > 0, "quality_radius", "must be > 0")
        need(0 <= self.seed < 2**64, "seed", "must be a 64-bit unsigned integer")
        return self

    # ---- serialisation --------------------------------------------------
    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out["lambda" if f.name == "lam" else f.name] = (
                list(value) if isinstance(value, tuple) else value)
        return out

    def digest(self) -> str:
        blob = json.dumps(self.resolved().to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, mapping: dict[str, Any], base: "TrainConfig | None" = None
                     ) -> "TrainConfig":
        """Build from string or typed values; unknown keys raise ConfigError."""
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        updates = {}
        for raw_key, value in mapping.items():
            key = ALIASES.get(raw_key.replace("-", "_"), raw_key.replace("-", "_"))
            if key not in types:
                raise ConfigError(f"unknown config key {raw_key!r}", key=raw_key)
            try:
                updates[key] = _coerce(types[key], value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{raw_key}: cannot parse {value!r} ({exc})",
                                  key=raw_key) from None
        return replace(base, **updates)


def _coerce(type_name: str, value):
    base = type_name.replace(" | None", "")
    if value is None or (isinstance(value, str) and value.strip().lower() in ("none", "null", "")):
        if "None" in type_name:
            return None
        if base == "str" and value is not None and value.strip():
            return value.strip()  # e.g. normalize_bids = none
        raise ValueError("value required")
    if base == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if base == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ValueError("expected an integer")
        return int(value)
    if base == "float":
        return float(value)
    if base.startswith("tuple"):
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        return tuple(int(v) for v in value)
    return str(value)


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config_file(path) -> dict:
    """Raw mapping from a JSON file or a flat key=value file."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        # run.json nests the resolved config under "config"
        nested = data.get("config")
        return dict(nested) if isinstance(nested, dict) else data
    return parse_config_text(text)


def config_fields() -> list[str]:
    return ["lambda" if f.name == "lam" else f.name for f in dataclasses.fields(TrainConfig)]
