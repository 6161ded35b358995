"""Counter-based random streams keyed by (seed, stream name).

Every stochastic draw in a run comes from a stream whose key is derived from
the run seed and a path such as ``individual/3/7`` (phase, epoch, gan id).
Because keys never depend on execution order, results are identical no matter
how work is scheduled across threads.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEED_LIMIT = 2**64


def _derive_key(seed: int, stream: str) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}|{stream}".encode(), digest_size=16).digest()
    return np.frombuffer(digest, dtype="<u8").copy()


class SeededRng:
    """A Philox stream identified by a 64-bit seed and a stream name."""

    def __init__(self, seed: int, stream: str = "root"):
        seed = int(seed)
        if not 0 <= seed < _SEED_LIMIT:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.stream = stream
        self._bitgen = np.random.Philox(key=_derive_key(seed, stream))
        self._gen = np.random.Generator(self._bitgen)

    def fork(self, *names) -> "SeededRng":
        """Independent child stream; ``fork("aux", 3, 1)`` -> ``<stream>/aux/3/1``."""
        path = "/".join(str(n) for n in names)
        return SeededRng(self.seed, f"{self.stream}/{path}")

    @property
    def counter(self) -> list[int]:
        return [int(c) for c in self._bitgen.state["state"]["counter"]]

    def get_state(self) -> dict:
        state = self._bitgen.state
        return {
            "seed": self.seed,
            "stream": self.stream,
            "counter": self.counter,
            "buffer": [int(b) for b in state["buffer"]],
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }

    @classmethod
    def from_state(cls, state: dict) -> "SeededRng":
        rng = cls(state["seed"], state["stream"])
        full = rng._bitgen.state
        full["state"]["counter"] = np.array(state["counter"], dtype=np.uint64)
        full["buffer"] = np.array(state["buffer"], dtype=np.uint64)
        full["buffer_pos"] = state["buffer_pos"]
        full["has_uint32"] = state["has_uint32"]
        full["uinteger"] = state["uinteger"]
        rng._bitgen.state = full
        return rng

    def normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, low, high, size) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def choice(self, n: int, size: int, p=None) -> np.ndarray:
        return self._gen.choice(n, size=size, p=p)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream!r})"


def sample_latent(rng: SeededRng, batch: int, dim: int) -> np.ndarray:
    """Draw a ``(batch, dim)`` matrix of i.i.d. standard-normal latents."""
    if batch < 1 or dim < 1:
        raise ValueError(f"batch and dim must be >= 1, got {batch}, {dim}")
    return rng.normal((batch, dim))
