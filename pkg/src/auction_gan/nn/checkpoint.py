"""Binary checkpoints: JSON header followed by little-endian float64 values.

Layout::

    b"AGCK"                 4-byte magic
    uint64 (LE)             header length in bytes
    header                  UTF-8 JSON: networks, layer shapes, activations,
                            rng stream state, free-form metadata
    float64[] (LE)          parameters of every network, in header order,
                            each as W0, b0, W1, b1, ... (row-major)
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ShapeError
from .mlp import MlpParams

MAGIC = b"AGCK"
FORMAT_VERSION = 1


def _describe(params: MlpParams) -> dict:
    return {
        "layers": [
            {"in": int(w.shape[1]), "out": int(w.shape[0]), "activation": act}
            for w, act in zip(params.weights, params.activations)
        ],
        "n_values": params.n_params(),
    }


def encode_checkpoint(
    networks: dict[str, MlpParams], rng_state: dict | None = None, meta: dict | None = None
) -> bytes:
    header = {
        "format": "auction-gan-checkpoint",
        "version": FORMAT_VERSION,
        "dtype": "<f8",
        "networks": [{"name": name, **_describe(p)} for name, p in networks.items()],
        "rng": rng_state,
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True).encode()
    body = b"".join(p.flat().astype("<f8").tobytes() for p in networks.values())
    return MAGIC + struct.pack("<Q", len(head)) + head + body


def decode_checkpoint(blob: bytes) -> tuple[dict[str, MlpParams], dict]:
    if blob[:4] != MAGIC:
        raise ShapeError("not a checkpoint file (bad magic)")
    (n_head,) = struct.unpack("<Q", blob[4:12])
    header = json.loads(blob[12:12 + n_head].decode())
    values = np.frombuffer(blob[12 + n_head:], dtype="<f8")
    expected = sum(net["n_values"] for net in header["networks"])
    if values.size != expected:
        raise ShapeError(f"checkpoint holds {values.size} values, header describes {expected}")
    networks, pos = {}, 0
    for net in header["networks"]:
        layers = net["layers"]
        weights = [np.zeros((l["out"], l["in"])) for l in layers]
        biases = [np.zeros(l["out"]) for l in layers]
        template = MlpParams(weights, biases, tuple(l["activation"] for l in layers))
        networks[net["name"]] = template.with_flat(values[pos:pos + net["n_values"]])
        pos += net["n_values"]
    return networks, header


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path, networks: dict[str, MlpParams], rng_state=None, meta=None) -> None:
    atomic_write_bytes(path, encode_checkpoint(networks, rng_state, meta))


def load_checkpoint(path) -> tuple[dict[str, MlpParams], dict]:
    return decode_checkpoint(Path(path).read_bytes())
