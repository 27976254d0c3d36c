"""Versioned binary checkpoint container for network parameters.

Layout: an ASCII header line ``#kifa-ckpt v1``, a JSON metadata line
(config echo, training seed, slot count, array directory with names and
shapes in storage order), then the raw array payloads concatenated as
64-bit little-endian floats. Round-trips are bit-exact.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import IoFailure
from .model import NetConfig, NetParams

_MAGIC = b"#kifa-ckpt v1\n"


def save_checkpoint(params: NetParams, config: NetConfig, seed: int, path) -> None:
    names = params.names()
    meta = {
        "config": config.to_dict(),
        "seed": seed,
        "slot_count": params.slot_count,
        "arrays": [{"name": n, "shape": list(params.arrays[n].shape)}
                   for n in names],
    }
    try:
        with open(path, "wb") as f:
            f.write(_MAGIC)
            f.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
            for n in names:
                f.write(np.ascontiguousarray(
                    params.arrays[n], dtype="<f8").tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path):
    """Returns (params, config, seed)."""
    try:
        with open(path, "rb") as f:
            magic = f.readline()
            if magic != _MAGIC:
                raise IoFailure(f"{path} is not a '#kifa-ckpt v1' file")
            meta = json.loads(f.readline().decode("utf-8"))
            arrays = {}
            for entry in meta["arrays"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                buf = f.read(8 * count)
                if len(buf) != 8 * count:
                    raise IoFailure(f"truncated checkpoint {path}")
                arrays[entry["name"]] = np.frombuffer(
                    buf, dtype="<f8").reshape(shape).copy()
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    config = NetConfig.from_dict(meta["config"])
    return NetParams(arrays, meta["slot_count"]), config, meta["seed"]
