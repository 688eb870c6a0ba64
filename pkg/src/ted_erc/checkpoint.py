"""Checkpoint container.

Layout: the magic line ``TEDCKPT <version>``, one line of JSON metadata
(tensor names, shapes, byte offsets, config snapshot, seed), then the raw
little-endian float64 tensor data. No timestamps are written, so identical
models give identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"TEDCKPT"
VERSION = 1


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict) -> None:
    tensors, blobs, offset = [], [], 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype="<f8")
        raw = arr.tobytes()
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": tensors, "meta": meta}, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(MAGIC + b" %d\n" % VERSION)
        fh.write(header.encode("utf-8") + b"\n")
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    first = data.find(b"\n")
    magic, _, version = data[:first].partition(b" ")
    if magic != MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    if int(version) != VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {int(version)}")
    second = data.find(b"\n", first + 1)
    header = json.loads(data[first + 1 : second])
    body = data[second + 1 :]
    params = {}
    for t in header["tensors"]:
        raw = body[t["offset"] : t["offset"] + t["nbytes"]]
        if len(raw) != t["nbytes"]:
            raise DataError(f"{path}: truncated tensor {t['name']}")
        params[t["name"]] = np.frombuffer(raw, dtype="<f8").reshape(t["shape"]).astype(np.float64)
    return params, header["meta"]
