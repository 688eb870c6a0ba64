"""Token-vector providers standing in for a pretrained encoder.

``hash`` mode gives every distinct token string a fixed random unit vector
derived from (token, seed, dim). ``file`` mode reads precomputed vectors.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .cust import CustSequence
from .errors import DataError

EMBED_MODES = ("hash", "file")


@dataclass(frozen=True)
class TokenEmbeddings:
    vectors: np.ndarray  # (n_tokens, dim)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return self.vectors.shape[0]


@lru_cache(maxsize=1 << 16)
def _hash_vector(token: str, seed: int, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode("utf-8"), digest_size=16).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    v.setflags(write=False)
    return v


def hash_vector(token: str, seed: int, dim: int) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return _hash_vector(token, int(seed), int(dim))


def embed(
    seq: CustSequence,
    mode: str = "hash",
    dim: int = 32,
    seed: int = 0,
    source: Optional[str] = None,
) -> TokenEmbeddings:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if mode == "hash":
        vecs = np.stack([hash_vector(tok, seed, dim) for tok in seq.tokens])
        return TokenEmbeddings(vecs)
    if mode == "file":
        if source is None:
            raise DataError("file embedding mode needs a source path")
        vecs = read_embedding_file(source)
        if vecs.shape != (len(seq.tokens), dim):
            raise DataError(
                f"{source}: expected {len(seq.tokens)} x {dim} vectors, got {vecs.shape[0]} x {vecs.shape[1]}"
            )
        return TokenEmbeddings(vecs)
    raise ValueError(f"unknown embedding mode {mode!r}")


def read_embedding_file(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        try:
            fields = dict(h.split("=", 1) for h in header)
            dim, n = int(fields["dim"]), int(fields["tokens"])
        except (ValueError, KeyError):
            raise DataError(f"{path}: header must read 'dim=<d> tokens=<n>'") from None
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            try:
                row = [float(x) for x in line.split()]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if len(row) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} values, got {len(row)}")
            rows.append(row)
    if len(rows) != n:
        raise DataError(f"{path}: header promises {n} rows, found {len(rows)}")
    vecs = np.array(rows, dtype=np.float64).reshape(n, dim)
    if not np.all(np.isfinite(vecs)):
        raise DataError(f"{path}: non-finite value")
    return vecs


def write_embedding_file(path, vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors, dtype=np.float64)
    n, dim = vectors.shape
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={dim} tokens={n}\n")
        for row in vectors:
            fh.write(" ".join(f"{x:.17g}" for x in row))
            fh.write("\n")
