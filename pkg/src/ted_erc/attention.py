"""Turn-level multi-head self-attention stack and classifier head.

Everything runs in float64 numpy with hand-written backward passes. The
batched engine works on padded arrays::

    X        (B, M, d)   turn vectors, padding rows arbitrary
    allowed  (B, M)      key columns a row may attend to
    log_beta (B, M)      log attention factors, last layer only
    cur      (B,)        position of the current turn

Parameters live in a flat ``dict[str, ndarray]``; names follow
``layer{n}.wq`` (J, d, d_k), ``layer{n}.wo`` (d, d), ``layer{n}.ln_g`` ...,
``cls.w`` (L, d), ``cls.b`` (L,).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .pooling import TurnVectors
from .priority import BetaVector

LN_EPS = 1e-5
MASK_MODES = ("all", "same_speaker_only", "listener_only")

Params = dict[str, np.ndarray]


@dataclass(frozen=True)
class Architecture:
    dim: int = 32
    layers: int = 2
    heads: int = 4
    labels: int = 4
    output_projection: bool = True
    pe: bool = False
    ffn: bool = False
    dropout: float = 0.1

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"dim {self.dim} is not divisible by heads {self.heads}")
        if self.layers < 1 or self.heads < 1 or self.labels < 1:
            raise ValueError("layers, heads and labels must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray
    logits: np.ndarray

    @property
    def label(self) -> int:
        # np.argmax returns the first maximum: lowest-index tie-break
        return int(np.argmax(self.probabilities))


def _xavier(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(arch: Architecture, rng: np.random.Generator) -> Params:
    d, J, dk = arch.dim, arch.heads, arch.head_dim
    p: Params = {}
    for n in range(arch.layers):
        for name in ("wq", "wk", "wv"):
            p[f"layer{n}.{name}"] = _xavier(rng, (J, d, dk), d, dk)
        if arch.output_projection:
            p[f"layer{n}.wo"] = _xavier(rng, (d, d), d, d)
        p[f"layer{n}.ln_g"] = np.ones(d)
        p[f"layer{n}.ln_b"] = np.zeros(d)
        if arch.ffn:
            p[f"layer{n}.ffn_w1"] = _xavier(rng, (d, 4 * d), d, 4 * d)
            p[f"layer{n}.ffn_b1"] = np.zeros(4 * d)
            p[f"layer{n}.ffn_w2"] = _xavier(rng, (4 * d, d), 4 * d, d)
            p[f"layer{n}.ffn_b2"] = np.zeros(d)
            p[f"layer{n}.ffn_ln_g"] = np.ones(d)
            p[f"layer{n}.ffn_ln_b"] = np.zeros(d)
    p["cls.w"] = _xavier(rng, (arch.labels, d), d, arch.labels)
    p["cls.b"] = np.zeros(arch.labels)
    return p


# ---------------------------------------------------------------------------
# row-level primitives


def softmax_row(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    e = np.exp(s - s.max())
    return e / e.sum()


def priority_softmax_row(scores, beta) -> np.ndarray:
    """``beta_t * exp(s_t) / sum_k beta_k * exp(s_k)``, evaluated in log space."""
    b = np.asarray(beta.values if isinstance(beta, BetaVector) else beta, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if b.shape != s.shape:
        raise ValueError("beta and scores differ in length")
    if np.any(b <= 0):
        raise ValueError("beta must be positive")
    return softmax_row(s + np.log(b))


def positional_table(m: int, d: int) -> np.ndarray:
    pos = np.arange(m, dtype=np.float64)[:, None]
    i = np.arange(d)
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


# ---------------------------------------------------------------------------
# layer norm


def _ln_fwd(r, g, b):
    mu = r.mean(axis=-1, keepdims=True)
    var = r.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (r - mu) * inv
    return xhat * g + b, (xhat, inv, g)


def _ln_bwd(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).reshape(-1, xhat.shape[-1]).sum(axis=0)
    db = dy.reshape(-1, xhat.shape[-1]).sum(axis=0)
    dxhat = dy * g
    dr = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dr, dg, db


# ---------------------------------------------------------------------------
# batched sublayers


def _heads_flat(w):
    # (J, d, dk) -> (d, J*dk), head-major columns
    J, d, dk = w.shape
    return w.transpose(1, 0, 2).reshape(d, J * dk)


def _split(x, J):
    B, M, D = x.shape
    return x.reshape(B, M, J, D // J).transpose(0, 2, 1, 3)


def _merge(x):
    B, J, M, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, M, J * dk)


def _dropout_mask(rng, shape, p):
    return (rng.random(shape) >= p) / (1.0 - p)


def mhsa_forward(params, n, X, bias, dropout=0.0, rng=None):
    """One attention sublayer: heads, concat, W^O, residual, layer norm.

    ``bias`` broadcasts against the (B, J, M, M) logits and carries the key
    mask (-inf) and log attention factors.
    """
    wq, wk, wv = params[f"layer{n}.wq"], params[f"layer{n}.wk"], params[f"layer{n}.wv"]
    J, d, dk = wq.shape
    scale = 1.0 / math.sqrt(dk)
    Wq, Wk, Wv = _heads_flat(wq), _heads_flat(wk), _heads_flat(wv)
    Q, K, V = _split(X @ Wq, J), _split(X @ Wk, J), _split(X @ Wv, J)
    S = (Q @ K.swapaxes(-1, -2)) * scale
    logits = S + bias
    E = np.exp(logits - logits.max(axis=-1, keepdims=True))
    A = E / E.sum(axis=-1, keepdims=True)
    m1 = _dropout_mask(rng, A.shape, dropout) if dropout > 0 else None
    Ad = A * m1 if m1 is not None else A
    Oc = _merge(Ad @ V)
    wo = params.get(f"layer{n}.wo")
    Z = Oc @ wo if wo is not None else Oc
    m2 = _dropout_mask(rng, Z.shape, dropout) if dropout > 0 else None
    if m2 is not None:
        Z = Z * m2
    Y, ln = _ln_fwd(X + Z, params[f"layer{n}.ln_g"], params[f"layer{n}.ln_b"])
    cache = (X, Q, K, V, A, Ad, m1, m2, Oc, ln, (Wq, Wk, Wv), scale)
    return Y, cache


def mhsa_backward(params, n, dY, cache, grads):
    X, Q, K, V, A, Ad, m1, m2, Oc, ln, (Wq, Wk, Wv), scale = cache
    J, d, dk = params[f"layer{n}.wq"].shape
    dR, dg, db = _ln_bwd(dY, ln)
    grads[f"layer{n}.ln_g"] = dg
    grads[f"layer{n}.ln_b"] = db
    dX = dR.copy()
    dZ = dR * m2 if m2 is not None else dR
    wo = params.get(f"layer{n}.wo")
    if wo is not None:
        grads[f"layer{n}.wo"] = Oc.reshape(-1, d).T @ dZ.reshape(-1, d)
        dOc = dZ @ wo.T
    else:
        dOc = dZ
    dO = _split(dOc, J)
    dAd = dO @ V.swapaxes(-1, -2)
    dV = Ad.swapaxes(-1, -2) @ dO
    dA = dAd * m1 if m1 is not None else dAd
    dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True)) * scale
    dQ = dS @ K
    dK = dS.swapaxes(-1, -2) @ Q
    Xf = X.reshape(-1, d)
    for name, dP, Wf in (("wq", dQ, Wq), ("wk", dK, Wk), ("wv", dV, Wv)):
        dPf = _merge(dP)
        grads[f"layer{n}.{name}"] = (Xf.T @ dPf.reshape(-1, J * dk)).reshape(d, J, dk).transpose(1, 0, 2)
        dX += dPf @ Wf.T
    return dX


def ffn_forward(params, n, X):
    pre = f"layer{n}.ffn_"
    F1 = X @ params[pre + "w1"] + params[pre + "b1"]
    Hh = np.maximum(F1, 0.0)
    F2 = Hh @ params[pre + "w2"] + params[pre + "b2"]
    Y, ln = _ln_fwd(X + F2, params[pre + "ln_g"], params[pre + "ln_b"])
    return Y, (X, F1, Hh, ln)


def ffn_backward(params, n, dY, cache, grads):
    pre = f"layer{n}.ffn_"
    X, F1, Hh, ln = cache
    dR, grads[pre + "ln_g"], grads[pre + "ln_b"] = _ln_bwd(dY, ln)
    d, h = params[pre + "w1"].shape
    grads[pre + "w2"] = Hh.reshape(-1, h).T @ dR.reshape(-1, d)
    grads[pre + "b2"] = dR.reshape(-1, d).sum(axis=0)
    dF1 = (dR @ params[pre + "w2"].T) * (F1 > 0)
    grads[pre + "w1"] = X.reshape(-1, d).T @ dF1.reshape(-1, h)
    grads[pre + "b1"] = dF1.reshape(-1, h).sum(axis=0)
    return dR + dF1 @ params[pre + "w1"].T


def key_bias(allowed: np.ndarray, log_beta: Optional[np.ndarray]) -> np.ndarray:
    bias = np.where(allowed, 0.0, -np.inf)
    if log_beta is not None:
        bias = bias + log_beta
    return bias[:, None, None, :]


def stack_forward(params, arch: Architecture, X, allowed, log_beta=None, train=False, rng=None):
    """Run all layers. The attention factors enter the last layer only.

    Returns the final turn states and a cache for :func:`stack_backward`.
    """
    B, M, d = X.shape
    if np.any(~allowed.any(axis=1)):
        raise ValueError("key mask excludes every column for some row")
    if arch.pe:
        X = X + positional_table(M, d)
    p = arch.dropout if train else 0.0
    plain = key_bias(allowed, None)
    caches = []
    for n in range(arch.layers):
        last = n == arch.layers - 1
        bias = key_bias(allowed, log_beta) if (last and log_beta is not None) else plain
        X, c_att = mhsa_forward(params, n, X, bias, p, rng)
        c_ffn = None
        if arch.ffn:
            X, c_ffn = ffn_forward(params, n, X)
        caches.append((c_att, c_ffn))
    return X, caches


def stack_backward(params, arch: Architecture, dH, caches, grads):
    for n in reversed(range(arch.layers)):
        c_att, c_ffn = caches[n]
        if c_ffn is not None:
            dH = ffn_backward(params, n, dH, c_ffn, grads)
        dH = mhsa_backward(params, n, dH, c_att, grads)
    return dH


def attention_maps(caches) -> list[np.ndarray]:
    """Normalized attention per layer, shape (B, J, M, M), before dropout."""
    return [c_att[4] for c_att, _ in caches]


def loss_and_grads(params, arch, X, allowed, cur, gold, log_beta=None, train=False, rng=None):
    """Mean cross-entropy over the batch and its gradient for every tensor."""
    H, caches = stack_forward(params, arch, X, allowed, log_beta, train, rng)
    B = X.shape[0]
    rows = np.arange(B)
    h = H[rows, cur]
    logits = h @ params["cls.w"].T + params["cls.b"]
    logz = _logsumexp(logits)
    loss = float(np.mean(logz - logits[rows, gold]))
    dlogits = np.exp(logits - logz[:, None])
    dlogits[rows, gold] -= 1.0
    dlogits /= B
    grads: Params = {"cls.w": dlogits.T @ h, "cls.b": dlogits.sum(axis=0)}
    dH = np.zeros_like(H)
    dH[rows, cur] = dlogits @ params["cls.w"]
    stack_backward(params, arch, dH, caches, grads)
    return loss, grads


def _logsumexp(z):
    zmax = z.max(axis=-1)
    return zmax + np.log(np.exp(z - zmax[..., None]).sum(axis=-1))


def batch_logits(params, arch, X, allowed, cur, log_beta=None) -> np.ndarray:
    H, _ = stack_forward(params, arch, X, allowed, log_beta)
    h = H[np.arange(X.shape[0]), cur]
    return h @ params["cls.w"].T + params["cls.b"]


# ---------------------------------------------------------------------------
# single-example API


def column_mask(speaker_ids, current_pos: int, mode: str) -> np.ndarray:
    """Key columns allowed under a local-attention mode; the current turn always is."""
    if mode not in MASK_MODES:
        raise ValueError(f"mask must be one of {MASK_MODES}")
    s = np.asarray(speaker_ids)
    if mode == "all":
        allowed = np.ones(len(s), dtype=bool)
    elif mode == "same_speaker_only":
        allowed = s == s[current_pos]
    else:
        allowed = s != s[current_pos]
    allowed[current_pos] = True
    return allowed


def attn_scores(turn_vecs: TurnVectors, layer: int, head: int, params: Params) -> np.ndarray:
    """Raw scaled dot-product scores (m', m') for one head."""
    wq = params[f"layer{layer}.wq"][head]
    wk = params[f"layer{layer}.wk"][head]
    X = turn_vecs.vectors
    return (X @ wq) @ (X @ wk).T / math.sqrt(wq.shape[1])


def mhsa_layer(
    turn_vecs: TurnVectors,
    layer: int,
    params: Params,
    beta: Optional[BetaVector] = None,
    mask: str = "all",
) -> TurnVectors:
    allowed = column_mask(turn_vecs.speaker_ids, turn_vecs.current_pos, mask)
    log_beta = None if beta is None else np.log(np.asarray(beta.values, dtype=np.float64))[None]
    X = turn_vecs.vectors[None]
    Y, _ = mhsa_forward(params, layer, X, key_bias(allowed[None], log_beta))
    return TurnVectors(Y[0], turn_vecs.current_pos, turn_vecs.speaker_ids, turn_vecs.turn_indices)


def positional_encoding(turn_vecs: TurnVectors) -> TurnVectors:
    m, d = turn_vecs.vectors.shape
    return TurnVectors(
        turn_vecs.vectors + positional_table(m, d),
        turn_vecs.current_pos,
        turn_vecs.speaker_ids,
        turn_vecs.turn_indices,
    )


def ffn_layer(turn_vecs: TurnVectors, params: Params, layer: int = 0) -> TurnVectors:
    Y, _ = ffn_forward(params, layer, turn_vecs.vectors[None])
    return TurnVectors(Y[0], turn_vecs.current_pos, turn_vecs.speaker_ids, turn_vecs.turn_indices)


def classify(current_vec, params: Params) -> Prediction:
    logits = params["cls.w"] @ np.asarray(current_vec, dtype=np.float64) + params["cls.b"]
    return Prediction(softmax_row(logits), logits)
