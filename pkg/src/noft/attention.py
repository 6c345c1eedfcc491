"""Doubly-stochastic attention over flattened spatial sites.

Pointwise (1x1) learnable projections produce Q, K, V per site; scaled
dot-product logits are pushed toward a doubly-stochastic matrix by
alternating log-domain row/column normalization, then exponentiated and
applied to the values. The forward pass tapes the per-round normalizer
vectors so the backward pass can differentiate exactly through every
executed round (unrolled, not implicit, differentiation).

All internal arithmetic is float64; float32 inputs come back as float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, ShapeError


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    # Max subtraction is mandatory: raw exp of large logits would overflow.
    m = a.max(axis=axis, keepdims=True)
    out = m + np.log(np.exp(a - m).sum(axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


@dataclass
class AttentionParams:
    """Per-channel projection kernels (C x C each) and bias vectors (C).

    The same container doubles as the gradient holder in the backward pass.
    """

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    bq: np.ndarray
    bk: np.ndarray
    bv: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.wq).shape[0]
        for name in ("wq", "wk", "wv"):
            w = np.asarray(getattr(self, name), dtype=np.float64)
            if w.shape != (c, c):
                raise ShapeError(f"{name} must be ({c}, {c}), got {w.shape}")
            setattr(self, name, w)
        for name in ("bq", "bk", "bv"):
            b = np.asarray(getattr(self, name), dtype=np.float64)
            if b.shape != (c,):
                raise ShapeError(f"{name} must be length {c}, got {b.shape}")
            setattr(self, name, b)

    @property
    def channels(self) -> int:
        return self.wq.shape[0]

    @property
    def n_parameters(self) -> int:
        c = self.channels
        return 3 * (c * c + c)

    @classmethod
    def zeros(cls, channels: int) -> "AttentionParams":
        c = channels
        z = lambda *s: np.zeros(s, dtype=np.float64)  # noqa: E731
        return cls(z(c, c), z(c, c), z(c, c), z(c), z(c), z(c))

    def as_dict(self) -> dict[str, np.ndarray]:
        return {
            "wq": self.wq, "wk": self.wk, "wv": self.wv,
            "bq": self.bq, "bk": self.bk, "bv": self.bv,
        }


@dataclass
class AttentionTape:
    """Forward cache: projections, per-round normalizers, final log-plan."""

    params: AttentionParams
    in_shape: tuple[int, ...]
    in_dtype: np.dtype
    x_flat: np.ndarray      # (C, L)
    q: np.ndarray           # (L, C)
    k: np.ndarray
    v: np.ndarray
    alphas: np.ndarray      # (n_iters, L) row log-normalizers
    betas: np.ndarray       # (n_iters, L) column log-normalizers
    log_plan: np.ndarray    # (L, L), plan = exp(log_plan)
    plan: np.ndarray
    residual: float         # max |row or column sum - 1|

    @property
    def n_iters(self) -> int:
        return self.alphas.shape[0]


def project_qkv(x, params: AttentionParams):
    """Apply the three pointwise projections; site l maps to row l of each output.

    x is channels-first; spatial dims are flattened row-major to length L.
    Returns (Q, K, V), each (L, C) float64.
    """
    x64 = np.asarray(x, dtype=np.float64)
    c = params.channels
    if x64.ndim < 2 or x64.shape[0] != c:
        raise ShapeError(
            f"input must have {c} leading channels, got shape {x64.shape}"
        )
    x_flat = x64.reshape(c, -1)
    q = x_flat.T @ params.wq.T + params.bq
    k = x_flat.T @ params.wk.T + params.bk
    v = x_flat.T @ params.wv.T + params.bv
    return q, k, v


def attention_logits(q, k) -> np.ndarray:
    """Scaled dot products A_ij = <q_i, k_j> / sqrt(C)."""
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if q.ndim != 2 or k.ndim != 2 or q.shape[1] != k.shape[1]:
        raise ShapeError(f"incompatible projection shapes {q.shape} and {k.shape}")
    return (q @ k.T) / math.sqrt(q.shape[1])


def _normalize_with_tape(logits: np.ndarray, n_iters: int):
    """Alternating log-domain normalization; returns final matrix and the
    per-round normalizer vectors needed to replay intermediates."""
    a = logits.copy()
    n_rows, n_cols = a.shape
    alphas = np.empty((n_iters, n_rows))
    betas = np.empty((n_iters, n_cols))
    for i in range(n_iters):
        lse_rows = _logsumexp(a, axis=1)   # reduce across each row
        a -= lse_rows[:, None]
        alphas[i] = lse_rows
        lse_cols = _logsumexp(a, axis=0)   # reduce down each column
        a -= lse_cols[None, :]
        betas[i] = lse_cols
    return a, alphas, betas


def log_sinkhorn_normalize(a, n_iters: int):
    """Drive logits toward a doubly-stochastic matrix in the log domain.

    Each round subtracts the row LogSumExp, then the column LogSumExp
    (max-subtracted, so arbitrary logit magnitudes are safe). Returns the
    normalized log matrix and its exponential T; at convergence every row
    and column of T sums to 1.
    """
    if n_iters < 1:
        raise ParameterError(f"n_iters must be at least 1, got {n_iters}")
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"logits must be a matrix, got ndim={a.ndim}")
    if not np.all(np.isfinite(a)):
        raise DomainError("logits must be finite")
    a_norm, _, _ = _normalize_with_tape(a, n_iters)
    return a_norm, np.exp(a_norm)


def sinkhorn_attention(x, params: AttentionParams, n_iters: int = 5):
    """Full layer: project, normalize logits to a transport plan, mix values.

    Returns (y, tape) with y shaped exactly like x.
    """
    if n_iters < 1:
        raise ParameterError(f"n_iters must be at least 1, got {n_iters}")
    x_arr = np.asarray(x)
    q, k, v = project_qkv(x_arr, params)
    logits = attention_logits(q, k)
    if not np.all(np.isfinite(logits)):
        raise DomainError("attention logits must be finite")
    log_plan, alphas, betas = _normalize_with_tape(logits, n_iters)
    plan = np.exp(log_plan)
    residual = max(
        float(np.abs(plan.sum(axis=1) - 1.0).max()),
        float(np.abs(plan.sum(axis=0) - 1.0).max()),
    )
    y_flat = (plan @ v).T
    y = y_flat.reshape(x_arr.shape).astype(x_arr.dtype, copy=False)
    c = params.channels
    tape = AttentionTape(
        params=params,
        in_shape=x_arr.shape,
        in_dtype=x_arr.dtype,
        x_flat=np.asarray(x_arr, dtype=np.float64).reshape(c, -1),
        q=q, k=k, v=v,
        alphas=alphas, betas=betas,
        log_plan=log_plan, plan=plan,
        residual=residual,
    )
    return y, tape


def attention_backward(tape: AttentionTape, dy):
    """Exact gradients of the taped forward pass.

    Each LogSumExp subtraction is differentiated as an ordinary step; the
    intermediate log matrices are rebuilt by adding the taped normalizer
    vectors back, deepest round first. Returns (dx, dparams) with dparams an
    AttentionParams-shaped container.
    """
    dy = np.asarray(dy)
    if dy.shape != tape.in_shape:
        raise ShapeError(
            f"upstream gradient shape {dy.shape} does not match forward shape {tape.in_shape}"
        )
    params = tape.params
    c = params.channels
    scale = 1.0 / math.sqrt(c)

    d_mix = np.asarray(dy, dtype=np.float64).reshape(c, -1).T   # (L, C)
    d_v = tape.plan.T @ d_mix
    d_a = (d_mix @ tape.v.T) * tape.plan                        # through T = exp(A)

    # Replay the normalization rounds in reverse. `cur` always holds the log
    # matrix right after the step being undone; exp(cur) is that step's
    # softmax, which the subtraction rule needs.
    cur = tape.log_plan.copy()
    for i in range(tape.n_iters - 1, -1, -1):
        soft = np.exp(cur)
        d_a -= soft * d_a.sum(axis=0, keepdims=True)    # column normalization
        cur += tape.betas[i][None, :]
        soft = np.exp(cur)
        d_a -= soft * d_a.sum(axis=1, keepdims=True)    # row normalization
        cur += tape.alphas[i][:, None]

    d_q = d_a @ tape.k * scale
    d_k = d_a.T @ tape.q * scale

    x_flat_t = tape.x_flat.T
    d_params = AttentionParams(
        wq=d_q.T @ x_flat_t,
        wk=d_k.T @ x_flat_t,
        wv=d_v.T @ x_flat_t,
        bq=d_q.sum(axis=0),
        bk=d_k.sum(axis=0),
        bv=d_v.sum(axis=0),
    )
    d_x_flat = params.wq.T @ d_q.T + params.wk.T @ d_k.T + params.wv.T @ d_v.T
    dx = d_x_flat.reshape(tape.in_shape)
    return dx, d_params
