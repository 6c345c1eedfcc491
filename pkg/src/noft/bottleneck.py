"""Learnable information filter and its Gaussian KL cost.

The filter holds one logit per noise element; the squashed value lam in
(0, 1) blends the content representation R against fresh diversity noise:

    Z = lam * R + (1 - lam) * eps

Keeping information is priced by the KL divergence of N(lam*R, (1-lam)^2)
against the standard-normal prior, averaged over elements. lam is hard-
clipped away from 0 and 1 so the log term stays finite; clipped
coordinates get zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DomainError, ShapeError

LAMBDA_MIN = 1e-4


@dataclass
class FilterMap:
    """Pre-squash logits, one per noise element."""

    logits: np.ndarray

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.logits.shape


@dataclass(frozen=True)
class FilterTape:
    """Squash cache for the backward pass."""

    lam: np.ndarray   # clipped values used in the forward pass
    raw: np.ndarray   # unclipped logistic values, for derivative and clip mask


def lambda_with_grad(filter_map: FilterMap) -> tuple[np.ndarray, FilterTape]:
    raw = expit(filter_map.logits)
    lam = np.clip(raw, LAMBDA_MIN, 1.0 - LAMBDA_MIN)
    return lam, FilterTape(lam=lam, raw=raw)


def lambda_of(filter_map: FilterMap) -> np.ndarray:
    """Elementwise logistic squash of the logits, clipped to [1e-4, 1 - 1e-4]."""
    lam, _ = lambda_with_grad(filter_map)
    return lam


def compress(r, eps_div, lam) -> np.ndarray:
    """Blend content against diversity noise: Z = lam*R + (1-lam)*eps."""
    r = np.asarray(r, dtype=np.float64)
    eps_div = np.asarray(eps_div, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if not (r.shape == eps_div.shape == lam.shape):
        raise ShapeError(
            f"compress needs one shape, got {r.shape}, {eps_div.shape}, {lam.shape}"
        )
    return lam * r + (1.0 - lam) * eps_div


def info_loss_elements(lam, r) -> np.ndarray:
    """Per-element KL of N(lam*r, (1-lam)^2) against N(0, 1)."""
    lam = np.asarray(lam, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if lam.shape != r.shape:
        raise ShapeError(f"lambda shape {lam.shape} does not match r {r.shape}")
    if np.any(lam < 0.0) or np.any(lam >= 1.0):
        raise DomainError("lambda must lie in [0, 1); the clip guard was bypassed")
    one_m = 1.0 - lam
    return -0.5 * (np.log(one_m**2) - one_m**2 - (lam * r) ** 2 + 1.0)


def info_loss(lam, r) -> float:
    """Mean of the per-element KL values; 0 exactly when lam is 0 everywhere."""
    return float(info_loss_elements(lam, r).mean())


def bottleneck_backward(tape: FilterTape, r, eps_div, d_z, info_weight: float):
    """Gradients of the blend plus info_weight times the mean KL cost.

    d_z is the upstream gradient on Z. Returns (dr, dlogits); the logit
    gradient is chained through the logistic derivative and zeroed wherever
    the forward clip was active.
    """
    r = np.asarray(r, dtype=np.float64)
    eps_div = np.asarray(eps_div, dtype=np.float64)
    d_z = np.asarray(d_z, dtype=np.float64)
    lam, raw = tape.lam, tape.raw
    if not (r.shape == eps_div.shape == d_z.shape == lam.shape):
        raise ShapeError("bottleneck backward shapes are inconsistent")

    n = lam.size
    one_m = 1.0 - lam
    # d/d lam and d/d r of the per-element KL, with the 1/n of the mean folded in.
    d_info_d_lam = (1.0 / one_m - one_m + lam * r * r) * (info_weight / n)
    d_info_d_r = (lam * lam * r) * (info_weight / n)

    d_lam = d_z * (r - eps_div) + d_info_d_lam
    d_r = d_z * lam + d_info_d_r

    active = (raw >= LAMBDA_MIN) & (raw <= 1.0 - LAMBDA_MIN)
    d_logits = np.where(active, d_lam * raw * (1.0 - raw), 0.0)
    return d_r, d_logits
