"""Noise tensors: seeded Gaussian sampling, standardization, MSE.

A noise tensor is a plain numpy array, channels first, 2 to 4 dims,
e.g. (4, 64, 64) image latents or (8, 16, 16, 16) volume latents.
Sampled data is float32; reductions accumulate in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateVarianceError, ShapeError

MIN_RANK = 2
MAX_RANK = 4
VARIANCE_FLOOR = 1e-12


class RngState:
    """Seeded Gaussian stream on the Philox (counter-based) generator.

    Equal (seed, stream) pairs replay the identical sample sequence on any
    platform; distinct stream ids under one seed are independent streams.
    """

    def __init__(self, seed: int, stream: int = 0):
        seed = int(seed)
        stream = int(stream)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if not 0 <= stream < 2**64:
            raise ValueError("stream must fit in an unsigned 64-bit integer")
        self.seed = seed
        self.stream = stream
        key = np.array([seed, stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def normal(self, shape, dtype=np.float32) -> np.ndarray:
        """Draw standard-normal values, advancing the stream."""
        return self._gen.standard_normal(size=shape, dtype=dtype)

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream={self.stream})"


def validate_noise_shape(shape) -> tuple[int, ...]:
    """Check the channels-first layout; returns the shape as a tuple of ints."""
    shape = tuple(int(d) for d in shape)
    if not MIN_RANK <= len(shape) <= MAX_RANK:
        raise ShapeError(
            f"noise shape needs {MIN_RANK} to {MAX_RANK} dims, got {shape!r}"
        )
    if any(d < 1 for d in shape):
        raise ShapeError(f"noise shape dims must be positive, got {shape!r}")
    return shape


def gaussian_sample(shape, rng: RngState) -> np.ndarray:
    """I.i.d. standard-normal float32 tensor; deterministic for a given rng."""
    return rng.normal(validate_noise_shape(shape), dtype=np.float32)


@dataclass(frozen=True)
class StdTape:
    """What standardize_backward needs: the output and the scale it used."""

    y: np.ndarray
    scale: float


def standardize_with_grad(t) -> tuple[np.ndarray, StdTape]:
    """Standardize in float64 and keep the tape for the backward pass."""
    t64 = np.asarray(t, dtype=np.float64)
    if t64.size < 2:
        raise ShapeError("standardize needs at least 2 elements")
    m = t64.mean()
    s = float(np.sqrt(((t64 - m) ** 2).mean()))
    if s * s < VARIANCE_FLOOR:
        raise DegenerateVarianceError(
            f"variance {s * s:.3e} is below the {VARIANCE_FLOOR:g} floor"
        )
    y = (t64 - m) / s
    return y, StdTape(y=y, scale=s)


def standardize(t: np.ndarray) -> np.ndarray:
    """Shift and scale to zero mean and unit std over all elements.

    Statistics are global (not per channel) and use the population (1/N)
    variance. Raises DegenerateVarianceError on a constant input.
    """
    y, _ = standardize_with_grad(t)
    dtype = np.asarray(t).dtype
    if not np.issubdtype(dtype, np.floating):
        return y
    return y.astype(dtype, copy=False)


def standardize_backward(tape: StdTape, dy) -> np.ndarray:
    """Vector-Jacobian product of standardize, mean and variance terms included."""
    dy = np.asarray(dy, dtype=np.float64)
    y = tape.y
    if dy.shape != y.shape:
        raise ShapeError(f"gradient shape {dy.shape} does not match {y.shape}")
    return (dy - dy.mean() - y * (dy * y).mean()) / tape.scale


def mse(a, b) -> float:
    """Mean (not sum) of squared elementwise differences, in float64."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse shapes differ: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float((d * d).mean())
