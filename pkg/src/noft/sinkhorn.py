"""Entropic optimal transport solved by classical multiplicative Sinkhorn scaling.

Works directly on the Gibbs kernel K = exp(-C/eps); the log-domain variant
used inside the attention layer lives in `attention` and is cross-checked
against this solver in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InstabilityError, ParameterError, ShapeError

MARGINAL_SUM_TOL = 1e-9


@dataclass(frozen=True)
class OtProblem:
    """Discrete transport problem: cost matrix, marginals, regularization.

    cost: (M, N) finite real matrix.
    mu:   length-M nonnegative vector summing to 1.
    nu:   length-N nonnegative vector summing to 1.
    epsilon: entropy regularization strength, > 0.
    """

    cost: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    epsilon: float = 1.0

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=np.float64)
        mu = np.asarray(self.mu, dtype=np.float64)
        nu = np.asarray(self.nu, dtype=np.float64)
        if cost.ndim != 2:
            raise ShapeError(f"cost must be a matrix, got ndim={cost.ndim}")
        if mu.ndim != 1 or mu.shape[0] != cost.shape[0]:
            raise ShapeError(
                f"mu length {mu.shape} does not match cost rows {cost.shape[0]}"
            )
        if nu.ndim != 1 or nu.shape[0] != cost.shape[1]:
            raise ShapeError(
                f"nu length {nu.shape} does not match cost columns {cost.shape[1]}"
            )
        if not np.all(np.isfinite(cost)):
            raise DomainError("cost entries must be finite")
        if np.any(mu < 0) or np.any(nu < 0):
            raise DomainError("marginals must be nonnegative")
        if abs(mu.sum() - 1.0) > MARGINAL_SUM_TOL or abs(nu.sum() - 1.0) > MARGINAL_SUM_TOL:
            raise DomainError("marginals must each sum to 1")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass(frozen=True)
class TransportPlan:
    """Solver output: the plan, iterations spent, achieved row-marginal violation."""

    plan: np.ndarray
    iterations_used: int
    residual: float


def _plan_matrix(plan) -> np.ndarray:
    if isinstance(plan, TransportPlan):
        return plan.plan
    return np.asarray(plan, dtype=np.float64)


def solve(problem: OtProblem, tol: float = 1e-9, max_iters: int = 10_000) -> TransportPlan:
    """Alternating row/column scaling of the Gibbs kernel.

    Starts from v = 1 and repeats u = mu / (K v), v = nu / (K^T u) until the
    1-norm of (row sums - mu) drops below tol or max_iters is reached. Zero
    marginal entries pin their scaling factor to 0 (the 0/0 -> 0 convention);
    kernel overflow or a kernel row/column starved to zero raises
    InstabilityError rather than clamping.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ParameterError(f"max_iters must be at least 1, got {max_iters}")
    cost, mu, nu, eps = problem.cost, problem.mu, problem.nu, problem.epsilon

    with np.errstate(over="ignore"):
        kernel = np.exp(-cost / eps)
    if not np.all(np.isfinite(kernel)):
        raise InstabilityError(
            "Gibbs kernel exp(-C/eps) overflowed; epsilon too small for this cost range"
        )
    if np.any((kernel.sum(axis=1) == 0.0) & (mu > 0)) or np.any(
        (kernel.sum(axis=0) == 0.0) & (nu > 0)
    ):
        raise InstabilityError(
            "Gibbs kernel exp(-C/eps) underflowed to zero on a needed row or column"
        )

    u = np.zeros_like(mu)
    v = np.ones_like(nu)
    iterations = 0
    residual = np.inf
    for iterations in range(1, max_iters + 1):
        kv = kernel @ v
        u = np.divide(mu, kv, out=np.zeros_like(mu), where=mu > 0)
        ktu = kernel.T @ u
        v = np.divide(nu, ktu, out=np.zeros_like(nu), where=nu > 0)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InstabilityError(
                "scaling vectors overflowed during iteration; epsilon too small"
            )
        row_sums = u * (kernel @ v)
        residual = float(np.abs(row_sums - mu).sum())
        if residual < tol:
            break

    plan = (u[:, None] * kernel) * v[None, :]
    return TransportPlan(plan=plan, iterations_used=iterations, residual=residual)


def entropy(plan) -> float:
    """Plan entropy -sum T_ij log T_ij with the 0 log 0 = 0 convention."""
    t = _plan_matrix(plan)
    if np.any(t < 0):
        raise DomainError("plan entries must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(t > 0, t * np.log(t), 0.0)
    return float(-terms.sum())


def transport_cost(plan, cost) -> float:
    """Frobenius inner product sum_ij T_ij C_ij."""
    t = _plan_matrix(plan)
    c = np.asarray(cost, dtype=np.float64)
    if t.shape != c.shape:
        raise ShapeError(f"plan shape {t.shape} does not match cost shape {c.shape}")
    return float((t * c).sum())
