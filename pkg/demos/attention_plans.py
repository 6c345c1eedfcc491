"""Doubly-stochastic attention in isolation.

Shows the log-domain normalization driving random logits toward a matrix
whose rows and columns all sum to 1, the agreement with the classical
transport solver, and the exactness of the unrolled backward pass.
Run with: python demos/attention_plans.py
"""

import numpy as np

from noft import OtProblem, log_sinkhorn_normalize, solve
from noft.attention import AttentionParams, attention_backward, sinkhorn_attention
from noft.tensor import RngState
from noft.verify import grad_check


def main():
    size = 8
    logits = RngState(0, stream=1).normal((size, size), dtype=np.float64)

    print("marginal deviation of exp(normalized logits) per round count:")
    for rounds in (1, 2, 5, 10, 20, 40):
        _, plan = log_sinkhorn_normalize(logits, n_iters=rounds)
        row = np.abs(plan.sum(axis=1) - 1.0).max()
        col = np.abs(plan.sum(axis=0) - 1.0).max()
        print(f"  {rounds:3d} rounds: row dev {row:.2e}, col dev {col:.2e}")

    marginal = np.full(size, 1.0 / size)
    reference = solve(
        OtProblem(cost=-logits, mu=marginal, nu=marginal, epsilon=1.0),
        tol=1e-12, max_iters=200_000,
    )
    _, plan = log_sinkhorn_normalize(logits, n_iters=50)
    print(
        "\nagreement with the classical solver (same kernel, uniform marginals,"
        f" times L): {np.abs(plan - size * reference.plan).max():.2e}"
    )

    # exactness of the unrolled backward pass on f = sum(layer output)
    shape = (2, 4, 4)
    x = RngState(1, stream=2).normal(shape, dtype=np.float64)
    rng = RngState(2, stream=3)
    params = AttentionParams(
        wq=0.5 * rng.normal((2, 2), dtype=np.float64),
        wk=0.5 * rng.normal((2, 2), dtype=np.float64),
        wv=0.5 * rng.normal((2, 2), dtype=np.float64),
        bq=np.zeros(2), bk=np.zeros(2), bv=np.zeros(2),
    )
    y, tape = sinkhorn_attention(x, params, n_iters=4)
    dx, dparams = attention_backward(tape, np.ones_like(y))
    point = dict(params.as_dict())
    point["x"] = x
    analytic = dict(dparams.as_dict())
    analytic["x"] = dx

    def probe(p):
        par = AttentionParams(wq=p["wq"], wk=p["wk"], wv=p["wv"],
                              bq=p["bq"], bk=p["bk"], bv=p["bv"])
        out, _ = sinkhorn_attention(p["x"], par, n_iters=4)
        return float(out.sum())

    result = grad_check(probe, point, analytic, h=1e-3, tol=1e-4)
    print(f"\nbackward pass vs central finite differences: max rel err {result.max_rel_error:.2e}")


if __name__ == "__main__":
    main()
