"""Entropic optimal transport basics.

Solves small transport problems with the classical scaling iteration and
shows how the regularization strength trades plan sharpness against
entropy. Run with: python demos/ot_basics.py
"""

import numpy as np

from noft import OtProblem, entropy, solve, transport_cost


def show(title, plan):
    print(f"\n{title}")
    print(f"  iterations: {plan.iterations_used}, row residual: {plan.residual:.2e}")
    for row in plan.plan:
        print("   " + "  ".join(f"{x:.6f}" for x in row))


def main():
    uniform = np.array([0.5, 0.5])

    print("zero cost: nothing distinguishes any assignment, so the plan is uniform")
    plan = solve(OtProblem(cost=np.zeros((2, 2)), mu=uniform, nu=uniform, epsilon=1.0))
    show("uniform-cost plan", plan)

    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    print("\nswap cost: staying in place is free, swapping costs 1")
    for eps in (0.1, 1.0, 10.0):
        plan = solve(OtProblem(cost=swap, mu=uniform, nu=uniform, epsilon=eps), tol=1e-12)
        show(f"epsilon = {eps}", plan)
        print(f"   entropy {entropy(plan):.6f}, transport cost {transport_cost(plan, swap):.6f}")
    print("\nlarger epsilon -> higher entropy, more mass off the cheap diagonal")

    print("\npinned marginals (1,0)/(1,0): the feasible set is a single point")
    plan = solve(OtProblem(cost=swap, mu=[1.0, 0.0], nu=[1.0, 0.0], epsilon=1.0))
    show("pinned plan", plan)


if __name__ == "__main__":
    main()
