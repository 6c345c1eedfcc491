"""A desk-scale training run.

Trains the full model on random noise pairs at (4, 16, 16) and prints the
loss trajectory and where the filter settles. A few hundred steps are
enough to see the shape of the run; raise --steps for the full picture.
Run with: python demos/train_desk_scale.py [--steps N] [--beta B]
"""

import argparse

from noft import TrainConfig, train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=600)
    parser.add_argument("--beta", type=float, default=0.01)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = TrainConfig(beta=args.beta, steps=args.steps, seed=args.seed)
    print(f"training {args.steps} steps at (4, 16, 16), beta {args.beta}, seed {args.seed}")
    result = train(config, shape=(4, 16, 16))

    stride = max(1, args.steps // 12)
    print(f"\n{'step':>6}  {'loss':>12}  {'l_noise':>12}  {'l_info':>12}  {'mean lam':>9}")
    for i in range(0, args.steps, stride):
        print(
            f"{i + 1:6d}  {result.loss[i]:12.6f}  {result.l_noise[i]:12.6f}  "
            f"{result.l_info[i]:12.6f}  {result.mean_lambda[i]:9.4f}"
        )
    last = args.steps - 1
    print(
        f"{last + 1:6d}  {result.loss[last]:12.6f}  {result.l_noise[last]:12.6f}  "
        f"{result.l_info[last]:12.6f}  {result.mean_lambda[last]:9.4f}"
    )

    window = min(100, args.steps // 4)
    first = result.loss[:window].mean()
    final = result.loss[-window:].mean()
    print(f"\nfirst {window}-step mean loss {first:.4f}, last {final:.4f} "
          f"({final / first:.1%} of the start)")
    print(f"model has {result.model.parameter_count} trainable parameters; "
          f"took {result.duration_s:.1f} s")


if __name__ == "__main__":
    main()
