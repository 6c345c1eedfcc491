"""Command line: train, apply, sweep, gradcheck, ot-demo, inspect.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 numeric failure. All randomness comes from explicit seed flags or the
config file, never from the clock.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import io as nio
from .errors import (
    BadMagicError,
    ConfigError,
    DegenerateInputError,
    DomainError,
    FormatError,
    InstabilityError,
    NoftError,
    ParameterError,
    ShapeError,
)
from .model import TrainConfig, apply, train
from .sinkhorn import OtProblem, entropy, solve, transport_cost
from .verify import grad_check, model_loss_probe, tradeoff_sweep

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


def _parse_shape(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise _UsageError(f"cannot parse shape {text!r}; expected e.g. 4,16,16") from None


def _parse_betas(text: str) -> list[float]:
    betas = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            betas.append(float(token))
        except ValueError:
            raise _UsageError(f"cannot parse beta token {token!r}") from None
    if not betas:
        raise _UsageError("no beta values given")
    return betas


def build_parser() -> _Parser:
    parser = _Parser(prog="noft", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--shape", help="noise shape, e.g. 4,16,16 (generic mode)")
    p.add_argument("--mode", choices=("generic", "instance"))
    p.add_argument("--orig", help="source noise file (instance mode)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--report", help="per-step CSV report path")
    p.add_argument("--steps", type=int, help="override config steps")
    p.add_argument("--beta", type=float, help="override config beta")
    p.add_argument("--seed", type=int, help="override config seed")
    p.add_argument("--lr", type=float, help="override config learning rate")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("apply", help="produce finetuned noise from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--orig", required=True, help="source noise file")
    p.add_argument("--div-seed", type=int, required=True, help="diversity noise seed")
    p.add_argument("--out", required=True, help="output noise file")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("sweep", help="content/diversity tradeoff sweep")
    p.add_argument("--betas", required=True, help="comma-separated tradeoff weights")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--shape", default="4,16,16")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full loss")
    p.add_argument("--shape", default="2,4,4")
    p.add_argument("--n-iters", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ot-demo", help="solve the swap-cost transport instance")
    p.add_argument("--size", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.set_defaults(func=cmd_ot_demo)

    p = sub.add_parser("inspect", help="print header and stats of a noise or checkpoint file")
    p.add_argument("--file", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def cmd_train(args) -> int:
    config = nio.read_config(args.config) if args.config else TrainConfig()
    overrides = {}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.steps is not None:
        overrides["steps"] = args.steps
    if args.beta is not None:
        overrides["beta"] = args.beta
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if overrides:
        config = dataclasses.replace(config, **overrides)

    if config.mode == "instance":
        if not args.orig:
            raise _UsageError("instance mode requires --orig")
        n_orig = nio.read_noise(args.orig)
        report = train(config, n_orig_fixed=n_orig)
    else:
        if args.orig:
            raise _UsageError("--orig is only used in instance mode (--mode instance)")
        if not args.shape:
            raise _UsageError("generic mode requires --shape")
        report = train(config, shape=_parse_shape(args.shape))

    nio.write_checkpoint(args.out, report.model)
    if args.report:
        nio.write_train_report_csv(args.report, report)
    print(
        f"trained {report.steps} steps in {report.duration_s:.1f}s; "
        f"final loss {report.loss[-1]:.6e}, mean lambda {report.mean_lambda[-1]:.4f}; "
        f"checkpoint written to {args.out}"
    )
    return EXIT_OK


def cmd_apply(args) -> int:
    model = nio.read_checkpoint(args.checkpoint)
    n_orig = nio.read_noise(args.orig)
    model.require_shape(n_orig.shape)
    n_noft = apply(model, n_orig, args.div_seed)
    nio.write_noise(args.out, n_noft)
    print(f"wrote finetuned noise {n_noft.shape} to {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    betas = _parse_betas(args.betas)
    report = tradeoff_sweep(
        betas,
        shape=_parse_shape(args.shape),
        steps=args.steps,
        trials=args.trials,
        seed=args.seed,
    )
    nio.write_sweep_report(args.out, report)
    print(report.format_table())
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    probe, point, analytic = model_loss_probe(
        shape=_parse_shape(args.shape),
        n_iters=args.n_iters,
        beta=args.beta,
        seed=args.seed,
    )
    report = grad_check(probe, point, analytic, h=args.h, tol=args.tol)
    for name in sorted(report.per_param):
        print(f"{name:>14}: max rel err {report.per_param[name]:.3e}")
    print(f"worst: {report.worst[0]}[{report.worst[1]}] at {report.max_rel_error:.3e} (tol {report.tol:g})")
    if not report.passed:
        print("gradcheck FAILED", file=sys.stderr)
        return EXIT_NUMERIC
    print("gradcheck passed")
    return EXIT_OK


def cmd_ot_demo(args) -> int:
    n = args.size
    if n < 2:
        raise _UsageError("--size must be at least 2")
    cost = 1.0 - np.eye(n)
    marginal = np.full(n, 1.0 / n)
    problem = OtProblem(cost=cost, mu=marginal, nu=marginal, epsilon=args.epsilon)
    plan = solve(problem, tol=args.tol, max_iters=args.max_iters)
    print(f"swap-cost instance, size {n}, epsilon {args.epsilon:g}")
    print(f"converged in {plan.iterations_used} iterations, residual {plan.residual:.3e}")
    print("plan:")
    for row in plan.plan:
        print("  " + "  ".join(f"{x:.9f}" for x in row))
    print(f"entropy: {entropy(plan):.9f}")
    print(f"transport cost: {transport_cost(plan, cost):.9f}")
    return EXIT_OK


def _tensor_stats(t: np.ndarray) -> str:
    return (
        f"mean {t.mean():+.6f}, std {t.std():.6f}, "
        f"min {t.min():+.6f}, max {t.max():+.6f}"
    )


def cmd_inspect(args) -> int:
    with open(args.file, "rb") as handle:
        magic = handle.read(4)
    if magic == nio.NOISE_MAGIC:
        t = nio.read_noise(args.file)
        print(f"noise file, version {nio.FORMAT_VERSION}")
        print(f"shape: {t.shape} ({t.size} elements, float32)")
        print(_tensor_stats(t.astype(np.float64)))
    elif magic == nio.CHECKPOINT_MAGIC:
        model = nio.read_checkpoint(args.file)
        print(f"checkpoint file, version {nio.FORMAT_VERSION}")
        print(f"model shape: {model.shape}, n_iters {model.n_iters}, "
              f"restandardize {model.restandardize}")
        print(f"trainable parameters: {model.parameter_count}")
        for name, arr in model.parameters().items():
            print(f"  {name:>14} {str(arr.shape):>14}  {_tensor_stats(np.asarray(arr, dtype=np.float64))}")
    else:
        raise BadMagicError(f"unknown magic {magic!r}; not a noise or checkpoint file")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstabilityError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ConfigError, ShapeError, DomainError, ParameterError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NoftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
