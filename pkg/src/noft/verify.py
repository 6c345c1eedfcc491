"""Desk-scale verification: finite-difference gradient checking, a frozen
linear stand-in generator, and content/diversity scoring for tradeoff sweeps.

The stand-in generator replaces a real denoiser so the content-diversity
behaviour of trained models can be measured in seconds: content is cosine
similarity between generated vectors, diversity is the normalized mean
pairwise distance across diversity-noise redraws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .bottleneck import FilterMap
from .attention import AttentionParams
from .errors import ConfigError, DegenerateInputError, DomainError, ShapeError
from .model import (
    NoftModel,
    TrainConfig,
    backward,
    forward,
    losses_from_tape,
    train,
)
from .tensor import RngState, gaussian_sample, validate_noise_shape

# Stream ids for the harness, disjoint from the trainer's.
_GEN_STREAM = 100
_PROBE_STREAM = 200
_ORIG_EVAL_STREAM = 300
_TRIAL_STREAM_BASE = 1_000


@dataclass(frozen=True)
class ToyGenerator:
    """Frozen random linear map from flattened noise to an output vector.

    Linearity keeps the content/diversity scores analyzable; the optional
    squash probes robustness to a mild fixed nonlinearity.
    """

    weight: np.ndarray          # (out_dim, noise_size), immutable
    seed: int
    squash: bool = False

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64)
        w.setflags(write=False)
        object.__setattr__(self, "weight", w)

    @property
    def noise_size(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


def make_toy_generator(noise_shape, out_dim: int = 192, seed: int = 0, squash: bool = False) -> ToyGenerator:
    shape = validate_noise_shape(noise_shape)
    size = int(np.prod(shape))
    rng = RngState(seed, stream=_GEN_STREAM)
    weight = rng.normal((out_dim, size), dtype=np.float64) / np.sqrt(size)
    return ToyGenerator(weight=weight, seed=seed, squash=squash)


def toy_generate(gen: ToyGenerator, noise) -> np.ndarray:
    """Deterministic generator output for one noise tensor (no bias term)."""
    flat = np.asarray(noise, dtype=np.float64).reshape(-1)
    if flat.shape[0] != gen.noise_size:
        raise ShapeError(
            f"generator expects {gen.noise_size} noise elements, got {flat.shape[0]}"
        )
    out = gen.weight @ flat
    return np.tanh(out) if gen.squash else out


def content_score(img_a, img_b) -> float:
    """Cosine similarity between two generated vectors, in [-1, 1]."""
    a = np.asarray(img_a, dtype=np.float64).reshape(-1)
    b = np.asarray(img_b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"content_score lengths differ: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise DegenerateInputError("content_score needs nonzero-norm inputs")
    return float(a @ b / (na * nb))


def diversity_score(samples) -> float:
    """Mean pairwise Euclidean distance, normalized by the mean sample norm."""
    vectors = [np.asarray(s, dtype=np.float64).reshape(-1) for s in samples]
    if len(vectors) < 2:
        raise ConfigError("diversity_score needs at least 2 samples")
    length = vectors[0].shape[0]
    if any(v.shape[0] != length for v in vectors):
        raise ShapeError("diversity_score samples must share one length")
    dists = [
        np.linalg.norm(vectors[i] - vectors[j])
        for i in range(len(vectors))
        for j in range(i + 1, len(vectors))
    ]
    mean_dist = float(np.mean(dists))
    if mean_dist == 0.0:
        return 0.0
    mean_norm = float(np.mean([np.linalg.norm(v) for v in vectors]))
    if mean_norm < 1e-12:
        raise DegenerateInputError("diversity_score inputs have vanishing norm")
    return mean_dist / mean_norm


@dataclass(frozen=True)
class GradCheckReport:
    """Worst-case relative disagreement between analytic and numeric gradients."""

    max_rel_error: float
    worst: tuple[str, int]            # (parameter name, flat index)
    per_param: dict[str, float]
    h: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def grad_check(
    probe: Callable[[Mapping[str, np.ndarray]], float],
    point: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    h: float = 1e-3,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Central finite differences against a supplied analytic gradient.

    The probe must be a deterministic scalar function of the point. The
    relative error denominator is max(1, |analytic coordinate|).
    """
    if not h > 0:
        raise ConfigError(f"h must be positive, got {h}")
    worst = ("", -1)
    worst_err = 0.0
    per_param: dict[str, float] = {}
    work = {name: np.array(arr, dtype=np.float64) for name, arr in point.items()}
    for name, arr in work.items():
        an = np.asarray(analytic[name], dtype=np.float64)
        if an.shape != arr.shape:
            raise ShapeError(f"analytic gradient for {name} has shape {an.shape}, expected {arr.shape}")
        param_worst = 0.0
        flat = arr.reshape(-1)
        an_flat = an.reshape(-1)
        for idx in range(flat.shape[0]):
            saved = flat[idx]
            flat[idx] = saved + h
            f_plus = float(probe(work))
            flat[idx] = saved - h
            f_minus = float(probe(work))
            flat[idx] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise DomainError(f"probe returned a non-finite value near {name}[{idx}]")
            fd = (f_plus - f_minus) / (2.0 * h)
            rel = abs(fd - an_flat[idx]) / max(1.0, abs(an_flat[idx]))
            if rel > param_worst:
                param_worst = rel
            if rel > worst_err:
                worst_err = rel
                worst = (name, idx)
        per_param[name] = param_worst
    return GradCheckReport(max_rel_error=worst_err, worst=worst, per_param=per_param, h=h, tol=tol)


def model_loss_probe(shape=(2, 4, 4), n_iters: int = 3, beta: float = 0.1, seed: int = 0):
    """Build (probe, point, analytic) for the full training loss at a random
    model and noise pair; the point includes the source noise so the input
    gradient is checked alongside every parameter."""
    shape = validate_noise_shape(shape)
    c = shape[0]
    rng = RngState(seed, stream=_PROBE_STREAM)
    point = {
        "wq": 0.4 * rng.normal((c, c), dtype=np.float64),
        "wk": 0.4 * rng.normal((c, c), dtype=np.float64),
        "wv": 0.4 * rng.normal((c, c), dtype=np.float64),
        "bq": 0.1 * rng.normal((c,), dtype=np.float64),
        "bk": 0.1 * rng.normal((c,), dtype=np.float64),
        "bv": 0.1 * rng.normal((c,), dtype=np.float64),
        "filter_logits": 0.8 * rng.normal(shape, dtype=np.float64),
        "n_orig": rng.normal(shape, dtype=np.float64),
    }
    n_div = rng.normal(shape, dtype=np.float64)

    def build(p):
        attention = AttentionParams(
            wq=p["wq"], wk=p["wk"], wv=p["wv"], bq=p["bq"], bk=p["bk"], bv=p["bv"]
        )
        return NoftModel(
            attention=attention,
            filter=FilterMap(p["filter_logits"]),
            shape=shape,
            n_iters=n_iters,
            restandardize=True,
        )

    def probe(p):
        model = build(p)
        _, tape = forward(model, p["n_orig"], n_div)
        return losses_from_tape(tape, beta)[0]

    model = build(point)
    _, tape = forward(model, point["n_orig"], n_div)
    grads = backward(model, tape, beta)
    analytic = {name: grads[name] for name in point}
    return probe, point, analytic


@dataclass(frozen=True)
class TradeoffRow:
    beta: float
    mean_lambda: float
    content: float
    diversity: float | None
    l_noise: float
    l_info: float


@dataclass(frozen=True)
class TradeoffReport:
    """One row per tradeoff weight, plus the sweep settings."""

    rows: tuple[TradeoffRow, ...]
    shape: tuple[int, ...]
    steps: int
    trials: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "steps": self.steps,
            "trials": self.trials,
            "seed": self.seed,
            "rows": [
                {
                    "beta": r.beta,
                    "mean_lambda": r.mean_lambda,
                    "content": r.content,
                    "diversity": r.diversity,
                    "l_noise": r.l_noise,
                    "l_info": r.l_info,
                }
                for r in self.rows
            ],
        }

    def format_table(self) -> str:
        header = f"{'beta':>8}  {'mean_lambda':>12}  {'content':>10}  {'diversity':>10}  {'l_noise':>12}  {'l_info':>12}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            div = f"{r.diversity:10.6f}" if r.diversity is not None else f"{'n/a':>10}"
            lines.append(
                f"{r.beta:8.4g}  {r.mean_lambda:12.6f}  {r.content:10.6f}  {div}  "
                f"{r.l_noise:12.6e}  {r.l_info:12.6e}"
            )
        return "\n".join(lines)


def _trial_div_noise(shape, seed: int, trial: int) -> np.ndarray:
    # Every trial owns its own stream, so results are schedule independent.
    return gaussian_sample(shape, RngState(seed, stream=_TRIAL_STREAM_BASE + trial))


def tradeoff_sweep(
    betas,
    shape=(4, 16, 16),
    steps: int = 2_000,
    trials: int = 100,
    seed: int = 0,
    learning_rate: float = 2e-3,
    n_iters: int = 5,
    out_dim: int = 192,
    squash: bool = False,
) -> TradeoffReport:
    """Train one instance-mode model per beta and score it through the
    stand-in generator; all betas share the same source noise and generator."""
    betas = [float(b) for b in betas]
    if not betas:
        raise ConfigError("tradeoff_sweep needs at least one beta")
    shape = validate_noise_shape(shape)
    gen = make_toy_generator(shape, out_dim=out_dim, seed=seed, squash=squash)
    n_orig = gaussian_sample(shape, RngState(seed, stream=_ORIG_EVAL_STREAM))
    base_img = toy_generate(gen, n_orig)

    rows = []
    for beta in betas:
        config = TrainConfig(
            beta=beta,
            learning_rate=learning_rate,
            steps=steps,
            seed=seed,
            mode="instance",
            n_iters=n_iters,
        )
        report = train(config, n_orig_fixed=n_orig)
        model = report.model
        images = []
        scores = []
        for t in range(trials):
            n_div = _trial_div_noise(shape, seed, t)
            n_noft, _ = forward(model, n_orig, n_div)
            img = toy_generate(gen, n_noft)
            images.append(img)
            scores.append(content_score(img, base_img))
        rows.append(
            TradeoffRow(
                beta=beta,
                mean_lambda=float(report.mean_lambda[-1]),
                content=float(np.mean(scores)),
                diversity=diversity_score(images) if trials >= 2 else None,
                l_noise=float(report.l_noise[-1]),
                l_info=float(report.l_info[-1]),
            )
        )
    return TradeoffReport(rows=tuple(rows), shape=shape, steps=steps, trials=trials, seed=seed)


def preservation_trials(model: NoftModel, gen: ToyGenerator, n_orig, trials: int = 100, seed: int = 0) -> int:
    """Count trials where the finetuned noise beats the raw diversity noise
    at reproducing the source content through the generator."""
    base_img = toy_generate(gen, n_orig)
    wins = 0
    for t in range(trials):
        n_div = _trial_div_noise(model.shape, seed, t)
        n_noft, _ = forward(model, n_orig, n_div)
        s_noft = content_score(toy_generate(gen, n_noft), base_img)
        s_div = content_score(toy_generate(gen, n_div), base_img)
        if s_noft > s_div:
            wins += 1
    return wins
