"""The composite noise-finetune generator and its trainer.

Forward pipeline: add the doubly-stochastic attention output back onto the
source noise, standardize, blend against diversity noise through the
information filter, and (by default) restandardize so the output matches
the unit-variance prior a denoiser expects. The loss is

    loss = beta * info_loss + mse(output, source)

with beta the content-diversity tradeoff weight. Gradients are exact
(manual reverse mode through every stage, standardization Jacobians
included) and parameters are updated with bias-corrected Adam.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .attention import AttentionParams, AttentionTape, attention_backward, sinkhorn_attention
from .bottleneck import FilterMap, FilterTape, bottleneck_backward, compress, info_loss, lambda_with_grad
from .errors import ConfigError, ParameterError, ShapeError
from .tensor import RngState, StdTape, gaussian_sample, mse, standardize_backward, standardize_with_grad, validate_noise_shape

MODES = ("generic", "instance")
DIV_POLICIES = ("resample_each_step", "fixed")

# Stream ids carving independent Philox streams out of one seed.
_INIT_STREAM = 10
_ORIG_STREAM = 11
_DIV_STREAM = 12


@dataclass
class NoftModel:
    """Trainable state bound to one noise shape."""

    attention: AttentionParams
    filter: FilterMap
    shape: tuple[int, ...]
    n_iters: int = 5
    restandardize: bool = True

    def __post_init__(self):
        self.shape = validate_noise_shape(self.shape)
        if self.filter.shape != self.shape:
            raise ShapeError(
                f"filter shape {self.filter.shape} does not match model shape {self.shape}"
            )
        if self.attention.channels != self.shape[0]:
            raise ShapeError(
                f"attention channels {self.attention.channels} do not match shape {self.shape}"
            )
        if self.n_iters < 1:
            raise ParameterError(f"n_iters must be at least 1, got {self.n_iters}")

    @property
    def parameter_count(self) -> int:
        return self.attention.n_parameters + self.filter.logits.size

    def parameters(self) -> dict[str, np.ndarray]:
        d = self.attention.as_dict()
        d["filter_logits"] = self.filter.logits
        return d

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        a = self.attention
        a.wq, a.wk, a.wv = params["wq"], params["wk"], params["wv"]
        a.bq, a.bk, a.bv = params["bq"], params["bk"], params["bv"]
        self.filter.logits = params["filter_logits"]

    def require_shape(self, shape) -> None:
        if tuple(shape) != self.shape:
            raise ShapeError(
                f"model is bound to shape {self.shape}, got noise of shape {tuple(shape)}"
            )


def init_model(
    shape,
    seed: int = 0,
    n_iters: int = 5,
    restandardize: bool = True,
    filter_logit_init: float = 0.0,
) -> NoftModel:
    """Fresh model: small random Q/K kernels, zero V kernel and biases,
    constant filter logits (0.0 starts the blend at an even split)."""
    shape = validate_noise_shape(shape)
    c = shape[0]
    rng = RngState(seed, stream=_INIT_STREAM)
    w_scale = 1.0 / np.sqrt(c)
    attention = AttentionParams(
        wq=w_scale * rng.normal((c, c), dtype=np.float64),
        wk=w_scale * rng.normal((c, c), dtype=np.float64),
        wv=np.zeros((c, c)),
        bq=np.zeros(c),
        bk=np.zeros(c),
        bv=np.zeros(c),
    )
    logits = np.full(shape, float(filter_logit_init), dtype=np.float64)
    return NoftModel(
        attention=attention,
        filter=FilterMap(logits),
        shape=shape,
        n_iters=n_iters,
        restandardize=restandardize,
    )


@dataclass(frozen=True)
class TrainConfig:
    """Run settings; defaults follow the reference training protocol
    (Adam at 2e-3, 20k steps, batch 1, beta 0.01)."""

    beta: float = 0.01
    learning_rate: float = 2e-3
    steps: int = 20_000
    seed: int = 0
    mode: str = "generic"
    div_policy: str | None = None   # derived from mode when None
    batch: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    n_iters: int = 5
    restandardize: bool = True
    filter_logit_init: float = 0.0

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError(f"beta must be nonnegative, got {self.beta}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.steps < 1:
            raise ConfigError(f"steps must be at least 1, got {self.steps}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.div_policy is not None and self.div_policy not in DIV_POLICIES:
            raise ConfigError(
                f"div_policy must be one of {DIV_POLICIES}, got {self.div_policy!r}"
            )
        if self.batch != 1:
            raise ConfigError("only batch size 1 is supported")
        if self.n_iters < 1:
            raise ConfigError(f"n_iters must be at least 1, got {self.n_iters}")

    def resolved_div_policy(self) -> str:
        if self.div_policy is not None:
            return self.div_policy
        return "fixed" if self.mode == "instance" else "resample_each_step"


@dataclass
class ForwardTape:
    """Everything the backward pass needs from one forward evaluation."""

    x: np.ndarray           # source noise, float64
    eps: np.ndarray         # diversity noise, float64
    att_tape: AttentionTape
    pre_std: StdTape
    r: np.ndarray
    lam: np.ndarray
    lam_tape: FilterTape
    out_std: StdTape | None
    n_noft: np.ndarray


def forward(model: NoftModel, n_orig, n_div):
    """Run the generator; returns (n_noft, tape)."""
    n_orig = np.asarray(n_orig)
    n_div = np.asarray(n_div)
    model.require_shape(n_orig.shape)
    model.require_shape(n_div.shape)
    x = n_orig.astype(np.float64)
    eps = n_div.astype(np.float64)

    y_att, att_tape = sinkhorn_attention(x, model.attention, model.n_iters)
    r, pre_std = standardize_with_grad(x + y_att)
    lam, lam_tape = lambda_with_grad(model.filter)
    z = compress(r, eps, lam)
    if model.restandardize:
        n_noft, out_std = standardize_with_grad(z)
    else:
        n_noft, out_std = z, None

    tape = ForwardTape(
        x=x, eps=eps, att_tape=att_tape, pre_std=pre_std,
        r=r, lam=lam, lam_tape=lam_tape, out_std=out_std, n_noft=n_noft,
    )
    return n_noft, tape


def losses_from_tape(tape: ForwardTape, beta: float):
    """(total, l_noise, l_info) for an existing forward tape."""
    l_noise = mse(tape.n_noft, tape.x)
    l_info = info_loss(tape.lam, tape.r)
    return beta * l_info + l_noise, l_noise, l_info


def total_loss(model: NoftModel, n_orig, n_div, beta: float):
    """Forward plus loss evaluation; returns (total, l_noise, l_info)."""
    _, tape = forward(model, n_orig, n_div)
    return losses_from_tape(tape, beta)


def backward(model: NoftModel, tape: ForwardTape, beta: float) -> dict[str, np.ndarray]:
    """Exact gradients of the total loss.

    Returns a dict with every trainable parameter plus the input gradients
    under the keys "n_orig" and "n_div".
    """
    if tape.x.shape != model.shape:
        raise ShapeError(
            f"tape was produced for shape {tape.x.shape}, model expects {model.shape}"
        )
    n = tape.x.size
    d_out = 2.0 * (tape.n_noft - tape.x) / n
    d_x_direct = -d_out        # the reconstruction target is the input itself

    d_z = standardize_backward(tape.out_std, d_out) if tape.out_std is not None else d_out
    d_r, d_logits = bottleneck_backward(tape.lam_tape, tape.r, tape.eps, d_z, beta)
    d_pre = standardize_backward(tape.pre_std, d_r)
    d_x_att, d_att = attention_backward(tape.att_tape, d_pre)

    grads = d_att.as_dict()
    grads["filter_logits"] = d_logits
    grads["n_orig"] = d_pre + d_x_att + d_x_direct   # residual path + attention path + mse target
    grads["n_div"] = d_z * (1.0 - tape.lam)
    return grads


@dataclass
class AdamMoments:
    """First and second moment accumulators, one slot per parameter."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros(cls, params: dict[str, np.ndarray]) -> "AdamMoments":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    moments: AdamMoments,
    config: TrainConfig,
    step_index: int,
):
    """One bias-corrected Adam update; returns (new_params, new_moments)."""
    if step_index < 1:
        raise ParameterError(f"step_index must be at least 1, got {step_index}")
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    lr = config.learning_rate
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        m = b1 * moments.m[name] + (1.0 - b1) * g
        v = b2 * moments.v[name] + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**step_index)
        v_hat = v / (1.0 - b2**step_index)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamMoments(m=new_m, v=new_v)


@dataclass
class TrainReport:
    """Per-step loss records plus the trained model."""

    loss: np.ndarray
    l_noise: np.ndarray
    l_info: np.ndarray
    mean_lambda: np.ndarray
    model: NoftModel
    config: TrainConfig
    duration_s: float

    @property
    def steps(self) -> int:
        return self.loss.shape[0]


def train(config: TrainConfig, shape=None, n_orig_fixed=None) -> TrainReport:
    """Run the training loop; deterministic for a given config.

    Generic mode draws a fresh source noise each step; instance mode
    finetunes against the supplied n_orig_fixed. The diversity noise is
    redrawn each step or frozen once, per config.div_policy (resampled in
    generic mode, fixed in instance mode, unless overridden).
    """
    if config.mode == "instance":
        if n_orig_fixed is None:
            raise ConfigError("instance mode requires n_orig_fixed")
        n_orig_fixed = np.asarray(n_orig_fixed)
        if shape is not None and tuple(shape) != n_orig_fixed.shape:
            raise ConfigError(
                f"shape {tuple(shape)} contradicts n_orig_fixed shape {n_orig_fixed.shape}"
            )
        shape = validate_noise_shape(n_orig_fixed.shape)
    else:
        if n_orig_fixed is not None:
            raise ConfigError("generic mode draws its own source noise; drop n_orig_fixed")
        if shape is None:
            raise ConfigError("generic mode requires an explicit shape")
        shape = validate_noise_shape(shape)

    policy = config.resolved_div_policy()
    model = init_model(
        shape,
        seed=config.seed,
        n_iters=config.n_iters,
        restandardize=config.restandardize,
        filter_logit_init=config.filter_logit_init,
    )
    params = model.parameters()
    moments = AdamMoments.zeros(params)

    rng_orig = RngState(config.seed, stream=_ORIG_STREAM)
    rng_div = RngState(config.seed, stream=_DIV_STREAM)
    fixed_div = gaussian_sample(shape, rng_div) if policy == "fixed" else None

    loss_hist = np.empty(config.steps)
    noise_hist = np.empty(config.steps)
    info_hist = np.empty(config.steps)
    lam_hist = np.empty(config.steps)

    start = time.perf_counter()
    for step in range(1, config.steps + 1):
        n_orig = n_orig_fixed if config.mode == "instance" else gaussian_sample(shape, rng_orig)
        n_div = fixed_div if fixed_div is not None else gaussian_sample(shape, rng_div)

        model.set_parameters(params)
        _, tape = forward(model, n_orig, n_div)
        loss, l_noise, l_info = losses_from_tape(tape, config.beta)
        grads = backward(model, tape, config.beta)
        params, moments = adam_step(
            params, {k: grads[k] for k in params}, moments, config, step
        )

        i = step - 1
        loss_hist[i] = loss
        noise_hist[i] = l_noise
        info_hist[i] = l_info
        lam_hist[i] = tape.lam.mean()
    model.set_parameters(params)

    return TrainReport(
        loss=loss_hist,
        l_noise=noise_hist,
        l_info=info_hist,
        mean_lambda=lam_hist,
        model=model,
        config=config,
        duration_s=time.perf_counter() - start,
    )


def apply(model: NoftModel, n_orig, div_seed: int) -> np.ndarray:
    """One forward pass with diversity noise drawn from div_seed; float32 output."""
    rng = RngState(div_seed)
    n_div = gaussian_sample(model.shape, rng)
    n_noft, _ = forward(model, n_orig, n_div)
    return n_noft.astype(np.float32)
