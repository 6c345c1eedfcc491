"""Seed-noise finetuning: perturb a diffusion seed noise through
doubly-stochastic attention and a learnable information filter, trading
content preservation against sampling diversity."""

from .errors import (
    BadMagicError,
    ChecksumError,
    ConfigError,
    DegenerateInputError,
    DegenerateVarianceError,
    DomainError,
    FormatError,
    InstabilityError,
    NoftError,
    ParameterError,
    ShapeError,
    TruncatedFileError,
    VersionError,
)
from .tensor import RngState, gaussian_sample, mse, standardize
from .sinkhorn import OtProblem, TransportPlan, entropy, solve, transport_cost
from .attention import (
    AttentionParams,
    AttentionTape,
    attention_backward,
    attention_logits,
    log_sinkhorn_normalize,
    project_qkv,
    sinkhorn_attention,
)
from .bottleneck import FilterMap, compress, info_loss, lambda_of
from .model import (
    AdamMoments,
    NoftModel,
    TrainConfig,
    TrainReport,
    adam_step,
    apply,
    backward,
    forward,
    init_model,
    total_loss,
    train,
)
from .verify import (
    GradCheckReport,
    ToyGenerator,
    TradeoffReport,
    content_score,
    diversity_score,
    grad_check,
    make_toy_generator,
    model_loss_probe,
    preservation_trials,
    toy_generate,
    tradeoff_sweep,
)
from .io import (
    read_checkpoint,
    read_config,
    read_noise,
    write_checkpoint,
    write_noise,
)

__version__ = "0.1.0"
