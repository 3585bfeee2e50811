from .exceptions import (
    AutodiffError,
    DimensionError,
    EmbeddingIndexError,
    NonFiniteGradientError,
    NonFiniteLossError,
    NotOnTapeError,
    NotScalarError,
)
from .gradcheck import GradCheckResult, check_gradients
from .optim import OptimizerKind, OptimizerState, StepOutcome, minimize_step, optimizer_step
from .tensor import GradTape, ParamTable, Tensor, active_tape, float64_mode, get_dtype

__all__ = [
    "AutodiffError",
    "DimensionError",
    "EmbeddingIndexError",
    "GradCheckResult",
    "GradTape",
    "NonFiniteGradientError",
    "NonFiniteLossError",
    "NotOnTapeError",
    "NotScalarError",
    "OptimizerKind",
    "OptimizerState",
    "ParamTable",
    "StepOutcome",
    "Tensor",
    "active_tape",
    "check_gradients",
    "float64_mode",
    "get_dtype",
    "minimize_step",
    "optimizer_step",
]
