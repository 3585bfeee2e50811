from ..exceptions import ContractViolationError, IVCLError


class AutodiffError(IVCLError):
    """Generic error of the tensor engine"""


class DimensionError(AutodiffError, ValueError):
    """Operand shapes are incompatible."""


class EmbeddingIndexError(AutodiffError, IndexError):
    """An id lies outside of the embedding table."""


class NotScalarError(AutodiffError, ContractViolationError):
    """Backward was requested from a tensor that is not a scalar."""


class NotOnTapeError(AutodiffError, ContractViolationError):
    """Backward was requested from a tensor the active tape did not record."""


class NonFiniteGradientError(AutodiffError, ArithmeticError):
    """A gradient holds NaN or infinite values; the optimizer step is aborted."""


class NonFiniteLossError(AutodiffError, ArithmeticError):
    """A training step produced a NaN or infinite loss."""
