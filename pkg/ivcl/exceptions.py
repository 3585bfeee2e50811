class IVCLError(Exception):
    """Root of the errors raised by the ivcl package"""


class ConfigurationError(IVCLError, ValueError):
    """A configuration value or combination of values is invalid."""


class DataError(IVCLError, ValueError):
    """Input data does not satisfy the expectations of an operation."""


class ContractViolationError(IVCLError):
    """A precondition of an operation was not met by the caller."""


class IntegrityError(IVCLError):
    """Persisted data is corrupted."""
