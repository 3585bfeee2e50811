from ..exceptions import ConfigurationError, DataError, IntegrityError, IVCLError


class ToyWorldError(IVCLError):
    """Generic error of the toy-world simulators"""


class UnsatisfiableQuestionError(ToyWorldError):
    """No episode with the requested question type was found within the allowed retries."""


class InfeasibleSplitError(ToyWorldError, ConfigurationError):
    """The attribute grid cannot be partitioned as requested."""


class TraceError(ToyWorldError, DataError):
    """A symbolic trace is malformed or describes an impossible event."""


class OracleError(ToyWorldError, DataError):
    """The symbolic evidence is contradictory or disagrees with a stored label."""


class DatasetFormatError(ToyWorldError, IntegrityError):
    """A dataset file has an unknown magic number, version or layout."""
