"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
ProtocolError and its subclasses -> 3.
"""


class NovscoreError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(NovscoreError):
    """Bad invocation: invalid flags, unresolvable paths, invalid config."""


class DataError(NovscoreError):
    """Bad input data: empty corpus, duplicate ids, malformed files."""


class TokenizerError(NovscoreError):
    """Invalid vocabulary, token ids out of range, untrainable settings."""


class ModelError(NovscoreError):
    """Invalid n-gram model parameters, corrupt or mismatched model files."""


class FingerprintMismatchError(ModelError):
    """Token sequences come from a different vocabulary than the model's."""


class EmptyDocumentError(DataError):
    """Document has no scoreable tokens."""


class ProtocolError(NovscoreError):
    """Fatal backend protocol violation; the session is unusable."""


class BackendRequestError(ProtocolError):
    """Backend answered a request with a structured error record.

    Unlike a raw ProtocolError, the session stays usable.
    """
