"""Shared exception types."""


class VoxcausalError(Exception):
    """Base class for package-specific failures."""


class MatrixFormatError(VoxcausalError):
    """Raised by the binary container codec.

    ``code`` is a stable machine-readable identifier:
    ``bad_magic``, ``bad_version``, ``truncated``, ``dim_overflow``,
    ``nonfinite``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ProtocolError(VoxcausalError):
    """A model client returned a response violating the wire contract."""


class ClientError(VoxcausalError):
    """A model client call failed fatally (including after retries)."""


class ConfigError(VoxcausalError):
    """Pipeline or CLI configuration is invalid."""
