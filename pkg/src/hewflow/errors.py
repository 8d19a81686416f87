"""Exception taxonomy shared by all hewflow modules.

The CLI maps these onto process exit codes: validation problems exit 2,
cryptographic/parameter problems exit 3, resource exhaustion (modulus
depth, capacity) exits 4.
"""


class HewflowError(Exception):
    """Base class for all errors raised by hewflow."""

    exit_code = 1


class ValidationError(HewflowError):
    """Malformed input: bad config, bad CSV, bad model description, bad flags."""

    exit_code = 2


class CryptoError(HewflowError):
    """Cryptographic misuse: wrong domain, missing key, undecryptable state."""

    exit_code = 3


class ParamsMismatchError(CryptoError):
    """Objects created under different parameter sets were combined."""


class LevelMismatchError(CryptoError):
    """Binary operation attempted on operands at different modulus levels."""


class ScaleMismatchError(CryptoError):
    """Binary addition attempted on operands with incompatible scales."""


class SerializationError(CryptoError):
    """Blob failed structural validation (magic, version, hash, ranges)."""


class DepthOverflowError(HewflowError):
    """Circuit needs more modulus levels than the parameter set provides."""

    exit_code = 4


class ResourceError(HewflowError):
    """Resource limit hit (slot capacity, pod limits)."""

    exit_code = 4
