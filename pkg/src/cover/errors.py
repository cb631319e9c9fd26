"""Exception types shared across the toolkit.

Every error raised by the library derives from CoverError so CLI code can
map library failures to exit code 1 in one place.
"""


class CoverError(Exception):
    """Base class for all library errors."""


class NonFinite(CoverError):
    """An input contained NaN or infinity where finite values are required."""


class UnsupportedKind(CoverError):
    """Corruption kind is not one of the supported families."""


class ImageTooSmall(CoverError):
    """Image is too small to fit even the minimum convolution kernel."""


class ZeroNorm(CoverError):
    """A vector with zero norm cannot be cosine-normalized."""


class MissingNegatives(CoverError):
    """Fusion score requested but no negative logits were provided."""


class NegativeLengthMismatch(CoverError):
    """Negative logit vector length does not match the expected count."""


class EmptyInput(CoverError):
    """An operation requiring non-empty score sets received an empty one."""


class EmptyBand(CoverError):
    """Confidence-band matching left one side with no records."""


class OutOfDomain(CoverError):
    """Argument outside the mathematical domain (e.g. quantile of p >= 1)."""


class NonPositiveSigma(CoverError):
    """A parameter update would make a standard deviation non-positive."""


class MalformedLine(CoverError):
    """An NDJSON line failed to parse; carries its 1-based line number."""

    def __init__(self, lineno: int, reason: str):
        self.lineno = lineno
        self.reason = reason
        super().__init__(f"line {lineno}: {reason}")


class InconsistentK(CoverError):
    """Logit vectors in one table do not share a single length K."""


class DuplicateKey(CoverError):
    """Two records share the same (sample_id, dim) key."""


class MissingDimension(CoverError):
    """A sample lacks a record for a dimension required by the dimension set."""


class TooFewClasses(CoverError):
    """Prototype fitting needs at least two class directories."""


class UndecodableImage(CoverError):
    """An image file exists but cannot be decoded."""


class ZeroFeature(CoverError):
    """Feature vector vanished after centering; cosine logits are undefined."""
