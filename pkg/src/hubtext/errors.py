"""Exception types shared across the toolkit."""


class HubTextError(Exception):
    """Base class for all toolkit errors."""


class ZeroNormError(HubTextError):
    """A vector's L2 norm is at or below the zero tolerance."""


class DimMismatchError(HubTextError):
    """Vectors of different dimensionality were combined."""


class DegenerateHubError(HubTextError):
    """The tuning set admits no meaningful hub (mean direction vanishes)."""


class NonFiniteError(HubTextError):
    """A computation produced NaN or infinity (e.g. a diverging ascent)."""


class ParseError(HubTextError):
    """A data file could not be parsed."""


class EmptySequenceError(HubTextError):
    """A token sequence with no tokens was passed where one is required."""


class EmptyFileError(HubTextError):
    """An input file contained no usable records."""


class TokenizationError(HubTextError):
    """A text contains tokens outside the active vocabulary (strict mode)."""


class InvalidBeamSizeError(HubTextError):
    """Beam size must be a positive integer."""


class TimeoutAbortError(HubTextError):
    """The search exceeded its iteration guard without converging."""


class WorkerFailureError(HubTextError):
    """A scoring worker failed twice on the same shard."""


class MissingRankingError(HubTextError):
    """A query has no ranking in a metrics computation."""


class LengthMismatchError(HubTextError):
    """Paired score lists differ in length."""


class ProtocolError(HubTextError):
    """The remote encoder sent a malformed or out-of-order response."""


class RemoteError(HubTextError):
    """The remote encoder reported an application-level error."""


class RemoteTimeoutError(HubTextError):
    """The remote encoder did not answer within the deadline."""
