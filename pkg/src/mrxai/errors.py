"""Exception types raised across the toolkit."""


class MrxError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(MrxError):
    pass


class EmptyMask(MrxError):
    pass


class BothEmpty(MrxError):
    """Dice coefficient is 0/0 when both masks are empty."""


class InvalidHpe(MrxError):
    pass


class EmptyInput(MrxError):
    pass


class InvalidParams(MrxError):
    pass


class RectTooSmall(MrxError):
    pass


class NoExplanation(MrxError):
    """The classifier never returned the target label, so no passing mask exists."""


class SingularFit(MrxError):
    """Rank-deficient surrogate design matrix (reported, then ridge fallback)."""


class OracleUnavailable(MrxError):
    """External classifier endpoint is down or the connection broke."""


class ProtocolError(MrxError):
    """Malformed or error reply on the classifier wire protocol."""


class MissingFile(MrxError):
    pass


class BadMask(MrxError):
    pass


class BadCsv(MrxError):
    pass
