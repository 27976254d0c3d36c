"""Exception hierarchy with stable, scriptable error codes."""


class KifaError(Exception):
    """Base class; every subclass carries a stable string code."""

    code = "E_KIFA"

    def __init__(self, message=""):
        super().__init__(message or self.code)


class MalformedRow(KifaError):
    code = "E_MALFORMED_ROW"


class NonFiniteValue(KifaError):
    code = "E_NON_FINITE"


class TooShort(KifaError):
    code = "E_TOO_SHORT"


class DegenerateScale(KifaError):
    code = "E_DEGENERATE_SCALE"


class InsufficientSamples(KifaError):
    code = "E_INSUFFICIENT_SAMPLES"


class IoFailure(KifaError):
    code = "E_IO_FAILURE"


class ShapeMismatch(KifaError):
    code = "E_SHAPE_MISMATCH"


class NonFiniteLoss(KifaError):
    code = "E_NON_FINITE_LOSS"


class EmptyClass(KifaError):
    code = "E_EMPTY_CLASS"


class InvalidAttention(KifaError):
    code = "E_INVALID_ATTENTION"


class ZeroTemporalEntropy(KifaError):
    code = "E_ZERO_TEMPORAL_ENTROPY"


class ColdStart(KifaError):
    code = "E_COLD_START"


class UndefinedCategory(KifaError):
    code = "E_UNDEFINED_CATEGORY"


class DegenerateTraining(KifaError):
    code = "E_DEGENERATE_TRAINING"


class DegenerateData(KifaError):
    code = "E_DEGENERATE_DATA"
