import enum


class LogLevel(enum.Enum):
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    DEBUG = "DEBUG"


class QuantizerScheme(str, enum.Enum):
    IDENTITY = "identity"
    DITHER = "dither"
    SPARSIFY = "sparsify"
    BLOCK_DITHER = "block_dither"


class ProblemKind(str, enum.Enum):
    LOGISTIC = "logistic"
    QUADRATIC = "quadratic"


class RegularizerKind(str, enum.Enum):
    NONE = "none"
    L1 = "l1"
    L2 = "l2"


class MethodName(str, enum.Enum):
    DIANA = "diana"
    VR_DIANA = "vr_diana"
    SVRG_DIANA = "svrg_diana"


class DianaOracle(str, enum.Enum):
    FULL_GRAD = "full_grad"
    UNIFORM1 = "uniform1"


class VrVariant(str, enum.Enum):
    LSVRG = "lsvrg"
    SAGA = "saga"


class Regime(str, enum.Enum):
    STRONGLY_CONVEX = "strongly_convex"
    CONVEX = "convex"
    NONCONVEX = "nonconvex"


class VrCoefficientForm(str, enum.Enum):
    PROOF = "proof"
    STATEMENT = "statement"


class ShiftInit(str, enum.Enum):
    ZERO = "zero"
    GRADIENT = "gradient"


class StreamPurpose(enum.IntEnum):
    SAMPLE = 1
    QUANTIZE = 2
    COIN = 3
    PARTITION = 4
    SYNTH = 5
    PROBE = 6
    ESTIMATE = 7
