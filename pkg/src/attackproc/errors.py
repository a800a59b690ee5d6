"""Exception hierarchy shared by all analysis modules."""


class AnalysisError(Exception):
    """Base class for data errors raised by the library (CLI exit code 2)."""


class BadMagic(AnalysisError):
    pass


class CorruptHeader(AnalysisError):
    pass


class EmptySelection(AnalysisError):
    pass


class TooFewArrivals(AnalysisError):
    pass


class EmptyInput(AnalysisError):
    pass


class ZeroVariance(AnalysisError):
    pass


class ZeroMean(AnalysisError):
    pass


class TooShort(AnalysisError):
    pass


class NonPositiveGap(AnalysisError):
    pass


class TooFewExceedances(AnalysisError):
    pass


class NonConvergence(AnalysisError):
    pass


class AllDiverged(AnalysisError):
    pass


class ZeroDenominator(AnalysisError):
    pass


class EmbeddingFailure(AnalysisError):
    pass
