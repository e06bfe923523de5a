"""Exception hierarchy for spreduce."""


class SPReduceError(Exception):
    """Base class for all library errors."""


class NonConvergence(SPReduceError, ArithmeticError):
    pass


class SingularSylvester(SPReduceError, ArithmeticError):
    pass


class NotPositiveDefinite(SPReduceError, ValueError):
    pass


class ToleranceViolation(SPReduceError, ValueError):
    pass


class DimensionMismatch(SPReduceError, ValueError):
    pass


class NotStable(SPReduceError, ValueError):
    """The state matrix of a model is not Hurwitz."""

    def __init__(self, message, max_real_part=None):
        super().__init__(message)
        self.max_real_part = max_real_part


class UnstableErrorSystem(SPReduceError, ArithmeticError):
    pass


class HorizonTooShort(SPReduceError, ValueError):
    pass


class IndexOutOfRange(SPReduceError, IndexError):
    pass


class DuplicateIndex(SPReduceError, ValueError):
    pass


class SingularFastBlock(SPReduceError, ArithmeticError):
    """The eliminated block ``Q A Q^T`` is (numerically) singular."""


class NoReductionPossible(SPReduceError):
    pass


class RankDeficientOutput(SPReduceError, ValueError):
    pass


class AlignmentInfeasible(SPReduceError):
    pass


class StabilizationFailed(SPReduceError):
    pass


class ParseError(SPReduceError, ValueError):
    pass
