"""Exception hierarchy shared by all modules."""


class MixDualError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MixDualError, ValueError):
    pass


class LengthMismatch(MixDualError, ValueError):
    pass


class GridMismatch(MixDualError, ValueError):
    pass


class ExprError(MixDualError):
    pass


class ExprSyntaxError(ExprError, SyntaxError):
    """Parse failure; ``position`` is the 0-based character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(ExprError, NameError):
    pass


class IndexOutOfRange(ExprError, IndexError):
    pass


class EvalError(ExprError, ArithmeticError):
    pass


class SpecError(MixDualError, ValueError):
    """Malformed problem definition."""


class NonSquare(MixDualError, ValueError):
    pass


class InvalidPartition(MixDualError, ValueError):
    pass


class WrongBoundaryKind(MixDualError, ValueError):
    pass


class NotStatic(MixDualError, ValueError):
    pass


class InfeasibleInput(MixDualError, ValueError):
    pass


class SolverError(MixDualError, RuntimeError):
    pass


class MaxIterExceeded(SolverError):
    pass


class InfeasibleStart(SolverError):
    pass


class RecoveryFailed(MixDualError, RuntimeError):
    pass


class NotEfficient(MixDualError, ValueError):
    pass
