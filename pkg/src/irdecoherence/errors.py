"""Exception hierarchy shared by all modules."""


class ModelError(Exception):
    """Base class for every error raised by this package."""


class InadmissibleFormFactor(ModelError, ValueError):
    pass


class IRDivergent(ModelError, ArithmeticError):
    """An integral diverges at small frequency."""


class CutoffMissing(ModelError, ValueError):
    pass


class Indeterminate(ModelError):
    """A tabulated profile's small-frequency slope could not be estimated."""


class OscillationOverflow(ModelError, ValueError):
    pass


class GridMismatch(ModelError, ValueError):
    pass


class BetaNonPositive(ModelError, ValueError):
    pass


class Unbounded(ModelError):
    """The Hamiltonian is not bounded from below (supercritical coupling)."""


# oracle naming
Supercritical = Unbounded


class OnCut(ModelError, ValueError):
    pass


class EigenFailure(ModelError, ArithmeticError):
    pass


class IntervalsOverlap(ModelError, ValueError):
    pass


class WindowTooShort(ModelError, ValueError):
    pass


class ConfigInvalid(ModelError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericalFailure(ModelError):
    pass
