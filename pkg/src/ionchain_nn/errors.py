"""Exception hierarchy shared by every module of the package."""


class IonChainError(Exception):
    """Base class for all errors raised by ionchain_nn."""


class ConfigError(IonChainError, ValueError):
    """Invalid experiment configuration (unknown key, bad type, bad value)."""


class NumericalError(IonChainError):
    """A numerical routine could not produce a result satisfying its contract."""


# chain mechanics
class DegenerateInput(NumericalError, ValueError):
    pass


class InvalidOddChain(NumericalError, ValueError):
    pass


class NonConvergence(NumericalError):
    pass


class IndefiniteHessian(NumericalError):
    pass


class SingularCurvature(NumericalError):
    pass


# couplings / dynamics
class LengthMismatch(NumericalError, ValueError):
    pass


class ZeroFrequencyMode(NumericalError, ValueError):
    pass


class AmbiguousSign(NumericalError):
    pass


class TooLarge(NumericalError, ValueError):
    pass


# quantum gates
class InvalidParams(NumericalError, ValueError):
    pass


class InvalidDimension(NumericalError, ValueError):
    pass


class DegenerateLevelCrossing(NumericalError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class StepSizeUnderflow(NumericalError):
    pass


class AccuracyNotMet(NumericalError):
    pass
