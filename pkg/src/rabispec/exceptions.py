"""Exception hierarchy shared by the solver modules."""


class RabiSpecError(Exception):
    """Base class for all errors raised by rabispec."""


# odecore
class IrregularFinitePoint(RabiSpecError):
    pass


class UnsupportedRank(RabiSpecError):
    pass


class NotIrregular(RabiSpecError):
    """Infinity is a regular point; ``data`` carries the (trivial) growth data."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


# heun
class ResonantWithoutBranch(RabiSpecError):
    pass


class Divergent(RabiSpecError):
    pass


class OutOfDisk(RabiSpecError):
    pass


class GapMismatch(RabiSpecError):
    pass


# rabi_eps
class DegenerateExponent(RabiSpecError):
    pass


class MuZero(RabiSpecError):
    pass


# rabi_nl
class SingularY(RabiSpecError):
    pass


class ResonantStep(RabiSpecError):
    pass


class IntegerX(RabiSpecError):
    pass


class UnsupportedRegime(RabiSpecError):
    pass


# spectral
class NoEvaluations(RabiSpecError):
    pass


# fockoracle
class ConvergenceFailure(RabiSpecError):
    pass
