"""Exception hierarchy shared by all wellsplit modules."""


class WellsplitError(Exception):
    """Base class for every numerical or configuration failure."""


class ConfigError(WellsplitError):
    pass


class NumericalError(WellsplitError):
    """Raised when a computation cannot reach its stated tolerance."""


# potentials
class NonConvergence(NumericalError):
    pass


class DegenerateMinimum(NumericalError):
    pass


class EnergyAboveBarrier(NumericalError):
    pass


class EnergyNonPositive(NumericalError):
    pass


# dynamics
class BlowUp(NumericalError):
    pass


class StepFailure(NumericalError):
    pass


class NoHeteroclinic(NumericalError):
    pass


class IrregularArrival(NumericalError):
    pass


class NoLibration(NumericalError):
    def __init__(self, msg, energy=None):
        super().__init__(msg)
        self.energy = energy


class NonHyperbolic(NumericalError):
    pass


class NoCrossing(NumericalError):
    pass


# wkb
class RiccatiBlowup(NumericalError):
    pass


class TailNotConverged(NumericalError):
    pass


class NoPlateau(NumericalError):
    pass


class MultipleCrossings(NumericalError):
    pass


# modeltori
class ZeroTorus(NumericalError):
    pass


class InsideCaustic(NumericalError):
    pass


class NoInteriorMinimum(NumericalError):
    pass


class DegenerateCritical(NumericalError):
    pass


# spectral
class BoxTooSmall(NumericalError):
    pass


class WindowTooNarrow(NumericalError):
    pass


class LabelAmbiguity(NumericalError):
    pass


# formulas
class TurningPointDegeneracy(NumericalError):
    pass


class EnergyOutOfRegime(NumericalError):
    pass


class NoBracket(NumericalError):
    pass


class AssumptionViolated(NumericalError):
    pass


class CacheCorruption(WellsplitError):
    pass
