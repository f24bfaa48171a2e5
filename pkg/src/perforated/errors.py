"""Exception hierarchy shared by all modules."""


class PerforatedError(Exception):
    """Base class. ``module`` names the component that raised."""

    module = "perforated"


class DomainError(PerforatedError, ValueError):
    module = "domain"


class EmptyDomain(DomainError):
    pass


class UnresolvedHole(DomainError):
    pass


class OverlappingHoles(DomainError):
    pass


class HoleOutsideDomain(DomainError):
    pass


class NumericalError(PerforatedError, ArithmeticError):
    module = "numerics"


class DimensionMismatch(PerforatedError, ValueError):
    module = "sparsekit"


class MaxIterations(NumericalError):
    module = "sparsekit"


class NotFinite(NumericalError):
    pass


class NotConnected(NumericalError):
    module = "eigen"


class DegenerateStart(NumericalError):
    module = "eigen"


class ResolutionMismatch(PerforatedError, ValueError):
    module = "eigen"


class InvalidEps(PerforatedError, ValueError):
    module = "capacity"


class ZeroShiftDivisor(NumericalError):
    module = "stability"


class NonPositiveDt(PerforatedError, ValueError):
    module = "rng"
