"""Exception and warning classes raised by moorepp."""


class PlacementError(ValueError):
    """Base class for all moorepp errors."""


class DimensionMismatch(PlacementError):
    pass


class RankDeficientB(PlacementError):
    pass


class NotSelfConjugate(PlacementError):
    pass


class MultiplicityOverflow(PlacementError):
    pass


class ConjugacyViolation(PlacementError):
    pass


class RankDeficientX(PlacementError):
    """The eigenvector matrix built from a parameter matrix is singular.

    The candidate is unusable; draw another parameter matrix.
    """


class SingularX(PlacementError):
    pass


class Infeasible(PlacementError):
    """No parameter matrix produced a usable candidate.

    Carries the feasibility diagnostics in ``details`` when available.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details


class BudgetExhaustedNoCandidate(PlacementError):
    pass


class MissingCase(PlacementError):
    pass


class MalformedFile(PlacementError):
    pass


class NonPositiveValue(PlacementError):
    pass


class NumericalRankAmbiguity(RuntimeWarning):
    """Singular values sit within a factor of 10 of the rank threshold."""
