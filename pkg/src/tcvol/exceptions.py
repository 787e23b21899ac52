"""Exception types raised by the solvers."""


class DomainError(ValueError):
    """Input outside the admissible parameter region."""


class CollapsedBandError(DomainError):
    """Zero transaction cost: the no-trade band degenerates to the Merton ratio.

    Carries the frictionless quantities instead of a fake band.
    """

    def __init__(self, pi_merton, delta_max):
        self.pi_merton = pi_merton
        self.delta_max = delta_max
        super().__init__(
            f"collapsed band: lambda=0 has no free boundaries "
            f"(pi_M={pi_merton:.17g}, delta_max={delta_max:.17g})"
        )


class EigenvalueNotFoundError(RuntimeError):
    """No sign change of the boundary determinant was found on the bracket."""

    def __init__(self, message, profile=None):
        self.profile = profile
        super().__init__(message)


class ErgodicityError(ValueError):
    """The factor model has no normalizable invariant density."""


class DegenerateBoundaryError(ArithmeticError):
    """A boundary-correction denominator vanished."""


class UnsupportedCaseError(NotImplementedError):
    """Closed form unavailable for this root case; use the numeric path."""


class ConsistencyError(RuntimeError):
    """An internal solvability identity failed."""
