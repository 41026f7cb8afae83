"""Exception hierarchy shared by all modules."""


class ReflPosError(Exception):
    """Base class for library errors."""


class ValidationError(ReflPosError, ValueError):
    """Input violates a documented precondition."""


class DiagonalSingularityError(ValidationError):
    """A diagonal-singular kernel was evaluated at coincident points."""


class BranchDomainError(ValidationError):
    """Argument leaves the region where the principal logarithm is used."""


class IntegrabilityError(ValidationError):
    """Kernel is not locally integrable for the requested exponent."""


class DomainError(ValidationError):
    """Point lies outside the carrier of the object it is passed to."""


class PoleError(ReflPosError, ArithmeticError):
    """Conformal action hits its pole (a + <b, x> = 0)."""


class ConstructionError(ReflPosError):
    """A Lorentz element fails the group constraint after construction."""


class SemigroupViolationError(ReflPosError):
    """A group element does not map the positive domain into itself."""


class ReflectionPositivityError(ReflPosError):
    """A positivity condition failed; carries the certifying witness.

    Parameters
    ----------
    message : str
        Human readable reason.
    witness : ndarray, optional
        Coefficient vector ``v`` with ``v^H A v < 0``.
    condition : str, optional
        Label of the failed condition (``"RP1"``, ``"RP2"``, ``"RP3"``,
        ``"ambient"``, ``"theta"``).
    value : float, optional
        The negative quadratic form value.
    """

    def __init__(self, message, witness=None, condition=None, value=None):
        super().__init__(message)
        self.witness = witness
        self.condition = condition
        self.value = value
