"""Exception types raised by the control and simulation layers."""


class BLFError(Exception):
    """Base class for all library errors."""


class NotSkewSymmetric(BLFError, ValueError):
    """Matrix handed to ``vee`` is not skew-symmetric within tolerance."""


class NonOrthonormalInput(BLFError, ValueError):
    """A rotation matrix failed the orthonormality guard."""


class ConstraintBoundaryReached(BLFError, ValueError):
    """An error coordinate reached or crossed its barrier bound.

    Attributes
    ----------
    family : str
        Name of the constrained channel (e.g. ``"z_p"`` or ``"z_2q"``).
    index : int
        Offending coordinate, -1 when unknown.
    """

    def __init__(self, msg, family="z", index=-1):
        super().__init__(msg)
        self.family = family
        self.index = index


class SingularInertia(BLFError, ValueError):
    """Inertia matrix is singular or badly conditioned."""


class ZeroThrustDirection(BLFError, ValueError):
    """Commanded force vector is too small to define a thrust axis."""


class DegenerateThrustDirection(BLFError, ValueError):
    """Flatness construction of the desired attitude degenerates."""


class NonPositiveMass(BLFError, ValueError):
    """A payload event would leave the vehicle with mass <= 0."""


class InvalidUncertaintyBound(BLFError, ValueError):
    """Relative uncertainty bound outside [0, 1)."""


class NumericFailure(BLFError, ArithmeticError):
    """Non-finite value produced during integration."""


class InfeasibleInitialCondition(BLFError, ValueError):
    """Initial tracking error lies outside the constraint set."""


class ConfigError(BLFError, ValueError):
    """Invalid configuration document or override."""
