"""Exception types raised across the package.

Each numerical-failure class maps to exit code 2 on the command line, and
validation failures map to exit code 1.
"""


class FresnelError(Exception):
    """Base class for all package errors."""


class ValidationError(FresnelError, ValueError):
    """Bad user input: malformed materials, configs or parameters."""


class NumericalFailure(FresnelError, ArithmeticError):
    """An identity or convergence check failed; indicates a bug or a bad regime."""


class NotFullyAnisotropic(ValidationError):
    pass


class OutOfChart(ValidationError):
    pass


class SingularGradient(NumericalFailure):
    pass


class NoAdmissibleAxis(NumericalFailure):
    pass


class DegenerateHessian(NumericalFailure):
    pass


class BracketFailure(NumericalFailure):
    def __init__(self, message, largest_radius=None):
        super().__init__(message)
        self.largest_radius = largest_radius


class IdentityViolation(NumericalFailure):
    pass


class ResidualViolation(NumericalFailure):
    pass


class LevelTooFar(ValidationError):
    pass


class MeshFailure(NumericalFailure):
    pass


class InvalidBand(ValidationError):
    pass


class SupportViolation(ValidationError):
    pass


class BandViolation(ValidationError):
    pass


class QuadratureStall(NumericalFailure):
    pass
