"""Exception and warning types raised across the package."""


class DsParamError(Exception):
    """Base class for all errors raised by dsparam."""


class SingularMatrix(DsParamError):
    pass


class NoConvergence(DsParamError):
    pass


class NotOrthogonal(DsParamError):
    pass


class NotSkew(DsParamError):
    pass


class NotDoublyStochastic(DsParamError):
    pass


class LengthMismatch(DsParamError):
    pass


class ShapeMismatch(DsParamError):
    pass


class BadSimplex(DsParamError):
    pass


class FactorialOverflow(DsParamError):
    pass


class FactorSizeMismatch(DsParamError):
    pass


class NotRecoverable(DsParamError):
    """No sign gauge turns the elementwise square root into an orthogonal matrix."""


class NearPiBranchWarning(RuntimeWarning):
    """A rotation eigenvalue sits on the branch cut of the principal logarithm."""


class DegenerateEigenvalueWarning(RuntimeWarning):
    """Eigenvalue derivative is ill-defined; a finite-difference gradient was used."""


class NonFiniteLoss(DsParamError):
    """Training produced a NaN or infinite loss or gradient."""
