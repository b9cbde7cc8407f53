"""Exception types raised across the package."""


class MclError(Exception):
    """Base class for all package errors."""


class InvalidIndexSet(MclError, ValueError):
    pass


class NotUnitary(MclError, ValueError):
    pass


class InvalidFrame(MclError, ValueError):
    pass


class DegenerateHessian(MclError, ArithmeticError):
    pass


class NotInDomain(MclError, ValueError):
    """Point lies outside the domain of the symplectic reduction."""


class NotHyperbolic(MclError, ValueError):
    pass


class Blowup(MclError, ArithmeticError):
    pass


class NoConvergence(MclError, ArithmeticError):
    pass


class BoundViolation(MclError, AssertionError):
    pass


class OnStableManifold(MclError, ValueError):
    """Trajectory converges to the equilibrium and never exits the cube."""


class ExitsUpstream(MclError):
    """Forward trajectory leaves the cube through the inflow wall."""


class NumericalBreakdown(MclError, ArithmeticError):
    pass


class SlowConvergence(MclError, ArithmeticError):
    pass


class InvalidArity(MclError, ValueError):
    pass


class DegreeMismatch(MclError, ValueError):
    pass


class UnsupportedDimension(MclError, NotImplementedError):
    pass


class ConfigError(MclError, ValueError):
    pass


class IoError(MclError, OSError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)
