"""Exception hierarchy shared by the solver modules."""


class L1ControlError(Exception):
    """Base class for all errors raised by this package."""


class NoFreeNodesError(L1ControlError):
    """The mesh has no interior vertices, so there are no degrees of freedom."""


class DimensionError(L1ControlError, ValueError):
    pass


class ConvergenceError(L1ControlError):
    """An iterative method exhausted its iteration budget."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class BreakdownError(L1ControlError):
    """CG met p.Ap <= 0; the operator is not positive definite."""


class EllipticityError(L1ControlError, ValueError):
    pass


class MeshError(L1ControlError, ValueError):
    pass
