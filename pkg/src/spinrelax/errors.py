"""Exception and warning types raised by the solvers."""


class DegenerateParametersError(ValueError):
    """Physical parameters for which a rate or coefficient is undefined."""


class DegeneracyError(RuntimeError):
    """Nonzero coupling between exactly degenerate modes."""


class SolverError(RuntimeError):
    """A linear solve did not reach the requested residual."""

    def __init__(self, message, residual=None, condition_estimate=None):
        super().__init__(message)
        self.residual = residual
        self.condition_estimate = condition_estimate


class InsufficientHorizonError(RuntimeError):
    """The trace never crosses 1/e inside its time grid."""


class SweepRangeError(RuntimeError):
    """An extremum of the B_y response sits on the edge of the sweep grid."""


class PerturbationRegimeWarning(UserWarning):
    """The perturbation parameter is not small."""
