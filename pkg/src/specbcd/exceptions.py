"""Exception types raised by the numerical kernels."""


class NumericError(RuntimeError):
    """A numerical subroutine failed (non-convergence, singular factor, ...)."""


class LicqError(NumericError):
    """Constraint gradients are linearly dependent where independence is required.

    ``indices`` holds the constraint indices implicated in the dependency.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)
