"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called with inputs that violate its contract."""


class DefectiveKernelError(RuntimeError):
    """A generator matrix is not diagonalizable within tolerance.

    Merged (defective) eigenvalue structures produce polynomial-in-time
    propagator corrections that this package detects but does not model.
    """


class RunawayError(RuntimeError):
    """A generator has a mode with positive growth rate, so no late-time
    limit exists."""
