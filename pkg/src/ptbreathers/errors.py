"""Exception types raised across the package."""


class DomainError(ValueError):
    """Parameters or arguments lie outside the region where an operation is defined."""


class EndpointError(DomainError):
    """Requested point sits exactly on an excluded branch endpoint."""


class BrokenSymmetryError(DomainError):
    """The linear spectrum leaves the imaginary axis (PT symmetry is broken)."""


class DimensionError(ValueError):
    pass


class SingularityError(ArithmeticError):
    """A matrix or closed form is singular at the requested point."""


class DivergenceError(RuntimeError):
    """An iterative solve or time integration failed to converge / blew up."""

    def __init__(self, message, *, residual=None, time=None):
        super().__init__(message)
        self.residual = residual
        self.time = time


class PreconditionError(ValueError):
    pass
