"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Inputs have incompatible or invalid shapes."""


class DomainError(ValueError):
    """Scalar argument outside the admissible domain of a dual activation."""


class DegeneratePriorError(ValueError):
    """Prior produces a zero self-correlation at some coordinate."""


class SingularKernelError(RuntimeError):
    """Kernel system is singular; a trace-scaled ridge usually fixes this."""


class SolverDivergenceError(RuntimeError):
    """Iterative solver residual is growing; reduce the kernel scale."""


class KernelFormatError(ValueError):
    """Kernel file is malformed or has an unsupported layout."""
