"""Exception hierarchy shared by every module."""


class AVCError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AVCError, ValueError):
    """An argument violates a documented precondition."""


class ValidationError(InvalidArgumentError):
    """A probability object failed its construction invariants."""


class InfeasibleMarginalError(AVCError):
    """A Z-marginal is not the image of any state distribution."""


class InfeasibleTypeError(InfeasibleMarginalError):
    """An observation type is too far from every feasible Z-marginal."""


class CapacityLimitError(AVCError):
    """A size guard (alphabet, tensor cells, grid points, codewords) was exceeded."""
