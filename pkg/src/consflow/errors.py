"""Exception types raised across the library, one per contract violation."""


class ConsflowError(Exception):
    """Base class for all library errors."""


class AsymmetricNeighbors(ConsflowError):
    """Neighbor lists are not symmetric (j lists i but i does not list j)."""


class IndexOutOfRange(ConsflowError):
    """An agent index falls outside [1..m]."""


class DimensionMismatch(ConsflowError):
    """A vector's length does not match the expected dimension."""


class BNotInImage(ConsflowError):
    """Constraint right-hand side b is not in the image of A."""


class Infeasible(ConsflowError):
    """The stacked constraint system A x = b has no solution."""


class MultiplierFailure(ConsflowError):
    """The Lagrange-multiplier system could not be solved to tolerance."""


class NoDescent(ConsflowError):
    """Line search failed to find a descent step."""


class MaxIters(ConsflowError):
    """Iteration limit reached before convergence."""


class StepUnderflow(ConsflowError):
    """Adaptive integrator step fell below the configured minimum."""

    def __init__(self, t: float, err_norm: float, h: float):
        self.t = t
        self.err_norm = err_norm
        self.h = h
        super().__init__(
            f"step size underflow at t={t:.6g} (h={h:.3g}, scaled error {err_norm:.3g})"
        )


class InsufficientSamples(ConsflowError):
    """Too few samples fall inside the requested fit window."""


class GenerationFailed(ConsflowError):
    """Random instance generation exhausted its retry budget."""


class EmptyKernelWarning(UserWarning):
    """The intersection of the constraint kernels is trivial."""
