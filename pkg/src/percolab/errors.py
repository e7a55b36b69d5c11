"""Exception hierarchy for :mod:`percolab`.

Every error raised on purpose by the library derives from
:class:`PercolabError`, so callers (and the CLI) can catch one base class.
"""

from __future__ import annotations

__all__ = [
    "CapacityError",
    "CompatibilityError",
    "ConvergenceError",
    "EmptyClusterError",
    "IllPosedError",
    "InternalError",
    "ParameterError",
    "PercolabError",
    "PreconditionError",
    "TopologyError",
]


class PercolabError(Exception):
    """Base exception for percolab errors."""

    pass


class ParameterError(PercolabError, ValueError):
    """Raised when an argument is outside its documented domain."""

    pass


class EmptyClusterError(PercolabError):
    """Raised when a sample has no open edge to build a cluster from."""

    pass


class IllPosedError(PercolabError):
    """Raised when a Dirichlet interior component never touches the boundary."""

    pass


class ConvergenceError(PercolabError):
    """Raised when an iterative solve exhausts its iteration budget.

    The ``residual`` attribute holds the relative residual reached and
    ``iterations`` the number of iterations spent.
    """

    def __init__(self, msg: str, residual: float, iterations: int = 0) -> None:
        """Initialize a convergence error.

        Args:
            msg: Error message.
            residual: Relative residual at the last iterate.
            iterations: Iterations performed.
        """
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


class CompatibilityError(PercolabError):
    """Raised when a Neumann right-hand side has nonzero mean on a component."""

    pass


class TopologyError(PercolabError):
    """Raised when a graph is disconnected or has no dissipation where needed."""

    pass


class CapacityError(PercolabError):
    """Raised when an exact computation exceeds its configured cap."""

    pass


class PreconditionError(PercolabError):
    """Raised when an input violates a checked precondition.

    The ``witness`` attribute holds the first offending vertex.
    """

    def __init__(self, msg: str, witness: tuple[int, ...] | None = None) -> None:
        """Initialize a precondition error.

        Args:
            msg: Error message.
            witness: First vertex (lexicographic) violating the precondition.
        """
        super().__init__(msg)
        self.witness = witness


class InternalError(PercolabError):
    """Raised when a guarded mathematical impossibility occurs."""

    pass
