"""Exception types shared across the package.

Every error raised on purpose by the library derives from :class:`DpqError`
so callers (and the command line driver) can tell validation problems apart
from genuine bugs.
"""

from __future__ import annotations

__all__ = [
    "DpqError",
    "OutOfRangeError",
    "ShapeMismatchError",
    "TooLargeError",
    "OutOfBoundsError",
    "DegenerateDenominatorError",
    "InsufficientDataError",
    "NonPositiveValueError",
    "PoorFitError",
    "DegenerateStateError",
    "NotFactorizableError",
    "UnsupportedParametersError",
    "OverlappingSupportError",
    "LatticeTooSmallError",
    "NoConvergenceError",
    "NotBlockDiagonalError",
    "RegionsOverlapError",
    "BadPartitionError",
    "GeometryInfeasibleError",
    "InvalidConfigError",
]


class DpqError(Exception):
    """Base class for all errors raised deliberately by this package."""


class OutOfRangeError(DpqError, ValueError):
    """A numeric parameter lies outside its documented domain."""


class ShapeMismatchError(DpqError, ValueError):
    """An array argument has the wrong shape for the given lattice."""


class TooLargeError(DpqError):
    """A requested exact computation exceeds the configured size cap."""


class OutOfBoundsError(DpqError, ValueError):
    """A site or separation falls outside the lattice."""


class DegenerateDenominatorError(DpqError):
    """A ratio estimator has a vanishing denominator."""


class InsufficientDataError(DpqError, ValueError):
    """Too few points for the requested fit."""


class NonPositiveValueError(DpqError, ValueError):
    """Log-space fitting requires strictly positive values."""


class PoorFitError(DpqError):
    """The requested model cannot describe the data (e.g. divergent scale)."""


class DegenerateStateError(DpqError):
    """A state decomposition is undefined (e.g. pure vacuum input)."""


class NotFactorizableError(DpqError):
    """A local tensor does not have the locked physical-leg structure."""


class UnsupportedParametersError(DpqError, ValueError):
    """Parameter values for which the construction is not defined."""


class OverlappingSupportError(DpqError, ValueError):
    """Operator supports expected to be disjoint are not."""


class LatticeTooSmallError(DpqError, ValueError):
    """The lattice is too small for the requested operator geometry."""


class NoConvergenceError(DpqError):
    """An iterative eigensolver failed to converge."""


class NotBlockDiagonalError(DpqError):
    """An operator expected to commute with a grading does not."""


class RegionsOverlapError(DpqError, ValueError):
    """Entanglement regions share a qubit."""


class BadPartitionError(DpqError, ValueError):
    """A bipartition does not cover the density matrix qubits."""


class GeometryInfeasibleError(DpqError, ValueError):
    """Regions of the requested widths and separations do not fit."""


class InvalidConfigError(DpqError, ValueError):
    """A run configuration contains an unknown or ill-typed key."""
