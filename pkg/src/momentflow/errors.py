"""Typed exceptions shared across the package."""

from __future__ import annotations


class MomentflowError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(MomentflowError, ValueError):
    """Raised when matrix data violates a structural invariant.

    Examples include non-anti-Hermitian blocks passed to a Lie algebra
    element constructor, shape mismatches against a descriptor, tangent
    vectors that are not orthogonal to their base point, or group
    elements that are numerically singular.
    """


class DomainError(MomentflowError, ValueError):
    """Raised when a scalar function is evaluated outside its domain."""


class ConvergenceError(MomentflowError, RuntimeError):
    """Raised when an iterative solver exhausts its budget.

    Carries ``iterations`` and ``residual`` attributes when available.
    """

    def __init__(self, message: str, iterations: int | None = None,
                 residual: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class RankDeficientError(ConvergenceError):
    """Raised when a Newton Jacobian loses rank (non-isolated solution)."""


class EmptyStabilizerError(MomentflowError, ValueError):
    """Raised when an operation requires a nontrivial stabilizer."""


class CriticalityError(MomentflowError, ValueError):
    """Raised when a point fails the critical-point precondition."""


class TransportError(MomentflowError, RuntimeError):
    """Raised when extremal-field transport cannot be certified."""


class ConfigError(MomentflowError, ValueError):
    """Raised for malformed CLI configuration files."""
