"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every failure raised by the library
should derive from :class:`JumptopoError`.
"""

from __future__ import annotations


class JumptopoError(Exception):
    """Base class for library errors."""


class ShapeError(JumptopoError, ValueError):
    """Operands have incompatible or invalid shapes."""


class NumericalInvariantError(JumptopoError):
    """A state or result violated a numerical invariant (trace, positivity, ...)."""


class SingularityError(JumptopoError):
    """Evaluation hit a dark-state singularity or a degenerate element."""


class EmptyEnsembleError(JumptopoError):
    """No trajectory contributed to a requested ensemble average."""


class ConfigError(JumptopoError, ValueError):
    """Invalid user-facing configuration."""


class TailMassWarning(UserWarning):
    """A truncated time integral left non-negligible conditioned weight behind."""
