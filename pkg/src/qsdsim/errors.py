"""Exception types shared across the simulation pipeline.

Each class carries a short machine-readable ``category`` string which the
command line front end echoes on failure, so scripted callers can branch on
it without parsing prose.
"""

from __future__ import annotations


class QsdError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class DimensionError(QsdError):
    """Invalid or mismatched truncation dimension."""

    category = "dimension"


class HermiticityError(QsdError):
    """An operator required to be hermitian is not."""

    category = "hermiticity"


class ExpressionError(QsdError):
    """Operator expression failed to tokenize, parse, or evaluate."""

    category = "expression"

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            message = f"{message} (column {position + 1})"
        super().__init__(message)
        self.position = position

    def __reduce__(self):
        return (type(self), (str(self), None))


class InvalidStepError(QsdError):
    """A step size or step request that makes no sense (dt <= 0 etc.)."""

    category = "invalid-step"


class BlowupError(QsdError):
    """Trajectory amplitude exceeded the blowup threshold before renormalization."""

    category = "blowup"

    def __init__(self, message: str, t: float, trajectory_index: int | None = None):
        super().__init__(message)
        self.t = t
        self.trajectory_index = trajectory_index

    def __reduce__(self):
        return (type(self), (str(self), self.t, self.trajectory_index))


class LeakError(QsdError):
    """Truncation leak crossed the abort threshold; the basis is too small."""

    category = "truncation-leak"

    def __init__(self, message: str, t: float, leak: float):
        super().__init__(message)
        self.t = t
        self.leak = leak

    def __reduce__(self):
        return (type(self), (str(self), self.t, self.leak))


class IntegratorStepError(QsdError):
    """The deterministic integrator produced a state violating its invariants."""

    category = "integrator-step-too-large"


class ConfigError(QsdError):
    """Configuration document rejected."""

    category = "config"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column

    def __reduce__(self):
        return (type(self), (str(self), None, None))
