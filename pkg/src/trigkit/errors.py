"""Exception types shared across the toolkit.

The CLI maps these onto stable exit codes, so new error conditions should
reuse one of the classes below rather than raising bare ValueError.
"""


class TrigkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TrigkitError, ValueError):
    """A hyperparameter or flag value is out of its legal range."""


class ShapeError(TrigkitError, ValueError):
    """Tensor shapes violate an operation's contract."""


class NumericError(TrigkitError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class ValidationError(TrigkitError, ValueError):
    """Input data violates a documented invariant."""


class ParseError(ValidationError):
    """A corpus file could not be parsed; message carries the line number."""


class LengthError(ValidationError):
    """A sentence exceeds the model's maximum input length.

    Raised instead of truncating, which would silently drop gold triggers.
    """


class DivergenceError(TrigkitError, RuntimeError):
    """Training produced a non-finite loss; message carries epoch and batch."""


class CheckpointError(TrigkitError, ValueError):
    """A checkpoint file is unreadable or inconsistent with the given data."""


class AlignmentError(TrigkitError, ValueError):
    """Prediction and gold sentence ids do not line up."""
