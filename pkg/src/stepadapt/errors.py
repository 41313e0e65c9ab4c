"""Shared exception types."""


class DimensionError(ValueError):
    """Vector / partition length mismatch."""


class ConfigError(ValueError):
    """Invalid or out-of-range configuration value."""


class CapabilityError(RuntimeError):
    """An oracle capability (hvp, dense Hessian) is required but absent."""


class NumericError(RuntimeError):
    """Non-finite value or divergence, tagged with the step that produced it."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class RunAborted(RuntimeError):
    """A run hit a NumericError; partial records are retained on the exception."""

    def __init__(self, step, cause, records):
        self.step = step
        self.cause = cause
        self.records = records
        super().__init__(f"run aborted at step {step}: {cause}")
