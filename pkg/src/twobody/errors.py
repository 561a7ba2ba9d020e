"""Exception types shared across the package."""


class TwoBodyError(Exception):
    """Base class for all package errors."""


class DimensionError(TwoBodyError, ValueError):
    pass


class ArgumentError(TwoBodyError, ValueError):
    pass


class ContractError(TwoBodyError, RuntimeError):
    pass


class EvaluationError(TwoBodyError, FloatingPointError):
    pass


class ConfigError(TwoBodyError, ValueError):
    pass


class IngestionError(TwoBodyError, ValueError):
    pass


class CheckpointError(TwoBodyError, ValueError):
    pass


class DivergenceError(TwoBodyError, FloatingPointError):
    """Raised when training produces a non-finite loss or gradient.

    ``step`` is the zero-based optimizer step at which it happened and
    ``curve`` holds the losses recorded before it.
    """

    def __init__(self, step, message="non-finite value", curve=None):
        super().__init__(f"divergence at step {step}: {message}")
        self.step = step
        self.curve = list(curve or [])
