"""Exception types shared across the toolkit."""


class DimensionMismatchError(ValueError):
    """A vector or matrix does not match the dimension declared by the model."""

    def __init__(self, what: str, expected, actual):
        super().__init__(f"{what}: expected dimension {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class IntegrationBlowupError(RuntimeError):
    """An integrator stage produced a non-finite value."""

    def __init__(self, stage: int, value):
        super().__init__(f"non-finite state in RK4 stage {stage}")
        self.stage = stage
        self.value = value


class ObserverDivergenceError(RuntimeError):
    """The state predictor produced a non-finite value."""


class SchedulingError(RuntimeError):
    """An estimator update was requested off the sampling grid."""


class BoundComputationError(RuntimeError):
    """Model callbacks returned non-finite values while computing the error bound."""


class SolverFailedError(RuntimeError):
    """The QP solver could not produce a reliable solution."""


class EpisodeAbortError(RuntimeError):
    """An episode was aborted mid-run; carries step diagnostics."""

    def __init__(self, message: str, step: int | None = None, diagnostics: dict | None = None):
        super().__init__(message)
        self.step = step
        self.diagnostics = diagnostics or {}


class BridgeTimeoutError(RuntimeError):
    """The external policy did not reply within the deadline."""


class BridgeProtocolError(RuntimeError):
    """The external policy sent a malformed reply."""


class ConfigError(ValueError):
    """Experiment configuration failed validation; the message names the field."""
