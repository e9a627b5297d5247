"""Exception types shared across the package."""


class CyclicWaveError(Exception):
    """Base class for all package errors."""


class ParameterError(CyclicWaveError, ValueError):
    """A parameter violates a documented precondition."""


class IntegrationFailure(CyclicWaveError, RuntimeError):
    """Adaptive stepping failed; carries the time (and optionally lambda)."""

    def __init__(self, message, t=None, lam=None):
        super().__init__(message)
        self.t = t
        self.lam = lam


class QuadratureError(CyclicWaveError, RuntimeError):
    """Quadrature did not converge on some interval."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class SingularMetricError(CyclicWaveError, RuntimeError):
    """Metric is numerically singular; carries a condition estimate."""

    def __init__(self, message, cond=None, at=None):
        super().__init__(message)
        self.cond = cond
        self.at = at


class ResolutionError(CyclicWaveError, RuntimeError):
    """Sampling grid does not resolve the field (too much top-octave energy)."""


class ExhaustedSearchError(CyclicWaveError, RuntimeError):
    """A search ran out of candidates; carries the best value seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NotApplicableError(CyclicWaveError, RuntimeError):
    """The requested construction does not apply to these inputs."""


class EndpointProximityWarning(UserWarning):
    """Inverse-transform evaluation was clamped near a finite endpoint."""
