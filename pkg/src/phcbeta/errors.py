"""Exception types shared across the toolkit.

Every failure mode callers are expected to distinguish gets its own class;
everything derives from PhcBetaError so service and CLI layers can map the
whole family to structured error responses.
"""


class PhcBetaError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(PhcBetaError, ValueError):
    """A parameter violates its documented precondition."""


class OutOfDomainError(PhcBetaError, ValueError):
    """A query point lies outside the modeled domain."""


class BandSolveError(PhcBetaError, RuntimeError):
    """The eigensolver failed; carries the offending k point."""

    def __init__(self, message: str, k: float | None = None, size: int | None = None):
        super().__init__(message)
        self.k = k
        self.size = size


class NoGuidedModeError(PhcBetaError, RuntimeError):
    """No core-localized band found inside the gap window."""


class CalibrationError(PhcBetaError, RuntimeError):
    """Effective-index calibration could not bracket or reach the target."""


class DegenerateInputError(PhcBetaError, ValueError):
    """Input data carries no usable signal (e.g. an all-zero histogram)."""


class ConvergenceError(PhcBetaError, RuntimeError):
    """An iterative fit failed to converge; carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class OrderingError(PhcBetaError, ValueError):
    """Rate arguments violate their required ordering."""


class InsufficientDetuningError(PhcBetaError, ValueError):
    """A rate series has no usable points on the required detuning side."""


class SpanError(PhcBetaError, ValueError):
    """A rate series does not span both detuning signs."""


class RankDeficiencyError(PhcBetaError, ValueError):
    """Too few distinct samples to determine the fit."""


class NoCrossingError(PhcBetaError, ValueError):
    """Two tuning curves do not intersect inside their shared domain."""


class AbsenceError(PhcBetaError, ValueError):
    """A requested model component is absent from the fit."""


class ExtrapolationWarning(UserWarning):
    """A curve was evaluated outside its fitted domain."""
