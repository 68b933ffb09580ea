# AIDEV-NOTE: Exception hierarchy shared by every havokarc module.
# Library code raises these; only scenario_cli turns them into exit statuses.
# Each error keeps keyword context (scenario id, offending values) the same way
# a failed task reports msg plus the fields that explain it.

from __future__ import annotations

from typing import Any


class HavokArcError(Exception):
    """Base class for all havokarc errors."""

    exit_code: int = 1

    def __init__(self, msg: str, **context: Any) -> None:
        self.msg = msg
        self.context = context
        super().__init__(msg)

    def __str__(self) -> str:
        if not self.context:
            return self.msg
        details = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
        return f"{self.msg} ({details})"


class ConfigError(HavokArcError):
    """A scenario file, manifest or CLI option could not be parsed or validated."""

    exit_code = 2


class SimulationError(HavokArcError):
    """Waveform generation failed."""

    exit_code = 3


class InvalidParameterError(SimulationError):
    """Arc, feeder or scenario parameters violate their invariants."""


class NoCrossingError(SimulationError):
    """The fault voltage never reaches the requested OFFSET level."""


class DivergingProfileError(SimulationError):
    """The running ln R_arc exponent grew past the configured cap."""


class AnalysisError(HavokArcError):
    """Decomposition or detection of a trace failed."""

    exit_code = 4


class TraceTooShortError(AnalysisError):
    """Not enough samples for the requested embedding or stencil."""


class DecompositionError(AnalysisError):
    """The SVD failed or produced non-finite factors."""


class RankDeficientError(AnalysisError):
    """The regression matrix of the forced linear model is ill-conditioned."""

    def __init__(self, msg: str, condition: float, **context: Any) -> None:
        self.condition = condition
        super().__init__(msg, condition=condition, **context)


class BaselineWindowError(AnalysisError):
    """The forcing series holds no samples inside the baseline window."""
