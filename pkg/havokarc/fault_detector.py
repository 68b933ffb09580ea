"""Forcing-signal classifier and latency measurement.

A deviation is the first forcing sample whose magnitude leaves the quiescent
envelope learned on the baseline window. The burst after it is scored and
placed on the forcing band scale.

The forcing coordinate of a fitted model is unit-norm, so the height of a
burst reflects the shape of a transient rather than its size. Two
scale-free features decide the band instead:

- recurrence: the largest forcing sample among delay windows lying wholly
  inside the event, over the burst peak. A burning arc re-distorts every
  half-cycle and keeps the forcing active; a step change leaves one burst.
- severity: the relative RMS change of the feeder-head current across the
  event, supplied by the caller.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from havokarc.common import (
    ARC_KINDS,
    EXPECTED_VERDICTS,
    VERDICT_ARC,
    VERDICT_INCONCLUSIVE,
    VERDICT_NO_EVENT,
    VERDICT_NON_ARCING,
    VERDICT_OTHER,
)
from havokarc.errors import AnalysisError, BaselineWindowError, ConfigError
from havokarc.havok_core import ForcingSeries
from havokarc.report import format_number

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    ARC_FAULT = VERDICT_ARC
    OTHER_FAULT = VERDICT_OTHER
    NON_ARCING = VERDICT_NON_ARCING
    INCONCLUSIVE = VERDICT_INCONCLUSIVE
    NO_EVENT = VERDICT_NO_EVENT

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class DetectionThresholds:
    """Forcing bands, the deviation rule and the burst scoring.

    recurrence_min separates recurrent bursts from single ones. other_severity
    is the relative current change at which a single burst counts as a fault.
    deviation_floor is the smallest envelope, in forcing units.
    """

    nonarc_max: float = 0.045
    arc_min: float = 0.06
    arc_max: float = 0.18
    other_min: float = 0.2
    baseline_window: tuple[float, float] = (0.0, 0.15)
    deviation_factor: float = 5.0
    deviation_floor: float = 1e-4
    recurrence_min: float = 0.01
    other_severity: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.nonarc_max < self.arc_min < self.arc_max < self.other_min:
            raise ConfigError(
                "threshold edges must satisfy 0 < nonarc_max < arc_min < arc_max < other_min",
                edges=self.edges,
            )
        start, stop = self.baseline_window
        if not start <= stop:
            raise ConfigError(
                "baseline window must be ordered", baseline_window=self.baseline_window
            )
        if self.deviation_factor <= 0:
            raise ConfigError(
                "deviation_factor must be positive", deviation_factor=self.deviation_factor
            )
        if self.deviation_floor < 0:
            raise ConfigError(
                "deviation_floor must not be negative", deviation_floor=self.deviation_floor
            )
        if not 0 < self.recurrence_min < 1:
            raise ConfigError(
                "recurrence_min must lie in (0, 1)", recurrence_min=self.recurrence_min
            )
        if self.other_severity <= 0:
            raise ConfigError(
                "other_severity must be positive", other_severity=self.other_severity
            )

    @property
    def edges(self) -> tuple[float, float, float, float]:
        return (self.nonarc_max, self.arc_min, self.arc_max, self.other_min)

    def scaled(self, k: float) -> DetectionThresholds:
        """Same rule with the band edges and the envelope floor multiplied by k."""
        if k <= 0:
            raise ConfigError("threshold scale must be positive", k=k)
        nonarc_max, arc_min, arc_max, other_min = (edge * k for edge in self.edges)
        return replace(
            self,
            nonarc_max=nonarc_max,
            arc_min=arc_min,
            arc_max=arc_max,
            other_min=other_min,
            deviation_floor=self.deviation_floor * k,
        )

    @classmethod
    def from_edges(cls, edges: Sequence[float], **kwargs: Any) -> DetectionThresholds:
        """Build from four ascending band edges, e.g. parsed from 'a,b,c,d'."""
        if len(edges) != 4:
            raise ConfigError("exactly four threshold edges are required", edges=list(edges))
        return cls(*(float(e) for e in edges), **kwargs)


@dataclass(frozen=True)
class DetectionReport:
    scenario: str
    verdict: Verdict
    peak_forcing: float | None = None
    deviation_time: float | None = None
    latency: float | None = None  # s
    fault_start: float | None = None
    kind: str | None = None
    forcing_level: float | None = None  # on the band scale
    recurrence: float | None = None
    severity: float | None = None
    location: str | None = None

    @property
    def latency_ms(self) -> float | None:
        return None if self.latency is None else self.latency * 1e3

    def to_record(self) -> str:
        """Single-line key=value record."""

        def cell(value: Any) -> str:
            return "none" if value is None else format_number(value)

        return (
            f"scenario={self.scenario} verdict={self.verdict} "
            f"peak={cell(self.peak_forcing)} "
            f"level={cell(self.forcing_level)} "
            f"deviation_time_s={cell(self.deviation_time)} "
            f"latency_ms={cell(self.latency_ms)} "
            f"location={self.location or 'none'}"
        )


def find_deviation(
    series: ForcingSeries, thresholds: DetectionThresholds | None = None
) -> float | None:
    """Timestamp of the first |v_r| sample above the baseline envelope.

    The envelope is max(deviation_factor * baseline RMS, deviation_floor).
    """
    thresholds = thresholds or DetectionThresholds()
    times = np.asarray(series.times, dtype=np.float64)
    magnitude = np.abs(np.asarray(series.values, dtype=np.float64))
    start, stop = thresholds.baseline_window
    baseline = (times >= start) & (times <= stop)
    if not np.any(baseline):
        raise BaselineWindowError(
            "forcing series has no samples in the baseline window",
            baseline_window=thresholds.baseline_window,
        )
    baseline_rms = float(np.sqrt(np.mean(magnitude[baseline] ** 2)))
    level = max(thresholds.deviation_factor * baseline_rms, thresholds.deviation_floor)
    above = np.flatnonzero(magnitude > level)
    if above.size == 0:
        return None
    return float(times[above[0]])


def band_verdict(peak: float, thresholds: DetectionThresholds | None = None) -> Verdict:
    """Map a forcing level onto its band; the gaps between bands are Inconclusive."""
    thresholds = thresholds or DetectionThresholds()
    if not math.isfinite(peak):
        raise AnalysisError("forcing peak must be finite", peak=peak)
    magnitude = abs(peak)
    if thresholds.arc_min <= magnitude <= thresholds.arc_max:
        return Verdict.ARC_FAULT
    if magnitude > thresholds.other_min:
        return Verdict.OTHER_FAULT
    if magnitude < thresholds.nonarc_max:
        return Verdict.NON_ARCING
    return Verdict.INCONCLUSIVE


def sustained_forcing(
    series: ForcingSeries, start: float, stop: float | None = None
) -> float | None:
    """Largest |v_r| among delay windows lying wholly inside (start, stop).

    Each stamp stands for the window of series.span seconds ending at it
    ("end" alignment) or starting at it ("start"). None when no window fits.
    """
    times = np.asarray(series.times, dtype=np.float64)
    magnitude = np.abs(np.asarray(series.values, dtype=np.float64))
    if series.alignment == "start":
        first, last = times, times + series.span
    else:
        first, last = times - series.span, times
    inside = first > start
    if stop is not None:
        inside &= last < stop
    if not np.any(inside):
        return None
    return float(np.max(magnitude[inside]))


def forcing_level(
    peak: float,
    recurrence: float,
    severity: float,
    thresholds: DetectionThresholds | None = None,
) -> float:
    """Place a burst on the band scale, signed like its peak.

    Recurrent bursts land inside the arc band, higher for stronger recurrence.
    A single burst scales with severity: below other_severity it stays under
    nonarc_max, at or above it reaches other_min.
    """
    t = thresholds or DetectionThresholds()
    if recurrence >= t.recurrence_min:
        level = t.arc_min + (t.arc_max - t.arc_min) * min(recurrence, 1.0)
    elif severity < t.other_severity:
        level = t.nonarc_max * severity / t.other_severity
    else:
        level = t.other_min * severity / t.other_severity
    return math.copysign(level, peak)


def classify(
    series: ForcingSeries,
    deviation_time: float | None,
    thresholds: DetectionThresholds | None = None,
    *,
    fault_start: float | None = None,
    window_end: float | None = None,
    severity: float | None = None,
    scenario: str = "",
    kind: str | None = None,
    location: str | None = None,
) -> DetectionReport:
    """Score the forcing burst after the deviation and assign its band.

    severity is the relative RMS change of the monitored current over the
    event window; None counts as no change.
    """
    thresholds = thresholds or DetectionThresholds()
    if deviation_time is None:
        return DetectionReport(
            scenario=scenario,
            verdict=Verdict.NO_EVENT,
            fault_start=fault_start,
            kind=kind,
            severity=severity,
            location=location,
        )

    times = np.asarray(series.times, dtype=np.float64)
    values = np.asarray(series.values, dtype=np.float64)
    window = times >= deviation_time
    if window_end is not None and window_end >= deviation_time:
        window &= times <= window_end
    elif window_end is not None:
        logger.debug("%s: deviation after the event window, using the tail", scenario or "trace")
    if not np.any(window):
        raise AnalysisError(
            "no forcing samples after the deviation",
            deviation_time=deviation_time,
            window_end=window_end,
        )
    candidates = values[window]
    peak = float(candidates[np.argmax(np.abs(candidates))])

    onset = deviation_time if fault_start is None else fault_start
    sustained = sustained_forcing(series, onset, window_end)
    recurrence = 0.0
    if sustained is not None and peak != 0.0:
        recurrence = min(sustained / abs(peak), 1.0)
    level = forcing_level(peak, recurrence, severity or 0.0, thresholds)
    logger.debug(
        "%s: peak %.4g, recurrence %.4g, severity %s, level %.4g",
        scenario or "trace",
        peak,
        recurrence,
        severity,
        level,
    )

    latency = None
    if fault_start is not None:
        latency = deviation_time - fault_start
        if latency < 0:
            logger.warning(
                "%s: deviation at %.6f s precedes the fault onset %.6f s",
                scenario or "trace",
                deviation_time,
                fault_start,
            )
    return DetectionReport(
        scenario=scenario,
        verdict=band_verdict(level, thresholds),
        peak_forcing=peak,
        deviation_time=deviation_time,
        latency=latency,
        fault_start=fault_start,
        kind=kind,
        forcing_level=level,
        recurrence=recurrence,
        severity=severity,
        location=location,
    )


def _share(reports: Sequence[DetectionReport], verdict: str) -> float | None:
    if not reports:
        return None
    return sum(1 for r in reports if r.verdict == verdict) / len(reports)


@dataclass(frozen=True)
class ScenarioAccuracy:
    scenario: str
    kind: str | None
    runs: int
    detection_rate: float | None  # ArcFault share, arc kinds only
    false_positive_rate: float | None  # ArcFault share, non-arc kinds only
    accuracy: float | None  # share matching the expected verdict
    mean_latency: float | None  # s
    max_latency: float | None  # s


@dataclass(frozen=True)
class BatchSummary:
    scenarios: list[ScenarioAccuracy] = field(default_factory=list)
    detection_rate: float | None = None
    false_positive_rate: float | None = None
    total_runs: int = 0

    def render(self) -> str:
        """Plain-text accuracy report, one line per scenario."""

        def cell(value: Any, scale: float = 1.0) -> str:
            return "undefined" if value is None else format_number(value * scale)

        lines = [
            f"runs: {self.total_runs}",
            f"detection_rate: {cell(self.detection_rate)}",
            f"false_positive_rate: {cell(self.false_positive_rate)}",
        ]
        for s in self.scenarios:
            lines.append(
                f"scenario={s.scenario} kind={s.kind or 'unknown'} runs={s.runs} "
                f"detection_rate={cell(s.detection_rate)} "
                f"false_positive_rate={cell(s.false_positive_rate)} "
                f"accuracy={cell(s.accuracy)} "
                f"mean_latency_ms={cell(s.mean_latency, 1e3)} "
                f"max_latency_ms={cell(s.max_latency, 1e3)}"
            )
        return "\n".join(lines) + "\n"


def _scenario_accuracy(name: str, reports: list[DetectionReport]) -> ScenarioAccuracy:
    kind = reports[0].kind
    is_arc = kind in ARC_KINDS
    expected = EXPECTED_VERDICTS.get(kind) if kind else None
    latencies = [r.latency for r in reports if r.latency is not None]
    return ScenarioAccuracy(
        scenario=name,
        kind=kind,
        runs=len(reports),
        detection_rate=_share(reports, VERDICT_ARC) if is_arc else None,
        false_positive_rate=_share(reports, VERDICT_ARC) if kind and not is_arc else None,
        accuracy=_share(reports, expected) if expected else None,
        mean_latency=float(np.mean(latencies)) if latencies else None,
        max_latency=float(np.max(latencies)) if latencies else None,
    )


def batch_evaluate(reports: Iterable[DetectionReport]) -> BatchSummary:
    """Aggregate repeated runs per scenario, in order of first appearance."""
    grouped: dict[str, list[DetectionReport]] = {}
    for report in reports:
        grouped.setdefault(report.scenario, []).append(report)

    everything = [r for group in grouped.values() for r in group]
    arc_runs = [r for r in everything if r.kind in ARC_KINDS]
    non_arc_runs = [r for r in everything if r.kind is not None and r.kind not in ARC_KINDS]
    return BatchSummary(
        scenarios=[_scenario_accuracy(name, group) for name, group in grouped.items()],
        detection_rate=_share(arc_runs, VERDICT_ARC),
        false_positive_rate=_share(non_arc_runs, VERDICT_ARC),
        total_runs=len(everything),
    )
