"""Unit tests for the forcing classifier."""

from __future__ import annotations

import math
from typing import Any

import numpy as np
import pytest

from havokarc.errors import AnalysisError, BaselineWindowError, ConfigError
from havokarc.fault_detector import (
    DetectionReport,
    DetectionThresholds,
    Verdict,
    band_verdict,
    batch_evaluate,
    classify,
    find_deviation,
    forcing_level,
    sustained_forcing,
)
from havokarc.havok_core import ForcingSeries

DT = 5e-5


def _step_series(onset: float = 0.2, level: float = -0.1, floor: float = 0.0) -> ForcingSeries:
    """Flat forcing (plus an alternating floor) that jumps to `level` at onset."""
    times = np.arange(10000) * DT
    values = floor * np.where(np.arange(times.size) % 2 == 0, 1.0, -1.0)
    values = np.where(times >= onset, level, values)
    return ForcingSeries(times=times, values=values)


SPAN = 39 * DT


def _burst_series(peak: float = -0.24, tail: float = 0.0) -> ForcingSeries:
    """One onset burst at 0.2 s, then `tail` every half-cycle until 0.3 s.

    Shaped like a model forcing: the burst fills the delay windows touching
    the onset, the tail stands for the re-distortion of a burning arc.
    """
    index = np.arange(10000)
    values = np.zeros(index.size)
    values[4000:4039] = peak
    values[(index >= 4040) & (index < 6000) & (index % 200 == 0)] = tail
    return ForcingSeries(times=index * DT, values=values, alignment="end", span=SPAN)


class TestDetectionThresholds:
    """Test threshold construction."""

    def test_defaults(self) -> None:
        """Default band edges and baseline window."""
        thresholds = DetectionThresholds()
        assert thresholds.edges == (0.045, 0.06, 0.18, 0.2)
        assert thresholds.baseline_window == (0.0, 0.15)
        assert thresholds.deviation_floor == 1e-4
        assert thresholds.recurrence_min == 0.01
        assert thresholds.other_severity == 1.0

    @pytest.mark.parametrize(
        "edges",
        [(0.06, 0.045, 0.18, 0.2), (0.0, 0.06, 0.18, 0.2), (0.045, 0.06, 0.2, 0.18)],
    )
    def test_unordered_edges_rejected(self, edges: tuple[float, ...]) -> None:
        """Edges must be positive and strictly ascending."""
        with pytest.raises(ConfigError):
            DetectionThresholds.from_edges(edges)

    def test_edge_count(self) -> None:
        """Exactly four edges."""
        with pytest.raises(ConfigError, match="four"):
            DetectionThresholds.from_edges([0.1, 0.2, 0.3])

    def test_reversed_baseline_window(self) -> None:
        """start <= stop."""
        with pytest.raises(ConfigError):
            DetectionThresholds(baseline_window=(0.2, 0.1))

    def test_scaled(self) -> None:
        """scaled multiplies every edge and keeps the deviation rule."""
        scaled = DetectionThresholds(deviation_factor=4.0).scaled(3.0)
        assert scaled.edges == pytest.approx((0.135, 0.18, 0.54, 0.6))
        assert scaled.deviation_factor == 4.0
        assert scaled.deviation_floor == pytest.approx(3e-4)
        assert scaled.recurrence_min == 0.01
        assert scaled.other_severity == 1.0

    @pytest.mark.parametrize(
        "field,value",
        [
            ("deviation_floor", -1e-3),
            ("recurrence_min", 0.0),
            ("recurrence_min", 1.0),
            ("other_severity", 0.0),
        ],
    )
    def test_scoring_parameters_validated(self, field: str, value: float) -> None:
        """Floor non-negative, recurrence_min inside (0, 1), other_severity positive."""
        with pytest.raises(ConfigError, match=field):
            DetectionThresholds(**{field: value})


class TestBandVerdict:
    """Test the forcing bands."""

    @pytest.mark.parametrize(
        "peak,verdict",
        [
            (-0.1035, Verdict.ARC_FAULT),
            (0.06, Verdict.ARC_FAULT),
            (0.18, Verdict.ARC_FAULT),
            (0.0429, Verdict.NON_ARCING),
            (-0.202, Verdict.OTHER_FAULT),
            (0.045, Verdict.INCONCLUSIVE),
            (0.05, Verdict.INCONCLUSIVE),
            (0.19, Verdict.INCONCLUSIVE),
            (0.2, Verdict.INCONCLUSIVE),
        ],
    )
    def test_bands(self, peak: float, verdict: Verdict) -> None:
        """Closed arc band, open outer bands, gaps are Inconclusive."""
        assert band_verdict(peak) == verdict

    def test_sign_does_not_matter(self) -> None:
        """Bands apply to |peak|."""
        assert band_verdict(0.1035) == band_verdict(-0.1035)

    def test_non_finite_peak(self) -> None:
        """NaN has no band."""
        with pytest.raises(AnalysisError):
            band_verdict(math.nan)

    def test_verdict_renders_as_name(self) -> None:
        """Verdicts print as their plain names."""
        assert str(Verdict.ARC_FAULT) == "ArcFault"
        assert Verdict.NO_EVENT == "NoEvent"


class TestFindDeviation:
    """Test the quiescent-envelope deviation rule."""

    def test_step_detected_at_onset(self) -> None:
        """A step to an arc-level forcing is found within one sample."""
        deviation = find_deviation(_step_series())
        assert deviation is not None
        assert deviation == pytest.approx(0.2, abs=DT)

    def test_flat_series_has_no_deviation(self) -> None:
        """Nothing leaves the envelope."""
        assert find_deviation(_step_series(level=0.0)) is None

    def test_envelope_scales_with_baseline(self) -> None:
        """A step below deviation_factor times the baseline RMS is ignored."""
        assert find_deviation(_step_series(level=-0.1, floor=0.03)) is None
        assert find_deviation(_step_series(level=-0.1, floor=0.01)) is not None

    def test_floor_on_silent_baseline(self) -> None:
        """A zero baseline falls back to deviation_floor."""
        assert find_deviation(_step_series(level=5e-5)) is None
        assert find_deviation(_step_series(level=2e-4)) == pytest.approx(0.2, abs=DT)

    def test_empty_baseline_window(self) -> None:
        """The baseline window must hold samples."""
        series = ForcingSeries(times=np.arange(100) * DT + 0.2, values=np.zeros(100))
        with pytest.raises(BaselineWindowError):
            find_deviation(series)

    def test_latency_monotone_in_onset(self) -> None:
        """A later onset never gives an earlier deviation."""
        deviations = [find_deviation(_step_series(onset=t)) for t in (0.2, 0.25, 0.3)]
        assert deviations == sorted(deviations)  # type: ignore[type-var]


class TestClassify:
    """Test classification and latency."""

    def test_arc_step(self) -> None:
        """Step to -0.1 is an arc with near-zero latency."""
        series = _step_series()
        deviation = find_deviation(series)
        report = classify(
            series, deviation, fault_start=0.2, scenario="A", kind="low_current_arc"
        )
        assert report.verdict is Verdict.ARC_FAULT
        assert report.peak_forcing == pytest.approx(-0.1)
        assert report.forcing_level == pytest.approx(-0.18)
        assert report.latency is not None
        assert abs(report.latency) <= DT

    def test_no_deviation_is_no_event(self) -> None:
        """Without a deviation there is nothing to classify."""
        report = classify(_step_series(level=0.0), None, fault_start=0.2, scenario="E")
        assert report.verdict is Verdict.NO_EVENT
        assert report.peak_forcing is None
        assert report.latency is None

    def test_peak_is_extremal_sample_in_window(self) -> None:
        """A larger spike after window_end does not count."""
        series = _step_series()
        values = series.values.copy()
        values[series.times >= 0.4] = 0.5
        spiked = ForcingSeries(times=series.times, values=values)
        inside = classify(spiked, 0.2, window_end=0.35)
        assert inside.verdict is Verdict.ARC_FAULT
        assert inside.peak_forcing == pytest.approx(-0.1)
        assert classify(spiked, 0.2).peak_forcing == pytest.approx(0.5)

    def test_negative_latency_warns(self, caplog: pytest.LogCaptureFixture) -> None:
        """A deviation before the onset is reported and logged."""
        report = classify(_step_series(onset=0.19), 0.19, fault_start=0.2, scenario="A")
        assert report.latency == pytest.approx(-0.01)
        assert "precedes the fault onset" in caplog.text

    def test_scale_invariance(self) -> None:
        """Scaling forcing and thresholds together keeps the verdict and latency."""
        base = _step_series(floor=0.001)
        scaled = ForcingSeries(times=base.times, values=3.0 * base.values)
        thresholds = DetectionThresholds()
        first = classify(base, find_deviation(base, thresholds), thresholds, fault_start=0.2)
        k = thresholds.scaled(3.0)
        second = classify(scaled, find_deviation(scaled, k), k, fault_start=0.2)
        assert first.verdict == second.verdict
        assert first.deviation_time == second.deviation_time

    def test_recurrent_burst_is_arc(self) -> None:
        """A small forcing that keeps recurring after the onset burst marks an arc."""
        series = _burst_series(tail=0.014)
        report = classify(
            series, find_deviation(series), fault_start=0.2, window_end=0.3, severity=0.0
        )
        assert report.verdict is Verdict.ARC_FAULT
        assert report.recurrence == pytest.approx(0.014 / 0.24)
        assert report.peak_forcing == pytest.approx(-0.24)
        assert report.forcing_level is not None and report.forcing_level < 0

    @pytest.mark.parametrize(
        "severity,verdict",
        [
            (None, Verdict.NON_ARCING),
            (0.25, Verdict.NON_ARCING),
            (1.0, Verdict.INCONCLUSIVE),
            (7.2, Verdict.OTHER_FAULT),
        ],
    )
    def test_single_burst_follows_severity(
        self, severity: float | None, verdict: Verdict
    ) -> None:
        """Without recurrence the current change decides between switching and fault."""
        series = _burst_series(tail=4e-4)
        report = classify(
            series, find_deviation(series), fault_start=0.2, window_end=0.3, severity=severity
        )
        assert report.verdict is verdict
        assert report.recurrence is not None and report.recurrence < 0.01

    def test_burst_height_does_not_decide(self) -> None:
        """Equal onset bursts split by what follows them."""
        arc = _burst_series(tail=0.014)
        step = _burst_series(tail=4e-4)
        verdicts = [
            classify(s, 0.2, fault_start=0.2, window_end=0.3, severity=0.25).verdict
            for s in (arc, step)
        ]
        assert verdicts == [Verdict.ARC_FAULT, Verdict.NON_ARCING]

    def test_burst_scale_invariance(self) -> None:
        """Scaling a burst series and its thresholds keeps every verdict."""
        thresholds = DetectionThresholds()
        k = thresholds.scaled(3.0)
        for tail, severity in ((0.014, 0.0), (4e-4, 0.25), (4e-4, 7.2)):
            base = _burst_series(tail=tail)
            scaled = ForcingSeries(
                times=base.times, values=3.0 * base.values, alignment="end", span=SPAN
            )
            window: dict[str, Any] = {
                "fault_start": 0.2,
                "window_end": 0.3,
                "severity": severity,
            }
            first = classify(base, find_deviation(base, thresholds), thresholds, **window)
            second = classify(scaled, find_deviation(scaled, k), k, **window)
            assert first.verdict == second.verdict
            assert first.deviation_time == second.deviation_time

    def test_location_is_carried(self) -> None:
        """The fault location tags the report, with or without a deviation."""
        series = _burst_series(tail=0.014)
        assert classify(series, 0.2, location="bus2-bus3").location == "bus2-bus3"
        assert classify(series, None, location="bus2-bus3").location == "bus2-bus3"

    def test_window_without_samples(self) -> None:
        """A deviation past the end of the series is an analysis error."""
        with pytest.raises(AnalysisError):
            classify(_step_series(), 0.6)


class TestSustainedForcing:
    """Test the interior-window forcing peak."""

    def test_windows_touching_the_onset_are_skipped(self) -> None:
        """The onset burst does not count, the recurring tail does."""
        assert sustained_forcing(_burst_series(tail=0.014), 0.2, 0.3) == pytest.approx(0.014)
        assert sustained_forcing(_burst_series(tail=0.0), 0.2, 0.3) == 0.0

    def test_start_alignment_looks_forward(self) -> None:
        """With start stamps each window ends span seconds after its stamp."""
        # start stamps put the onset burst on the span before the onset
        series = _burst_series(tail=0.014)
        shifted = ForcingSeries(
            times=series.times - SPAN, values=series.values, alignment="start", span=SPAN
        )
        assert sustained_forcing(shifted, 0.2, 0.3) == pytest.approx(0.014)

    def test_event_shorter_than_a_window(self) -> None:
        """No interior window, no value."""
        assert sustained_forcing(_burst_series(), 0.2, 0.2 + SPAN / 2) is None


class TestForcingLevel:
    """Test placement on the band scale."""

    @pytest.mark.parametrize(
        "recurrence,severity,verdict",
        [
            (0.057, 0.0, Verdict.ARC_FAULT),
            (1.0, 7.2, Verdict.ARC_FAULT),
            (0.002, 0.25, Verdict.NON_ARCING),
            (0.002, 0.99, Verdict.NON_ARCING),
            (0.002, 7.2, Verdict.OTHER_FAULT),
        ],
    )
    def test_bands(self, recurrence: float, severity: float, verdict: Verdict) -> None:
        """Recurrence wins over severity; single bursts scale with severity."""
        assert band_verdict(forcing_level(-0.24, recurrence, severity)) is verdict

    def test_sign_follows_peak(self) -> None:
        """Levels keep the sign of the burst peak."""
        assert forcing_level(-0.2, 0.5, 0.0) == pytest.approx(-0.12)
        assert forcing_level(0.2, 0.5, 0.0) == pytest.approx(0.12)

    def test_recurrence_saturates(self) -> None:
        """Recurrence above one lands on the top arc edge."""
        assert forcing_level(1.0, 3.0, 0.0) == pytest.approx(0.18)

    def test_custom_thresholds(self) -> None:
        """A stricter recurrence_min turns a weak arc into a single burst."""
        strict = DetectionThresholds(recurrence_min=0.1)
        assert band_verdict(forcing_level(-0.24, 0.057, 0.25, strict)) is Verdict.NON_ARCING


class TestDetectionReport:
    """Test report rendering."""

    def test_to_record(self) -> None:
        """key=value fields in a fixed order."""
        report = DetectionReport(
            scenario="A",
            verdict=Verdict.ARC_FAULT,
            peak_forcing=-0.1035,
            deviation_time=0.20045,
            latency=0.20045 - 0.2,
            fault_start=0.2,
            forcing_level=-0.0672,
            location="bus1-bus2",
        )
        assert report.to_record() == (
            "scenario=A verdict=ArcFault peak=-0.1035 level=-0.0672 "
            "deviation_time_s=0.20045 latency_ms=0.45 location=bus1-bus2"
        )

    def test_missing_values_render_as_none(self) -> None:
        """NoEvent reports have no numbers."""
        record = DetectionReport(scenario="E", verdict=Verdict.NO_EVENT).to_record()
        assert record == (
            "scenario=E verdict=NoEvent peak=none level=none "
            "deviation_time_s=none latency_ms=none location=none"
        )


class TestBatchEvaluate:
    """Test aggregation over repeated runs."""

    @staticmethod
    def _report(scenario: str, kind: str, verdict: Verdict, latency: float) -> DetectionReport:
        return DetectionReport(scenario=scenario, verdict=verdict, latency=latency, kind=kind)

    def test_rates(self) -> None:
        """Detection over arc runs, false positives over non-arc runs."""
        summary = batch_evaluate(
            [
                self._report("A", "low_current_arc", Verdict.ARC_FAULT, 0.001),
                self._report("A", "low_current_arc", Verdict.NON_ARCING, 0.003),
                self._report("E", "load_switch", Verdict.NON_ARCING, 0.0),
                self._report("F", "line_to_ground", Verdict.ARC_FAULT, 0.0),
            ]
        )
        assert summary.total_runs == 4
        assert summary.detection_rate == pytest.approx(0.5)
        assert summary.false_positive_rate == pytest.approx(0.5)
        a, e, f = summary.scenarios
        assert (a.scenario, a.runs) == ("A", 2)
        assert a.accuracy == pytest.approx(0.5)
        assert a.mean_latency == pytest.approx(0.002)
        assert a.max_latency == pytest.approx(0.003)
        assert a.false_positive_rate is None
        assert e.accuracy == 1.0
        assert f.accuracy == 0.0

    def test_undefined_rates(self) -> None:
        """Without non-arc runs the false-positive rate is undefined."""
        summary = batch_evaluate([self._report("A", "low_current_arc", Verdict.ARC_FAULT, 0.0)])
        assert summary.false_positive_rate is None
        assert "false_positive_rate: undefined" in summary.render()

    def test_empty(self) -> None:
        """No runs, no rates."""
        summary = batch_evaluate([])
        assert summary.total_runs == 0
        assert summary.detection_rate is None
        assert summary.render().startswith("runs: 0\n")
