"""Single-feeder surrogate of the 12 kV / 50 Hz distribution system.

The feeder is a Thevenin source u(t) = V_pk sin(2 pi f t) with a lumped
resistive source impedance, parallel constant-impedance loads and one
switchable fault branch. The trace returned for every scenario is the
feeder-head current: load current plus fault-branch current.

AIDEV-NOTE: Loads are sized so the feeder head draws exactly the rated power
at nominal voltage, i.e. i_load = u * 2P / (3 V_pk^2) (per-phase share of a
three-phase load, P in MW, V in kV, i in kA). The fault branch sees the source
impedance in series: i_f = u / (R_arc + R_T + Z_src).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from havokarc.arc_model import (
    R_ARC_BASELINE,
    ArcParameters,
    arc_resistance_trace,
    compute_profile_coefficients,
    locate_t_m_per_half_cycle,
)
from havokarc.common import (
    ARC_KINDS,
    NOISE_KINDS,
    VALID_KINDS,
    contiguous_runs,
    is_integral,
    validate_params,
)
from havokarc.errors import InvalidParameterError
from havokarc.report import write_csv

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

# Above this SNR the injected noise is below double precision anyway
MAX_SNR_DB = 300.0


def build_feeder_spec() -> dict[str, Any]:
    """Argument spec for the feeder section of a manifest."""
    return {
        "source_peak_voltage": {"type": "float", "default": 12.0},
        "frequency": {"type": "float", "default": 50.0},
        "source_impedance": {"type": "float", "default": 0.5},
        "load_power": {"type": "float", "default": 10.0},
        "load_count": {"type": "int", "default": 2},
        "sample_rate": {"type": "float", "default": 20000.0},
        "horizon": {"type": "float", "default": 0.5},
        "fault_start": {"type": "float", "default": 0.2},
        "fault_duration": {"type": "float", "default": 0.1},
    }


def build_scenario_spec() -> dict[str, Any]:
    """Argument spec for one flat scenario document."""
    return {
        "id": {"type": "str"},
        "kind": {"type": "str", "required": True, "choices": VALID_KINDS},
        # arc parameters
        "extent": {"type": "float"},
        "duration": {"type": "float"},
        "offset": {"type": "float"},
        "m_coefficient": {"type": "float", "default": 0.0},
        "grounding_resistance": {"type": "float"},
        # arc_with_noise
        "snr_db": {"type": "float"},
        # load_switch
        "switch_t_on": {"type": "float"},
        "switch_t_off": {"type": "float"},
        "switch_delta_power": {"type": "float", "default": 5.0},
        # line_to_ground
        "fault_resistance": {"type": "float", "default": 1.0},
        # arc_with_motor_load
        "inrush_ratio": {"type": "float", "default": 6.0},
        "inrush_time_constant": {"type": "float", "default": 0.05},
        "motor_start": {"type": "float", "default": 0.0},
        # run metadata
        "location": {"type": "str", "default": "bus1-bus2", "choices": ["bus1-bus2", "bus2-bus3"]},
        "inception_jitter": {"type": "float", "default": 0.0},
        "seed": {"type": "int"},
    }


ARC_FIELDS: tuple[str, ...] = ("extent", "duration", "offset", "grounding_resistance")


@dataclass(frozen=True)
class FeederConfig:
    """Electrical and sampling parameters of the feeder surrogate."""

    source_peak_voltage: float = 12.0  # kV
    frequency: float = 50.0  # Hz
    source_impedance: float = 0.5  # ohm, resistive
    load_power: float = 10.0  # MW per load
    load_count: int = 2
    sample_rate: float = 20000.0  # Hz
    horizon: float = 0.5  # s
    fault_start: float = 0.2  # s
    fault_duration: float = 0.1  # s

    @classmethod
    def from_params(cls, params: Mapping[str, Any]) -> FeederConfig:
        values = validate_params(params, build_feeder_spec(), where="feeder")
        config = cls(**values)
        config.validate()
        return config

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def n_samples(self) -> int:
        return int(round(self.sample_rate * self.horizon))

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    @property
    def fault_end(self) -> float:
        return self.fault_start + self.fault_duration

    @property
    def total_load_power(self) -> float:
        return self.load_power * self.load_count

    def validate(self) -> None:
        if self.source_peak_voltage <= 0 or self.frequency <= 0 or self.sample_rate <= 0:
            raise InvalidParameterError(
                "voltage, frequency and sample rate must be positive", config=self
            )
        if self.source_impedance < 0 or self.load_power < 0 or self.load_count < 0:
            raise InvalidParameterError(
                "source impedance and loads must be non-negative", config=self
            )
        if self.horizon <= 0 or not is_integral(self.sample_rate * self.horizon):
            raise InvalidParameterError(
                "sample_rate * horizon must be a whole number of samples",
                sample_rate=self.sample_rate,
                horizon=self.horizon,
            )
        if self.fault_duration < 0 or self.fault_start < 0 or self.fault_end > self.horizon:
            raise InvalidParameterError(
                "fault window must lie inside the horizon",
                fault_start=self.fault_start,
                fault_duration=self.fault_duration,
                horizon=self.horizon,
            )


@dataclass(frozen=True)
class LoadSwitch:
    """Step change of one load; None times fall back to the fault window."""

    t_on: float | None = None
    t_off: float | None = None
    delta_power: float = 5.0  # MW


@dataclass(frozen=True)
class MotorLoad:
    """Induction-motor surrogate: steady load current plus a decaying inrush."""

    inrush_ratio: float = 6.0  # inrush peak / steady-state peak
    time_constant: float = 0.05  # s
    start: float = 0.0  # s
    phase: float = math.acos(0.3)  # rad, inrush lag behind the voltage

    def envelope(self, t: FloatArray, steady_peak: float) -> FloatArray:
        """Peak of the inrush component at time t."""
        t = np.asarray(t, dtype=np.float64)
        elapsed = t - self.start
        decay = np.exp(-np.clip(elapsed, 0.0, None) / self.time_constant)
        return np.where(elapsed >= 0, self.inrush_ratio * steady_peak * decay, 0.0)


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulated case: which disturbance, with which parameters."""

    kind: str
    arc: ArcParameters | None = None
    snr_db: float | None = None
    switch: LoadSwitch | None = None
    fault_resistance: float = 1.0
    motor: MotorLoad | None = None
    location: str = "bus1-bus2"
    inception_jitter: float = 0.0
    id: str = ""

    def validate(self) -> None:
        if self.kind not in VALID_KINDS:
            raise InvalidParameterError(f"Unknown scenario kind: {self.kind}", scenario=self.id)
        if (self.arc is not None) != (self.kind in ARC_KINDS):
            raise InvalidParameterError(
                "arc parameters are required exactly for arc scenarios",
                scenario=self.id,
                kind=self.kind,
            )
        if (self.snr_db is not None) != (self.kind in NOISE_KINDS):
            raise InvalidParameterError(
                "snr_db is required exactly for arc_with_noise",
                scenario=self.id,
                kind=self.kind,
            )
        if self.inception_jitter < 0:
            raise InvalidParameterError(
                "inception_jitter must be non-negative", scenario=self.id
            )

    @classmethod
    def from_params(cls, params: Mapping[str, Any], period: float = 0.02) -> ScenarioSpec:
        """Build a scenario from a flat key-value document."""
        values = validate_params(
            params,
            build_scenario_spec(),
            required_if=[
                ("kind", ARC_KINDS, ARC_FIELDS),
                ("kind", NOISE_KINDS, ("snr_db",)),
            ],
            where=f"scenario {params.get('id') or params.get('kind')}",
        )
        kind = values["kind"]
        ignored = [
            key
            for key in (*ARC_FIELDS, "snr_db")
            if params.get(key) is not None
            and not (kind in ARC_KINDS if key in ARC_FIELDS else kind in NOISE_KINDS)
        ]
        if ignored:
            logger.warning(
                "scenario %s: %s ignored for kind %s",
                values["id"] or kind,
                ", ".join(ignored),
                kind,
            )
        arc = None
        if kind in ARC_KINDS:
            arc = ArcParameters(
                extent=values["extent"],
                duration=values["duration"],
                offset=values["offset"],
                m_coefficient=values["m_coefficient"],
                grounding_resistance=values["grounding_resistance"],
                period=period,
            )
        switch = None
        if kind == "load_switch":
            switch = LoadSwitch(
                values["switch_t_on"], values["switch_t_off"], values["switch_delta_power"]
            )
        motor = None
        if kind == "arc_with_motor_load":
            motor = MotorLoad(
                inrush_ratio=values["inrush_ratio"],
                time_constant=values["inrush_time_constant"],
                start=values["motor_start"],
            )
        return cls(
            kind=kind,
            arc=arc,
            snr_db=values["snr_db"] if kind in NOISE_KINDS else None,
            switch=switch,
            fault_resistance=values["fault_resistance"],
            motor=motor,
            location=values["location"],
            inception_jitter=values["inception_jitter"],
            id=values["id"] or kind,
        )


@dataclass(frozen=True, eq=False)
class CurrentTrace:
    """Uniformly sampled feeder-head current (kA) with fault metadata."""

    samples: FloatArray
    dt: float
    fault_start: float
    label: str
    fault_end: float | None = None
    fault_current: FloatArray | None = None
    t0: float = 0.0

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.samples)):
            raise InvalidParameterError("current trace holds non-finite samples", label=self.label)

    @property
    def times(self) -> FloatArray:
        return self.t0 + np.arange(self.samples.size) * self.dt

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, ["time_s", "current_ka"], [self.times, self.samples])


def _time_grid(config: FeederConfig) -> FloatArray:
    return np.arange(config.n_samples) * config.dt


def _source_voltage(config: FeederConfig, t: FloatArray) -> FloatArray:
    return config.source_peak_voltage * np.sin(2.0 * math.pi * config.frequency * t)


def _load_conductance(config: FeederConfig, power: float | FloatArray) -> Any:
    """Conductance (S) drawing `power` MW at nominal voltage, per-phase share."""
    return 2.0 * np.asarray(power) / (3.0 * config.source_peak_voltage**2)


def _fault_window(t: FloatArray, start: float, end: float) -> npt.NDArray[np.bool_]:
    return (t >= start) & (t < end)


def _check_window(config: FeederConfig, start: float, end: float) -> None:
    if not 0.0 <= start <= end <= config.horizon:
        raise InvalidParameterError(
            "event window must lie inside the horizon",
            start=start,
            end=end,
            horizon=config.horizon,
        )


def _arc_fault_current(
    config: FeederConfig,
    arc: ArcParameters,
    t: FloatArray,
    u: FloatArray,
    fault_start: float,
    fault_end: float,
) -> FloatArray:
    """Fault-branch current through R_arc(t) + R_T + Z_src inside the window."""
    if not math.isclose(arc.period, config.period, rel_tol=1e-9):
        raise InvalidParameterError(
            "arc period does not match the feeder frequency",
            arc_period=arc.period,
            feeder_period=config.period,
        )
    arc.validate(config.source_peak_voltage)
    if arc.grounding_resistance + config.source_impedance + R_ARC_BASELINE <= 0:
        raise InvalidParameterError("fault branch impedance must be positive")

    profile = compute_profile_coefficients(arc)
    anchors = locate_t_m_per_half_cycle(u, config.dt, arc.offset)
    r_arc = arc_resistance_trace(
        arc, profile, config.horizon, config.dt, anchors=anchors, onset=fault_start
    )
    impedance = r_arc.samples + arc.grounding_resistance + config.source_impedance
    window = _fault_window(t, fault_start, fault_end)
    return np.where(window, u / impedance, 0.0)


def _inception(config: FeederConfig, scenario: ScenarioSpec, seed: int) -> float:
    """Fault start for this repetition, shifted by the seeded inception jitter."""
    if scenario.inception_jitter <= 0:
        return config.fault_start
    rng = np.random.default_rng([seed, 1])
    return config.fault_start + float(rng.uniform(0.0, scenario.inception_jitter))


def _arc_trace(
    config: FeederConfig,
    arc: ArcParameters,
    fault_start: float,
    label: str,
    extra_load: FloatArray | None = None,
) -> CurrentTrace:
    fault_end = fault_start + config.fault_duration
    _check_window(config, fault_start, fault_end)
    t = _time_grid(config)
    u = _source_voltage(config, t)
    i_load = u * _load_conductance(config, config.total_load_power)
    if extra_load is not None:
        i_load = i_load + extra_load
    i_fault = (
        _arc_fault_current(config, arc, t, u, fault_start, fault_end)
        if config.fault_duration > 0
        else np.zeros_like(t)
    )
    return CurrentTrace(
        samples=i_load + i_fault,
        dt=config.dt,
        fault_start=fault_start,
        label=label,
        fault_end=fault_end,
        fault_current=i_fault,
    )


def simulate(config: FeederConfig, scenario: ScenarioSpec, seed: int = 0) -> CurrentTrace:
    """Generate the feeder-head current for any scenario kind."""
    config.validate()
    scenario.validate()
    fault_start = _inception(config, scenario, seed)
    kind = scenario.kind
    logger.debug("simulating %s (%s) fault_start=%.6f", scenario.id, kind, fault_start)

    if kind == "load_switch":
        switch = scenario.switch or LoadSwitch()
        shift = fault_start - config.fault_start
        t_on = (config.fault_start if switch.t_on is None else switch.t_on) + shift
        t_off = (config.fault_end if switch.t_off is None else switch.t_off) + shift
        return switch_load(config, t_on, t_off, switch.delta_power)
    if kind == "line_to_ground":
        return line_to_ground(config, scenario.fault_resistance, fault_start=fault_start)

    assert scenario.arc is not None  # guaranteed by validate()
    if kind == "arc_with_motor_load":
        return motor_load_surrogate(
            config, scenario.arc, scenario.motor or MotorLoad(), fault_start=fault_start
        )

    trace = _arc_trace(config, scenario.arc, fault_start, kind)
    if kind == "arc_with_noise":
        assert scenario.snr_db is not None
        trace = inject_noise(trace, scenario.snr_db, seed)
    return trace


def inject_noise(trace: CurrentTrace, snr_db: float, seed: int) -> CurrentTrace:
    """Add zero-mean white Gaussian noise at the given SNR (dB).

    Noise power is the mean square of the whole trace divided by 10^(snr/10).
    The fault-branch current is left clean; only the measurement is noisy.
    """
    if not snr_db > 0:
        raise InvalidParameterError("snr_db must be positive", snr_db=snr_db)
    if trace.samples.size == 0:
        raise InvalidParameterError("cannot add noise to an empty trace", label=trace.label)
    snr_db = min(snr_db, MAX_SNR_DB)
    signal_power = float(np.mean(trace.samples**2))
    noise_std = math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, noise_std, trace.samples.size)
    return dataclasses.replace(trace, samples=trace.samples + noise)


def switch_load(
    config: FeederConfig, t_on: float, t_off: float, delta_power: float
) -> CurrentTrace:
    """Step one load by delta_power MW on [t_on, t_off); no fault branch."""
    config.validate()
    if not t_on < t_off:
        raise InvalidParameterError(
            "switching window must satisfy t_on < t_off", t_on=t_on, t_off=t_off
        )
    _check_window(config, t_on, t_off)
    if config.load_count < 1 or config.load_power + delta_power < 0:
        raise InvalidParameterError(
            "switched load cannot draw negative power",
            load_power=config.load_power,
            delta_power=delta_power,
        )

    t = _time_grid(config)
    u = _source_voltage(config, t)
    window = _fault_window(t, t_on, t_off)
    power = np.where(window, config.total_load_power + delta_power, config.total_load_power)
    return CurrentTrace(
        samples=u * _load_conductance(config, power),
        dt=config.dt,
        fault_start=t_on,
        label="load_switch",
        fault_end=t_off,
    )


def line_to_ground(
    config: FeederConfig, fault_resistance: float, fault_start: float | None = None
) -> CurrentTrace:
    """Bolted-style fault through a constant resistance; math.inf means no fault."""
    config.validate()
    if fault_resistance < 0:
        raise InvalidParameterError(
            "fault resistance must be non-negative", fault_resistance=fault_resistance
        )
    if fault_resistance + config.source_impedance <= 0:
        raise InvalidParameterError(
            "fault branch impedance must be positive",
            fault_resistance=fault_resistance,
            source_impedance=config.source_impedance,
        )
    start = config.fault_start if fault_start is None else fault_start
    end = start + config.fault_duration
    _check_window(config, start, end)

    t = _time_grid(config)
    u = _source_voltage(config, t)
    i_load = u * _load_conductance(config, config.total_load_power)
    branch = fault_resistance + config.source_impedance
    i_fault = np.where(_fault_window(t, start, end), u / branch, 0.0)
    return CurrentTrace(
        samples=i_load + i_fault,
        dt=config.dt,
        fault_start=start,
        label="line_to_ground",
        fault_end=end,
        fault_current=i_fault,
    )


def motor_load_surrogate(
    config: FeederConfig,
    arc: ArcParameters,
    motor: MotorLoad | None = None,
    fault_start: float | None = None,
) -> CurrentTrace:
    """Arc fault with one constant load replaced by an induction-motor surrogate.

    The motor draws the replaced load's steady current plus an inrush
    component whose envelope decays with motor.time_constant.
    """
    config.validate()
    motor = motor or MotorLoad()
    if config.load_count < 1:
        raise InvalidParameterError("the motor needs a load slot to replace")
    if motor.time_constant <= 0 or motor.inrush_ratio < 0:
        raise InvalidParameterError("invalid motor surrogate parameters", motor=motor)

    t = _time_grid(config)
    steady_peak = float(
        config.source_peak_voltage * _load_conductance(config, config.load_power)
    )
    omega = 2.0 * math.pi * config.frequency
    inrush = motor.envelope(t, steady_peak) * np.sin(omega * t - motor.phase)
    start = config.fault_start if fault_start is None else fault_start
    return _arc_trace(config, arc, start, "arc_with_motor_load", extra_load=inrush)


def zero_off_intervals(trace: CurrentTrace, fraction: float = 0.01) -> list[tuple[float, float]]:
    """Contiguous near-zero runs of the fault-branch current inside the fault window.

    Near-zero means below `fraction` of the window's peak fault current.
    """
    if trace.fault_current is None or trace.fault_end is None:
        return []
    t = trace.times
    window = _fault_window(t, trace.fault_start, trace.fault_end)
    if not np.any(window):
        return []
    current = np.abs(trace.fault_current[window])
    peak = float(np.max(current))
    if peak == 0.0:
        return []
    first = int(np.flatnonzero(window)[0])
    return contiguous_runs(current < fraction * peak, trace.dt, float(t[first]))


def rms_current(trace: CurrentTrace, start: float, stop: float) -> float:
    """RMS of the feeder-head current on [start, stop)."""
    window = _fault_window(trace.times, start, stop)
    if not np.any(window):
        raise InvalidParameterError("empty RMS window", start=start, stop=stop)
    return float(np.sqrt(np.mean(trace.samples[window] ** 2)))


def event_severity(trace: CurrentTrace, baseline: tuple[float, float]) -> float:
    """Relative RMS change of the current over the event window against `baseline`.

    The event window is [fault_start, fault_end), or the rest of the trace
    when the trace has no fault end.
    """
    end = trace.fault_end if trace.fault_end is not None else float(trace.times[-1]) + trace.dt
    reference = rms_current(trace, *baseline)
    if reference == 0.0:
        raise InvalidParameterError("baseline RMS is zero", baseline=baseline)
    return abs(rms_current(trace, trace.fault_start, end) / reference - 1.0)
