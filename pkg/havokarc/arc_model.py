"""Residual-power arc model.

The arc resistance of a high-impedance arc fault is shaped by a prescribed,
periodically re-anchored residual-power profile P_res(t):

    R_arc(t) = exp( integral of P_res from fault onset to t )

P_res is piecewise linear inside every half-cycle. The first segment is
centred on t_m, the instant of maximum resistance, which is located on the
fault voltage by the OFFSET level. DURATION sets the width of that segment
(the zero-off interval) and EXTENT sets exp(ln R_arc(t_m)). A non-zero
m coefficient adds a second segment that tilts the rest of the half-cycle.

Units: time in s, voltage in kV, resistance in ohm, P_res in 1/s (T' = 1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import numpy.typing as npt

from havokarc.common import contiguous_runs, is_integral
from havokarc.errors import DivergingProfileError, InvalidParameterError, NoCrossingError
from havokarc.report import write_csv

logger = logging.getLogger(__name__)

# AIDEV-NOTE: R_arc,0 is pinned at 1 ohm; the exponential form then starts from
# exp(0) = 1 and the EXTENT identity ln R_arc(t_m) = ln EXTENT holds exactly.
R_ARC_BASELINE = 1.0
DEFAULT_EXPONENT_CAP = math.log(1e12)

FloatArray = npt.NDArray[np.float64]


@dataclass(frozen=True)
class ArcParameters:
    """Distortion features of one arc-fault scenario."""

    extent: float  # ohm, target R_arc(t_m)
    duration: float  # s, zero-off interval
    offset: float  # kV, |u_f| level that locates t_m
    m_coefficient: float = 0.0
    grounding_resistance: float = 0.0  # ohm, R_T
    period: float = 0.02  # s, one cycle of the supply

    def validate(self, source_peak_voltage: float | None = None) -> None:
        """Raise InvalidParameterError when an invariant does not hold."""
        values = (
            self.extent,
            self.duration,
            self.offset,
            self.m_coefficient,
            self.grounding_resistance,
            self.period,
        )
        if not all(math.isfinite(v) for v in values):
            raise InvalidParameterError("Arc parameters must be finite", params=self)
        if self.extent <= 0:
            raise InvalidParameterError("EXTENT must be positive", extent=self.extent)
        if self.period <= 0:
            raise InvalidParameterError("period must be positive", period=self.period)
        if not 0 < self.duration < self.period:
            raise InvalidParameterError(
                "DURATION must lie strictly between 0 and the period",
                duration=self.duration,
                period=self.period,
            )
        if self.grounding_resistance < 0:
            raise InvalidParameterError(
                "grounding resistance must be non-negative",
                grounding_resistance=self.grounding_resistance,
            )
        if source_peak_voltage is not None and abs(self.offset) >= source_peak_voltage:
            raise InvalidParameterError(
                "|OFFSET| must stay below the source peak voltage",
                offset=self.offset,
                source_peak_voltage=source_peak_voltage,
            )


@dataclass(frozen=True)
class ResidualPowerProfile:
    """Coefficients of the two-segment residual-power profile anchored at t_m."""

    a1: float
    b1: float
    a2: float
    b2: float
    t_m: float
    duration: float
    period: float

    @property
    def half_period(self) -> float:
        return self.period / 2.0

    @property
    def segments(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Half-open [lo, hi) bounds of the two segments around t_m."""
        half = self.duration / 2.0
        return (
            (self.t_m - half, self.t_m + half),
            (self.t_m + half, self.t_m + self.half_period - half),
        )

    def anchored_at(self, t_m: float) -> ResidualPowerProfile:
        """Same coefficients, re-anchored at another t_m."""
        return ResidualPowerProfile(
            self.a1, self.b1, self.a2, self.b2, t_m, self.duration, self.period
        )


@dataclass(frozen=True)
class ArcResistanceTrace:
    """Sampled arc resistance, one value per simulation step."""

    samples: FloatArray
    dt: float
    baseline: float = R_ARC_BASELINE
    t0: float = 0.0

    @property
    def times(self) -> FloatArray:
        return self.t0 + np.arange(self.samples.size) * self.dt

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, ["time_s", "r_arc_ohm"], [self.times, self.samples])


def compute_profile_coefficients(params: ArcParameters, t_m: float = 0.0) -> ResidualPowerProfile:
    """Compute a1, b1, a2, b2 for the given distortion features."""
    params.validate()
    duration, period = params.duration, params.period
    if duration >= period / 2.0:
        raise InvalidParameterError(
            "DURATION leaves no room for the second profile segment",
            duration=duration,
            half_period=period / 2.0,
        )

    ln_extent = math.log(params.extent)
    m = params.m_coefficient
    a1 = -8.0 * ln_extent / duration**2
    b1 = 4.0 * ln_extent / duration
    a2 = m * (-16.0 * ln_extent) / (duration * (period - 2.0 * duration))
    b2 = m * b1
    return ResidualPowerProfile(a1, b1, a2, b2, t_m, duration, period)


def _level_crossings(fault_voltage: FloatArray, dt: float, offset: float, t0: float) -> FloatArray:
    """Every t with |u_f(t)| = |offset| on the side selected by sgn(offset)."""
    u = np.asarray(fault_voltage, dtype=np.float64)
    if u.ndim != 1 or u.size < 2:
        raise InvalidParameterError("fault voltage must be a 1-D series of two or more samples")
    peak = float(np.max(np.abs(u)))
    level = abs(offset)
    if level >= peak:
        raise NoCrossingError(
            "OFFSET is not reached by the fault voltage", offset=offset, peak=peak
        )

    if level == 0.0:
        # zero crossings of the signed waveform; |u| rises right after them
        a, b = u[:-1], u[1:]
        exact = np.flatnonzero(a == 0.0).astype(np.float64)
        idx = np.flatnonzero(a * b < 0.0)
        frac = a[idx] / (a[idx] - b[idx])
        positions = np.union1d(exact, idx + frac)
    else:
        mag = np.abs(u)
        a, b = mag[:-1], mag[1:]
        if offset > 0:
            idx = np.flatnonzero((a < level) & (b >= level))
        else:
            idx = np.flatnonzero((a > level) & (b <= level))
        positions = idx + (level - a[idx]) / (b[idx] - a[idx])

    return t0 + np.asarray(positions, dtype=np.float64) * dt


def locate_t_m(fault_voltage: FloatArray, dt: float, offset: float, t0: float = 0.0) -> float:
    """Earliest instant where |u_f| reaches OFFSET with the required slope sign.

    Positive OFFSET picks the rising-magnitude crossing (just after a voltage
    zero), negative OFFSET the falling one (just before it). The crossing is
    linearly interpolated between the bracketing samples.
    """
    crossings = _level_crossings(fault_voltage, dt, offset, t0)
    if crossings.size == 0:
        raise NoCrossingError("no crossing with the requested slope sign", offset=offset)
    return float(crossings[0])


def locate_t_m_per_half_cycle(
    fault_voltage: FloatArray, dt: float, offset: float, t0: float = 0.0
) -> FloatArray:
    """t_m recomputed for every half-cycle of the fault voltage."""
    crossings = _level_crossings(fault_voltage, dt, offset, t0)
    if crossings.size == 0:
        raise NoCrossingError("no crossing with the requested slope sign", offset=offset)
    return crossings


def _periodic_anchors(profile: ResidualPowerProfile, lo: float, hi: float) -> FloatArray:
    """Anchors t_m + k*Time/2 whose first segment starts inside [lo, hi]."""
    half_period = profile.half_period
    first_start = profile.t_m - profile.duration / 2.0
    k_min = math.ceil((lo - first_start) / half_period - 1e-9)
    k_max = math.floor((hi - first_start) / half_period + 1e-9)
    return profile.t_m + np.arange(k_min, k_max + 1) * half_period


def _linear_pieces(
    profile: ResidualPowerProfile, anchors: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    """(lo, hi, value_at_lo, value_at_hi-) for every profile segment, time-sorted."""
    anchors = np.sort(np.asarray(anchors, dtype=np.float64))
    half = profile.duration / 2.0
    if anchors.size > 1 and float(np.min(np.diff(anchors))) < profile.duration:
        raise InvalidParameterError(
            "consecutive t_m anchors are closer than DURATION",
            duration=profile.duration,
        )

    seg1_lo = anchors - half
    seg1_hi = anchors + half
    next_start = np.append(seg1_lo[1:], np.inf)
    seg2_hi = np.minimum(anchors + profile.half_period - half, next_start)

    seg1_v_lo = profile.a1 * (seg1_lo - anchors - half) - profile.b1
    seg1_v_hi = profile.a1 * (seg1_hi - anchors - half) - profile.b1
    seg2_v_lo = profile.a2 * (seg1_hi - anchors - half) - profile.b2
    seg2_v_hi = profile.a2 * (seg2_hi - anchors - half) - profile.b2

    lo = np.column_stack([seg1_lo, seg1_hi]).ravel()
    hi = np.column_stack([seg1_hi, seg2_hi]).ravel()
    v_lo = np.column_stack([seg1_v_lo, seg2_v_lo]).ravel()
    v_hi = np.column_stack([seg1_v_hi, seg2_v_hi]).ravel()
    keep = hi > lo
    return lo[keep], hi[keep], v_lo[keep], v_hi[keep]


def residual_power(
    profile: ResidualPowerProfile, t: FloatArray, anchors: FloatArray | None = None
) -> FloatArray:
    """Evaluate P_res at times t (right-continuous at segment boundaries)."""
    t = np.asarray(t, dtype=np.float64)
    if anchors is None:
        span = profile.half_period
        anchors = _periodic_anchors(profile, float(t.min()) - span, float(t.max()) + span)
    lo, hi, v_lo, v_hi = _linear_pieces(profile, anchors)
    out = np.zeros_like(t)
    if lo.size == 0:
        return out
    idx = np.searchsorted(lo, t, side="right") - 1
    inside = (idx >= 0) & (t < hi[np.clip(idx, 0, None)])
    k = idx[inside]
    slope = (v_hi[k] - v_lo[k]) / (hi[k] - lo[k])
    out[inside] = v_lo[k] + slope * (t[inside] - lo[k])
    return out


def _cumulative_exponent(
    profile: ResidualPowerProfile, t: FloatArray, anchors: FloatArray
) -> FloatArray:
    """Running integral of P_res at times t, starting from zero.

    AIDEV-NOTE: Trapezoidal rule with the segment boundaries inserted as nodes.
    Between consecutive nodes P_res is linear, so every partial trapezoid is
    exact; a grid-only rule would smear the jumps at segment starts by up to
    b1*dt/2 and miss the EXTENT identity by more than 1% on coarse grids.
    """
    lo, hi, v_lo, v_hi = _linear_pieces(profile, anchors)
    out = np.zeros_like(t)
    if lo.size == 0:
        return out

    areas = 0.5 * (v_lo + v_hi) * (hi - lo)
    before = np.concatenate(([0.0], np.cumsum(areas)))
    idx = np.searchsorted(lo, t, side="right") - 1
    started = idx >= 0
    k = idx[started]
    tk = t[started]
    within = tk < hi[k]
    slope = (v_hi[k] - v_lo[k]) / (hi[k] - lo[k])
    value_at_t = v_lo[k] + slope * (np.minimum(tk, hi[k]) - lo[k])
    partial = 0.5 * (v_lo[k] + value_at_t) * (np.minimum(tk, hi[k]) - lo[k])
    out[started] = before[k] + np.where(within, partial, areas[k])
    return out


def arc_resistance_trace(
    params: ArcParameters,
    profile: ResidualPowerProfile,
    horizon: float,
    dt: float,
    *,
    anchors: FloatArray | None = None,
    onset: float = 0.0,
    exponent_cap: float = DEFAULT_EXPONENT_CAP,
) -> ArcResistanceTrace:
    """Integrate P_res into R_arc(t) on the grid t = k*dt, 0 <= t < horizon.

    R_arc sits at its baseline before onset. From onset on, the arc burns in
    its periodic steady state: the half-cycle profile that covers onset is
    integrated from its own start, so an onset inside a zero-off interval
    starts the trace part-way up that distortion. Pass the per-half-cycle
    anchors from locate_t_m_per_half_cycle to follow the fault voltage;
    without them the profile repeats every Time/2 from profile.t_m.
    """
    params.validate()
    if dt <= 0 or horizon <= 0 or not is_integral(horizon / dt):
        raise InvalidParameterError(
            "dt must be positive and divide the horizon", horizon=horizon, dt=dt
        )
    n_samples = int(round(horizon / dt))
    grid = np.arange(n_samples) * dt

    if anchors is None:
        anchors = _periodic_anchors(profile, onset - profile.half_period, horizon)
    anchors = np.asarray(anchors, dtype=np.float64)
    # keep the profile covering onset and every later one
    profile_end = anchors + profile.half_period - profile.duration / 2.0
    anchors = anchors[profile_end > onset + 1e-12]

    exponent = _cumulative_exponent(profile, grid, anchors)
    exponent[grid < onset - 1e-12] = 0.0
    peak_exponent = float(np.max(exponent)) if exponent.size else 0.0
    if peak_exponent > exponent_cap:
        raise DivergingProfileError(
            "ln R_arc exceeded the exponent cap",
            peak_exponent=peak_exponent,
            exponent_cap=exponent_cap,
        )
    logger.debug(
        "arc resistance: %d distortions, peak ln R_arc %.4f", anchors.size, peak_exponent
    )
    return ArcResistanceTrace(samples=R_ARC_BASELINE * np.exp(exponent), dt=dt)


def distortion_intervals(
    trace: ArcResistanceTrace, tolerance: float = 1e-3
) -> list[tuple[float, float]]:
    """Contiguous (start, length) intervals where R_arc sits above its baseline."""
    mask = trace.samples > trace.baseline * (1.0 + tolerance)
    return contiguous_runs(mask, trace.dt, trace.t0)
