"""HAVOK decomposition of a sampled current trace.

Pipeline: Hankel stacking of q delay copies, economy SVD, hard-threshold
rank selection, fourth-order derivative of the leading eigen time-delay
coordinates, and a least-squares fit of the forced linear model

    d/dt v = A v + B v_r

where v holds the first r-1 columns of V and v_r (the r-th column) is the
forcing signal consumed by fault_detector.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import scipy.linalg

from havokarc.errors import (
    AnalysisError,
    DecompositionError,
    RankDeficientError,
    TraceTooShortError,
)
from havokarc.feeder_sim import CurrentTrace
from havokarc.report import format_number, write_csv

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

DEFAULT_Q = 40
DEFAULT_MAX_CONDITION = 1e12
STENCIL_TRIM = 2
ALIGNMENTS = ("end", "start")


@dataclass(frozen=True, eq=False)
class HankelMatrix:
    """q delay-shifted copies of the trace; data[i, j] = x[i + j]."""

    data: FloatArray
    dt: float
    t0: float = 0.0

    @property
    def q(self) -> int:
        return int(self.data.shape[0])

    @property
    def p(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True, eq=False)
class SvdFactors:
    """Economy SVD H = U diag(s) V^T with the sign convention applied."""

    u: FloatArray
    s: FloatArray
    v: FloatArray


@dataclass(frozen=True, eq=False)
class Derivative:
    """Central-difference derivative; `trim` samples are missing at each edge."""

    values: FloatArray
    dt: float
    trim: int = STENCIL_TRIM


@dataclass(frozen=True, eq=False)
class HavokModel:
    rank: int
    a: FloatArray  # (r-1) x (r-1), 1/s
    b: FloatArray  # (r-1) x 1, 1/s
    v: FloatArray  # p x (r-1)
    v_r: FloatArray  # p, unit norm
    residual: float
    singular_values: FloatArray
    dt: float
    start_time: float = 0.0
    q: int = 1
    condition: float = 1.0
    alignment: str = "end"


@dataclass(frozen=True, eq=False)
class ForcingSeries:
    """Time-stamped forcing signal v_r.

    span is the time covered by one delay window, (q - 1) * dt.
    """

    times: FloatArray
    values: FloatArray
    alignment: str = "end"
    span: float = 0.0

    def to_csv(self, path: str | Path) -> None:
        write_csv(path, ["time_s", "v_r"], [self.times, self.values])


def build_hankel(trace: CurrentTrace, q: int = DEFAULT_Q) -> HankelMatrix:
    """Stack q delayed copies of the trace into a q x (N - q + 1) matrix."""
    x = np.asarray(trace.samples, dtype=np.float64)
    if q < 2:
        raise TraceTooShortError("embedding dimension q must be at least 2", q=q)
    if x.size < 2 * q:
        raise TraceTooShortError(
            "trace is shorter than twice the embedding dimension", samples=x.size, q=q
        )
    data = scipy.linalg.hankel(x[:q], x[q - 1 :])
    return HankelMatrix(data=data, dt=trace.dt, t0=trace.t0)


def decompose(h: HankelMatrix) -> SvdFactors:
    """Economy SVD with deterministic signs.

    Each U column is flipped so its largest-magnitude entry is positive; the
    matching V column is flipped with it, leaving U diag(s) V^T unchanged.
    """
    if not np.all(np.isfinite(h.data)):
        raise DecompositionError("Hankel matrix holds non-finite entries")
    try:
        u, s, vt = scipy.linalg.svd(h.data, full_matrices=False)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise DecompositionError(f"SVD failed: {e}", q=h.q, p=h.p) from e
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(s)) and np.all(np.isfinite(vt))):
        raise DecompositionError("SVD produced non-finite factors", q=h.q, p=h.p)

    pivots = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivots, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return SvdFactors(u=u * signs, s=s, v=vt.T * signs)


def optimal_threshold_coefficient(beta: float) -> float:
    """omega(beta) of the median-based optimal hard threshold, beta in (0, 1]."""
    return 0.56 * beta**3 - 0.95 * beta**2 + 1.82 * beta + 1.43


def select_rank(s: FloatArray, q: int, p: int) -> int:
    """Count singular values above omega(beta) * median(s), clamped to [2, len(s)].

    A flat spectrum never clears the threshold (omega > 1) and yields 2.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.size < 2:
        raise DecompositionError("need at least two singular values", count=s.size)
    beta = min(q, p) / max(q, p)
    tau = optimal_threshold_coefficient(beta) * float(np.median(s))
    r = int(np.count_nonzero(s > tau))
    return max(2, min(r, s.size))


def differentiate(series: FloatArray, dt: float) -> Derivative:
    """Fourth-order central difference along axis 0; drops two samples per edge."""
    f = np.asarray(series, dtype=np.float64)
    if f.shape[0] < 2 * STENCIL_TRIM + 1:
        raise TraceTooShortError(
            "the fourth-order stencil needs at least five samples", samples=f.shape[0]
        )
    values = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * dt)
    return Derivative(values=values, dt=dt)


def _as_columns(a: Any) -> FloatArray:
    a = np.asarray(a, dtype=np.float64)
    return a[:, np.newaxis] if a.ndim == 1 else a


def identify(
    v: FloatArray,
    dv: Derivative | FloatArray,
    v_r: FloatArray,
    *,
    dt: float = 1.0,
    start_time: float = 0.0,
    q: int = 1,
    singular_values: FloatArray | None = None,
    max_condition: float = DEFAULT_MAX_CONDITION,
) -> HavokModel:
    """Least-squares fit of dv = A v + B v_r.

    v and v_r are full-length coordinate series; when dv is a Derivative its
    trim is applied to them so all three cover the same window. Regressor
    columns that are identically zero get zero coefficients and are left out
    of the fit.
    """
    coords = _as_columns(v)
    forcing = np.asarray(v_r, dtype=np.float64).ravel()
    if isinstance(dv, Derivative):
        trim, rates = dv.trim, _as_columns(dv.values)
    else:
        trim, rates = 0, _as_columns(dv)
    n = coords.shape[0]
    window = slice(trim, n - trim)
    x = np.column_stack([coords[window], forcing[window]])
    if x.shape[0] != rates.shape[0] or rates.shape[1] != coords.shape[1]:
        raise AnalysisError(
            "coordinates and derivatives are not aligned",
            coords=coords.shape,
            rates=rates.shape,
        )

    width = x.shape[1]
    active = np.any(x != 0.0, axis=0)
    weights = np.zeros((width, rates.shape[1]))
    condition = 1.0
    if np.any(active):
        xa = x[:, active]
        sv = scipy.linalg.svdvals(xa)
        condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
        if condition > max_condition:
            raise RankDeficientError(
                "regressor matrix is rank deficient", condition, columns=int(xa.shape[1])
            )
        try:
            solution, _, _, _ = scipy.linalg.lstsq(xa, rates)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise DecompositionError(f"least-squares fit failed: {e}") from e
        weights[active] = solution

    residual = float(np.linalg.norm(rates - x @ weights))
    a = weights[:-1].T.copy()
    b = weights[-1:].T.copy()
    spectrum = (
        np.asarray(singular_values, dtype=np.float64)
        if singular_values is not None
        else np.array([], dtype=np.float64)
    )
    return HavokModel(
        rank=width,
        a=a,
        b=b,
        v=coords,
        v_r=forcing,
        residual=residual,
        singular_values=spectrum,
        dt=dt,
        start_time=start_time,
        q=q,
        condition=condition,
    )


def forcing_signal(model: HavokModel, alignment: str | None = None) -> ForcingSeries:
    """Stamp v_r on the trace time axis.

    Column j of V spans samples j..j+q-1. "end" stamps it at the last of those
    samples so nothing in v_r can precede its cause; "start" stamps it at j.
    """
    alignment = alignment or model.alignment
    if alignment not in ALIGNMENTS:
        raise AnalysisError(f"Unknown forcing alignment: {alignment}", choices=ALIGNMENTS)
    shift = (model.q - 1) * model.dt if alignment == "end" else 0.0
    times = model.start_time + shift + np.arange(model.v_r.size) * model.dt
    return ForcingSeries(
        times=times,
        values=model.v_r.copy(),
        alignment=alignment,
        span=(model.q - 1) * model.dt,
    )


def analyze(
    trace: CurrentTrace,
    q: int = DEFAULT_Q,
    alignment: str = "end",
    max_condition: float = DEFAULT_MAX_CONDITION,
) -> HavokModel:
    """Full decomposition: Hankel, SVD, rank, derivative, regression."""
    if alignment not in ALIGNMENTS:
        raise AnalysisError(f"Unknown forcing alignment: {alignment}", choices=ALIGNMENTS)
    h = build_hankel(trace, q)
    factors = decompose(h)
    r = select_rank(factors.s, h.q, h.p)
    coords = factors.v[:, : r - 1]
    rates = differentiate(coords, h.dt)
    model = identify(
        coords,
        rates,
        factors.v[:, r - 1],
        dt=h.dt,
        start_time=h.t0,
        q=h.q,
        singular_values=factors.s,
        max_condition=max_condition,
    )
    logger.debug(
        "%s: q=%d p=%d rank=%d residual=%.3e", trace.label, h.q, h.p, r, model.residual
    )
    return dataclasses.replace(model, alignment=alignment)


def truncation_error(factors: SvdFactors, r: int) -> float:
    """Frobenius error of the best rank-r approximation."""
    return float(np.sqrt(np.sum(factors.s[r:] ** 2)))


def reconstruction(factors: SvdFactors, r: int) -> FloatArray:
    """Rank-r reconstruction U_r diag(s_r) V_r^T."""
    return (factors.u[:, :r] * factors.s[:r]) @ factors.v[:, :r].T


def shift_invariance_residual(h: HankelMatrix, factors: SvdFactors, r: int) -> float:
    """Relative residual of projecting the one-step-shifted Hankel onto span(U_r)."""
    shifted = h.data[:, 1:]
    basis = factors.u[:, :r]
    projected = basis @ (basis.T @ shifted)
    norm = float(np.linalg.norm(shifted))
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(shifted - projected)) / norm


def attractor_coordinates(model: HavokModel, count: int = 3) -> FloatArray:
    """First `count` eigen time-delay coordinates (at most r), one per column."""
    coords = np.column_stack([model.v, model.v_r])
    return coords[:, : max(1, min(count, coords.shape[1]))]


def attractor_to_csv(model: HavokModel, path: str | Path, count: int = 3) -> None:
    """Write the embedded attractor as time_s,v1,v2,... on the forcing time axis."""
    coords = attractor_coordinates(model, count)
    times = forcing_signal(model).times
    header = ["time_s", *(f"v{k + 1}" for k in range(coords.shape[1]))]
    write_csv(path, header, [times, *coords.T])


def _matrix_lines(matrix: FloatArray) -> list[str]:
    return ["  " + " ".join(format_number(float(x)) for x in row) for row in matrix]


def model_report(model: HavokModel) -> str:
    """Plain-text summary of one identified model."""
    lines = [
        f"rank: {model.rank}",
        f"embedding_q: {model.q}",
        f"dt_s: {format_number(model.dt)}",
        "singular_values: " + " ".join(format_number(float(s)) for s in model.singular_values),
        "A:",
        *_matrix_lines(model.a),
        "B:",
        *_matrix_lines(model.b),
        f"residual: {format_number(model.residual)}",
        f"condition: {format_number(model.condition)}",
    ]
    return "\n".join(lines) + "\n"
