# AIDEV-NOTE: Shared constants and parameter plumbing.
# feeder_sim, fault_detector and scenario_cli all import from here so scenario
# kinds, verdict names and the benchmark category mapping stay in one place.

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np
import numpy.typing as npt

from havokarc.errors import ConfigError

VALID_KINDS: list[str] = [
    "low_current_arc",
    "high_current_arc",
    "arc_wet_cement",
    "arc_dry_soil",
    "load_switch",
    "line_to_ground",
    "arc_with_motor_load",
    "arc_with_noise",
]

# Kinds whose fault branch is an arc (ArcParameters required)
ARC_KINDS: list[str] = [
    "low_current_arc",
    "high_current_arc",
    "arc_wet_cement",
    "arc_dry_soil",
    "arc_with_motor_load",
    "arc_with_noise",
]

# Kinds that need snr_db
NOISE_KINDS: list[str] = ["arc_with_noise"]

VERDICT_ARC = "ArcFault"
VERDICT_OTHER = "OtherFault"
VERDICT_NON_ARCING = "NonArcingDisturbance"
VERDICT_INCONCLUSIVE = "Inconclusive"
VERDICT_NO_EVENT = "NoEvent"

EXPECTED_VERDICTS: dict[str, str] = {
    "low_current_arc": VERDICT_ARC,
    "high_current_arc": VERDICT_ARC,
    "arc_wet_cement": VERDICT_ARC,
    "arc_dry_soil": VERDICT_ARC,
    "load_switch": VERDICT_NON_ARCING,
    "line_to_ground": VERDICT_OTHER,
    "arc_with_motor_load": VERDICT_ARC,
    "arc_with_noise": VERDICT_ARC,
}

# Disturbance-type labels of the benchmark cases, keyed by case id
CASE_CATEGORIES: dict[str, str] = {
    "A": "LCAF",
    "B": "HCAF",
    "C": "ACWC",
    "D": "ACDS",
    "E": "NAD",
    "F": "LGF",
    "G(a)": "LCAFIM",
    "G(b)": "HCAFIM",
    "H": "AFWN",
    "H60": "AFWN",
    "A2": "LCAF",
}

SUMMARY_COLUMNS: list[str] = [
    "case",
    "category",
    "location",
    "extent",
    "duration",
    "offset",
    "R_T",
    "peak_forcing",
    "forcing_level",
    "latency_ms",
    "verdict",
]

CSV_FLOAT_FORMAT = "%.9g"


def _coerce(name: str, value: Any, type_name: str) -> Any:
    """Coerce one parameter value to its declared type."""
    try:
        if type_name == "float":
            if isinstance(value, bool):
                raise TypeError("boolean is not a number")
            return float(value)
        if type_name == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError("not an integer")
            return int(value)
        if type_name == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "yes", "1", "false", "no", "0"):
                return value.lower() in ("true", "yes", "1")
            raise TypeError("not a boolean")
        if type_name in ("str", "path"):
            if isinstance(value, (dict, list)):
                raise TypeError("not a scalar")
            return str(value)
        if type_name == "list":
            if isinstance(value, (str, bytes)) or not isinstance(value, Iterable):
                raise TypeError("not a list")
            return list(value)
        if type_name == "dict":
            if not isinstance(value, Mapping):
                raise TypeError("not a mapping")
            return dict(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value for '{name}': {e}", name=name, value=value) from e
    return value


def validate_params(
    params: Mapping[str, Any],
    argument_spec: Mapping[str, Mapping[str, Any]],
    *,
    required_if: Sequence[tuple[str, Sequence[str], Sequence[str]]] = (),
    where: str = "parameters",
) -> dict[str, Any]:
    """Validate a flat parameter mapping against an argument spec.

    AIDEV-NOTE: Declarative option table, one entry per key. Unknown keys are
    rejected, defaults are applied, values are coerced to the declared type and
    checked against 'choices'. required_if entries are
    (key, values-that-trigger, keys-that-become-required).
    """
    unknown = sorted(set(params) - set(argument_spec))
    if unknown:
        raise ConfigError(f"Unsupported keys in {where}: {', '.join(unknown)}", where=where)

    result: dict[str, Any] = {}
    for name, option in argument_spec.items():
        value = params.get(name)
        if value is None:
            if option.get("required"):
                raise ConfigError(f"Missing required key '{name}' in {where}", where=where)
            result[name] = option.get("default")
            continue
        value = _coerce(name, value, option.get("type", "str"))
        choices = option.get("choices")
        if choices is not None and value not in choices:
            raise ConfigError(
                f"Value of '{name}' must be one of: {', '.join(map(str, choices))}, got: {value}",
                where=where,
            )
        result[name] = value

    for key, trigger_values, needed in required_if:
        if result.get(key) in trigger_values:
            missing = [n for n in needed if result.get(n) is None]
            if missing:
                raise ConfigError(
                    f"{key} is {result[key]} but the following are missing: {', '.join(missing)}",
                    where=where,
                )

    return result


def merge_defaults(defaults: Mapping[str, Any], item: Mapping[str, Any]) -> dict[str, Any]:
    """Merge per-item values over shared defaults (item keys win)."""
    merged = dict(defaults)
    merged.update(item)
    return merged


def contiguous_runs(
    mask: npt.NDArray[np.bool_], dt: float, t0: float = 0.0
) -> list[tuple[float, float]]:
    """Return (start_time, length_s) for each contiguous run of True samples."""
    if mask.size == 0:
        return []
    padded = np.concatenate(([False], mask.astype(bool), [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2]
    return [(t0 + float(a) * dt, float(b - a) * dt) for a, b in zip(starts, stops)]


def is_integral(value: float, tol: float = 1e-9) -> bool:
    """True when value is within tol of an integer."""
    return math.isclose(value, round(value), rel_tol=0.0, abs_tol=tol)
