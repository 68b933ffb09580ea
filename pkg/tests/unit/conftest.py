"""Shared test fixtures for havokarc unit tests.

AIDEV-NOTE: Parameter sets mirror the built-in benchmark cases so individual
tests can state expectations against known EXTENT/DURATION/R_T values.
"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path
from typing import Any

import numpy as np
import pytest
import yaml

from havokarc.arc_model import ArcParameters
from havokarc.feeder_sim import CurrentTrace, FeederConfig, ScenarioSpec

DT = 5e-5


@pytest.fixture
def feeder_config() -> FeederConfig:
    """Default 12 kV / 50 Hz feeder sampled at 20 kHz for 0.5 s."""
    return FeederConfig()


@pytest.fixture
def case_a() -> ArcParameters:
    """Low-current arc: EXTENT 5000, DURATION 4.13 ms, OFFSET 0.2 kV, R_T 1000."""
    return ArcParameters(extent=5000.0, duration=0.00413, offset=0.2, grounding_resistance=1000.0)


@pytest.fixture
def case_b() -> ArcParameters:
    """High-current arc: same distortion as case A with R_T 1 mOhm."""
    return ArcParameters(extent=5000.0, duration=0.00413, offset=0.2, grounding_resistance=0.001)


@pytest.fixture
def source_voltage() -> np.ndarray:
    """12 kV-peak 50 Hz sine sampled at 20 kHz over 0.5 s."""
    t = np.arange(10000) * DT
    return 12.0 * np.sin(2.0 * np.pi * 50.0 * t)


@pytest.fixture
def make_trace() -> Callable[..., CurrentTrace]:
    """Factory wrapping a raw array into a CurrentTrace."""

    def _make(samples: Any, dt: float = DT, fault_start: float = 0.2) -> CurrentTrace:
        return CurrentTrace(
            samples=np.asarray(samples, dtype=np.float64),
            dt=dt,
            fault_start=fault_start,
            label="test",
        )

    return _make


@pytest.fixture
def arc_scenario() -> Callable[..., ScenarioSpec]:
    """Factory for arc scenarios of a given kind."""

    def _make(params: ArcParameters, kind: str = "low_current_arc", **kwargs: Any) -> ScenarioSpec:
        return ScenarioSpec(kind=kind, arc=params, id=kwargs.pop("id", kind), **kwargs)

    return _make


@pytest.fixture
def write_yaml(tmp_path: Path) -> Callable[[str, Any], Path]:
    """Write a YAML document under tmp_path and return its path."""

    def _write(name: str, doc: Any) -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(doc, sort_keys=False))
        return path

    return _write
