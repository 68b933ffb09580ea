"""Command-line orchestrator: simulate -> decompose -> detect, then report.

Usage:
    havokarc run MANIFEST [--out DIR] [--reps N] [--q INT] [--seed INT]
                          [--thresholds a,b,c,d] [--jobs N]
    havokarc benchmark [--out DIR] [--reps N] [--q INT] [--seed INT]
                       [--thresholds a,b,c,d] [--jobs N]

Exit status: 0 when every run completed (verdicts are data, not failures),
2 for configuration or output-directory problems, 3 for simulation errors,
4 for decomposition or detection errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from havokarc import __version__
from havokarc.common import CASE_CATEGORIES, EXPECTED_VERDICTS, merge_defaults, validate_params
from havokarc.errors import ConfigError, HavokArcError
from havokarc.fault_detector import (
    DetectionReport,
    DetectionThresholds,
    batch_evaluate,
    classify,
    find_deviation,
)
from havokarc.feeder_sim import FeederConfig, ScenarioSpec, event_severity, simulate
from havokarc.havok_core import (
    DEFAULT_Q,
    analyze,
    attractor_to_csv,
    forcing_signal,
    model_report,
)
from havokarc.report import (
    render_table_csv,
    render_table_html,
    render_table_text,
    write_text_atomic,
)

logger = logging.getLogger(__name__)

DEFAULT_OUTPUT = "havokarc-out"

# Parameter sets of the published benchmark cases, in table order
BENCHMARK_CASES: list[dict[str, Any]] = [
    {
        "id": "A",
        "kind": "low_current_arc",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 1000.0,
    },
    {
        "id": "B",
        "kind": "high_current_arc",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 0.001,
    },
    {
        "id": "C",
        "kind": "arc_wet_cement",
        "extent": 50000.0,
        "duration": 0.007,
        "offset": 0.2,
        "grounding_resistance": 50.0,
    },
    {
        "id": "D",
        "kind": "arc_dry_soil",
        "extent": 4708.0,
        "duration": 0.007,
        "offset": 0.2,
        "grounding_resistance": 50.0,
    },
    {"id": "E", "kind": "load_switch", "switch_delta_power": 5.0},
    {"id": "F", "kind": "line_to_ground", "fault_resistance": 1.0},
    {
        "id": "G(a)",
        "kind": "arc_with_motor_load",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 1000.0,
    },
    {
        "id": "G(b)",
        "kind": "arc_with_motor_load",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 0.001,
    },
    {
        "id": "H",
        "kind": "arc_with_noise",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 1000.0,
        "snr_db": 70.0,
    },
    {
        "id": "H60",
        "kind": "arc_with_noise",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 1000.0,
        "snr_db": 60.0,
    },
    {
        "id": "A2",
        "kind": "low_current_arc",
        "extent": 5000.0,
        "duration": 0.00413,
        "offset": 0.2,
        "grounding_resistance": 1000.0,
        "location": "bus2-bus3",
    },
]

# One cycle of inception jitter so repetitions sweep the inception angle
BENCHMARK_DEFAULTS: dict[str, Any] = {"inception_jitter": 0.02}


def build_manifest_spec() -> dict[str, Any]:
    """Argument spec for the top level of a run manifest."""
    return {
        "output": {"type": "path", "default": DEFAULT_OUTPUT},
        "reps": {"type": "int", "default": 1},
        "seed": {"type": "int", "default": 0},
        "q": {"type": "int", "default": DEFAULT_Q},
        "jobs": {"type": "int", "default": 1},
        "alignment": {"type": "str", "default": "end", "choices": ["end", "start"]},
        "thresholds": {"type": "raw"},  # list or "a,b,c,d"
        "baseline_window": {"type": "list"},
        "deviation_factor": {"type": "float", "default": 5.0},
        "deviation_floor": {"type": "float", "default": 1e-4},
        "recurrence_min": {"type": "float", "default": 0.01},
        "other_severity": {"type": "float", "default": 1.0},
        "feeder": {"type": "dict", "default": {}},
        "defaults": {"type": "dict", "default": {}},
        "scenarios": {"type": "list", "default": []},
    }


@dataclass(frozen=True)
class ScenarioEntry:
    spec: ScenarioSpec
    seed: int | None = None


@dataclass(frozen=True)
class RunManifest:
    """Everything one `run` needs: scenarios, feeder, detector and output."""

    scenarios: list[ScenarioEntry] = field(default_factory=list)
    output: Path = Path(DEFAULT_OUTPUT)
    feeder: FeederConfig = field(default_factory=FeederConfig)
    thresholds: DetectionThresholds = field(default_factory=DetectionThresholds)
    q: int = DEFAULT_Q
    reps: int = 1
    seed: int = 0
    jobs: int = 1
    alignment: str = "end"

    def validate(self) -> None:
        if self.reps < 1:
            raise ConfigError("reps must be at least 1", reps=self.reps)
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1", jobs=self.jobs)
        if self.q < 2:
            raise ConfigError("q must be at least 2", q=self.q)
        seen: set[str] = set()
        for entry in self.scenarios:
            if entry.spec.id in seen:
                raise ConfigError(f"Duplicate scenario id: {entry.spec.id}", scenario=entry.spec.id)
            seen.add(entry.spec.id)


@dataclass(frozen=True)
class CaseResult:
    """Outcome of one (scenario, repetition) pipeline run."""

    spec: ScenarioSpec
    rep: int
    seed: int
    report: DetectionReport
    rank: int


def _read_yaml(path: Path) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}", path=str(path)) from e
    except yaml.YAMLError as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}", path=str(path)) from e


def _require_mapping(doc: Any, path: Path) -> Mapping[str, Any]:
    if doc is None:
        return {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"{path} must hold a mapping at the top level", path=str(path))
    return doc


def parse_thresholds(value: Any) -> list[float]:
    """Four ascending band edges from 'a,b,c,d' or a list."""
    try:
        items = value.split(",") if isinstance(value, str) else list(value)
        edges = [float(x) for x in items]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid thresholds: {value}", thresholds=value) from e
    if len(edges) != 4:
        raise ConfigError("thresholds need exactly four values", thresholds=value)
    return edges


def load_scenario(path: str | Path, period: float = 0.02) -> ScenarioSpec:
    """Load one flat scenario document."""
    path = Path(path)
    doc = _require_mapping(_read_yaml(path), path)
    return ScenarioSpec.from_params(doc, period=period)


def _scenario_entry(
    item: Any, defaults: Mapping[str, Any], base_dir: Path, period: float
) -> ScenarioEntry:
    if not isinstance(item, Mapping):
        raise ConfigError("scenario entries must be mappings", entry=item)
    params = dict(item)
    ref = params.pop("file", None)
    if ref is not None:
        ref_path = Path(ref)
        if not ref_path.is_absolute():
            ref_path = base_dir / ref_path
        params = merge_defaults(_require_mapping(_read_yaml(ref_path), ref_path), params)
    params = merge_defaults(defaults, params)
    spec = ScenarioSpec.from_params(params, period=period)
    seed = params.get("seed")
    return ScenarioEntry(spec=spec, seed=None if seed is None else int(seed))


def build_manifest(
    doc: Mapping[str, Any], base_dir: Path = Path("."), where: str = "manifest"
) -> RunManifest:
    """Validate a manifest document and resolve its scenario entries."""
    values = validate_params(doc, build_manifest_spec(), where=where)
    feeder = FeederConfig.from_params(values["feeder"])

    threshold_args: dict[str, Any] = {
        key: values[key]
        for key in ("deviation_factor", "deviation_floor", "recurrence_min", "other_severity")
    }
    if values["baseline_window"] is not None:
        window = values["baseline_window"]
        if len(window) != 2:
            raise ConfigError("baseline_window needs [start, stop]", baseline_window=window)
        threshold_args["baseline_window"] = (float(window[0]), float(window[1]))
    if values["thresholds"] is not None:
        thresholds = DetectionThresholds.from_edges(
            parse_thresholds(values["thresholds"]), **threshold_args
        )
    else:
        thresholds = DetectionThresholds(**threshold_args)

    entries = [
        _scenario_entry(item, values["defaults"], base_dir, feeder.period)
        for item in values["scenarios"]
    ]
    manifest = RunManifest(
        scenarios=entries,
        output=Path(values["output"]),
        feeder=feeder,
        thresholds=thresholds,
        q=values["q"],
        reps=values["reps"],
        seed=values["seed"],
        jobs=values["jobs"],
        alignment=values["alignment"],
    )
    manifest.validate()
    return manifest


def load_manifest(path: str | Path) -> RunManifest:
    """Load a YAML run manifest; `file:` references resolve next to it."""
    path = Path(path)
    doc = _require_mapping(_read_yaml(path), path)
    return build_manifest(doc, base_dir=path.parent, where=str(path))


def benchmark_manifest(output: str | Path = "havokarc-benchmark") -> RunManifest:
    """The built-in benchmark cases as a manifest."""
    return build_manifest(
        {
            "output": str(output),
            "defaults": BENCHMARK_DEFAULTS,
            "scenarios": BENCHMARK_CASES,
        },
        where="built-in benchmark",
    )


def apply_overrides(manifest: RunManifest, **overrides: Any) -> RunManifest:
    """Replace manifest fields with the non-None command-line values."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    edges = changes.pop("thresholds", None)
    if edges is not None:
        nonarc_max, arc_min, arc_max, other_min = parse_thresholds(edges)
        changes["thresholds"] = dataclasses.replace(
            manifest.thresholds,
            nonarc_max=nonarc_max,
            arc_min=arc_min,
            arc_max=arc_max,
            other_min=other_min,
        )
    if "output" in changes:
        changes["output"] = Path(changes["output"])
    updated = dataclasses.replace(manifest, **changes)
    updated.validate()
    return updated


def prepare_output(output: Path) -> None:
    """Create the output directory or fail with a ConfigError."""
    try:
        output.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Cannot create output directory: {e}", output=str(output)) from e
    if not os.access(output, os.W_OK | os.X_OK):
        raise ConfigError("Output directory is not writable", output=str(output))


def run_case(manifest: RunManifest, entry: ScenarioEntry, rep: int) -> CaseResult:
    """One pipeline pass for one repetition; writes the per-run artifacts."""
    spec = entry.spec
    seed = (manifest.seed if entry.seed is None else entry.seed) + rep
    stem = f"{spec.id}_rep{rep}"
    try:
        # Step 1: Generate the feeder-head current
        trace = simulate(manifest.feeder, spec, seed)

        # Step 2: Decompose and extract the forcing signal
        model = analyze(trace, q=manifest.q, alignment=manifest.alignment)
        forcing = forcing_signal(model)

        # Step 3: Detect and classify against the known onset
        deviation = find_deviation(forcing, manifest.thresholds)
        severity = event_severity(trace, manifest.thresholds.baseline_window)
        report = classify(
            forcing,
            deviation,
            manifest.thresholds,
            fault_start=trace.fault_start,
            window_end=trace.fault_end,
            severity=severity,
            scenario=spec.id,
            kind=spec.kind,
            location=spec.location,
        )
    except HavokArcError as e:
        e.context.setdefault("scenario", spec.id)
        e.context.setdefault("rep", rep)
        raise

    # Step 4: Per-run artifacts
    trace.to_csv(manifest.output / f"{stem}_trace.csv")
    forcing.to_csv(manifest.output / f"{stem}_forcing.csv")
    write_text_atomic(manifest.output / f"{stem}_model.txt", model_report(model))
    attractor_to_csv(model, manifest.output / f"{stem}_attractor.csv")
    logger.info("%s rep %d: %s (rank %d)", spec.id, rep, report.verdict, model.rank)
    return CaseResult(spec=spec, rep=rep, seed=seed, report=report, rank=model.rank)


def execute(manifest: RunManifest) -> list[CaseResult]:
    """Run every (scenario, repetition) pair; results come back in manifest order."""
    work = [(entry, rep) for entry in manifest.scenarios for rep in range(manifest.reps)]
    with ThreadPoolExecutor(max_workers=manifest.jobs) as pool:
        futures = [pool.submit(run_case, manifest, entry, rep) for entry, rep in work]
        try:
            return [future.result() for future in futures]
        except BaseException:
            for future in futures:
                future.cancel()
            raise


def summary_row(result: CaseResult, reps: int = 1) -> dict[str, Any]:
    """One summary-table row with the benchmark table's columns."""
    spec, report = result.spec, result.report
    arc = spec.arc
    if arc is not None:
        r_t: float | None = arc.grounding_resistance
    elif spec.kind == "line_to_ground":
        r_t = spec.fault_resistance
    else:
        r_t = None
    return {
        "case": spec.id if reps == 1 else f"{spec.id}/{result.rep}",
        "category": CASE_CATEGORIES.get(spec.id, spec.kind),
        "location": spec.location,
        "extent": arc.extent if arc else None,
        "duration": arc.duration if arc else None,
        "offset": arc.offset if arc else None,
        "R_T": r_t,
        "peak_forcing": report.peak_forcing,
        "forcing_level": report.forcing_level,
        "latency_ms": report.latency_ms,
        "verdict": str(report.verdict),
    }


def write_summaries(manifest: RunManifest, results: Sequence[CaseResult]) -> list[dict[str, Any]]:
    """Write reports.txt, accuracy.txt and the summary table in three formats."""
    rows = [summary_row(r, manifest.reps) for r in results]
    reports = [r.report for r in results]
    out = manifest.output
    write_text_atomic(out / "reports.txt", "".join(r.to_record() + "\n" for r in reports))
    write_text_atomic(out / "accuracy.txt", batch_evaluate(reports).render())
    write_text_atomic(out / "summary.txt", render_table_text(rows))
    write_text_atomic(out / "summary.csv", render_table_csv(rows))
    write_text_atomic(out / "summary.html", render_table_html(rows, "havokarc detection summary"))
    return rows


def run(manifest: RunManifest) -> int:
    """Execute a manifest and return the process exit status."""
    try:
        prepare_output(manifest.output)
        if not manifest.scenarios:
            logger.warning("manifest lists no scenarios; writing an empty summary")
        results = execute(manifest)
        write_summaries(manifest, results)
    except HavokArcError as e:
        logger.error("%s", e)
        return e.exit_code
    except OSError as e:
        logger.error("cannot write artifacts: %s", e)
        return ConfigError.exit_code
    return 0


def reproduce_benchmark(manifest: RunManifest | None = None) -> list[dict[str, Any]]:
    """Run the built-in benchmark cases and return the summary rows.

    Rows whose verdict differs from the expected category are logged as
    warnings; they do not fail the run.
    """
    manifest = manifest or benchmark_manifest()
    prepare_output(manifest.output)
    results = execute(manifest)
    rows = write_summaries(manifest, results)
    for result, row in zip(results, rows):
        expected = EXPECTED_VERDICTS[result.spec.kind]
        if row["verdict"] != expected:
            logger.warning(
                "case %s (%s): verdict %s, expected %s",
                row["case"],
                row["category"],
                row["verdict"],
                expected,
            )
    return rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="havokarc",
        description="Simulate arc-fault feeder currents and detect them with HAVOK forcing",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="Output directory for artifacts")
    common.add_argument("--reps", type=int, help="Repetitions per scenario")
    common.add_argument("--q", type=int, dest="embedding", help="Embedding dimension")
    common.add_argument("--seed", type=int, help="Base random seed")
    common.add_argument("--thresholds", help="Four ascending band edges: a,b,c,d")
    common.add_argument("--jobs", type=int, help="Worker threads")

    commands = parser.add_subparsers(dest="command", required=True)
    run_parser = commands.add_parser("run", parents=[common], help="Run a scenario manifest")
    run_parser.add_argument("manifest", help="Path to the YAML manifest")
    commands.add_parser("benchmark", parents=[common], help="Reproduce the benchmark table")
    return parser


def _configure_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose, args.quiet)

    overrides = {
        "output": args.out,
        "reps": args.reps,
        "q": args.embedding,
        "seed": args.seed,
        "thresholds": args.thresholds,
        "jobs": args.jobs,
    }
    try:
        if args.command == "run":
            manifest = apply_overrides(load_manifest(args.manifest), **overrides)
            return run(manifest)
        manifest = apply_overrides(benchmark_manifest(), **overrides)
        rows = reproduce_benchmark(manifest)
    except HavokArcError as e:
        logger.error("%s", e)
        return e.exit_code
    except OSError as e:
        logger.error("cannot write artifacts: %s", e)
        return ConfigError.exit_code
    print(render_table_text(rows), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
