from __future__ import annotations

import functools
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable

import click
from rich.table import Table

from counter_attest.attacks.evaluation import EvaluationReport, render_reliability_table
from counter_attest.cfg.exceptions import InvalidTraceError
from counter_attest.cfg.loader import cfg_digest, load_cfg, load_cfg_file
from counter_attest.cfg.trace import (
    BlockTrace,
    MeasurementLog,
    load_measurement_log_file,
    load_trace_file,
    trace_to_json,
    validate_trace,
)
from counter_attest.demos.programs import DEMOS, build_demo
from counter_attest.exceptions import UserError
from counter_attest.hpc.counters import CounterConfig
from counter_attest.hpc.exceptions import CounterConfigError
from counter_attest.hpc.events import get_event_table
from counter_attest.hpc.lattice import lattice_density_score, rank_counter_subsets
from counter_attest.manifest.experiment import ManifestRun
from counter_attest.manifest.registry import ManifestRegistry
from counter_attest.preprocess.database import SegmentStats, database_stats
from counter_attest.preprocess.expansion import DEFAULT_NODE_BUDGET
from counter_attest.preprocess.segments import (
    DEFAULT_CYCLE_BUDGET,
    DEFAULT_PATH_BUDGET,
    PreprocessBudgets,
    enumerate_segments,
)
from counter_attest.protocol.enums import TracerDesign
from counter_attest.protocol.explorer import (
    DEFAULT_STATE_BUDGET,
    ExplorationResult,
    adversarial_alphabet,
    explore,
    honest_alphabet,
)
from counter_attest.protocol.runner import (
    ProtocolRun,
    load_scenario_file,
    run_attested_session,
    run_scenario,
)
from counter_attest.protocol.world import World
from counter_attest.tracesim.simulate import measure
from counter_attest.tracesim.walk import WalkConstraints, random_valid_walk
from counter_attest.utils.cli_tools import dump_json, get_console, render_plain, rich_print
from counter_attest.verifier.cone import DEFAULT_SOLVER_NODES
from counter_attest.verifier.exceptions import DigestMismatchError
from counter_attest.verifier.loader import check_digest, load_database_file
from counter_attest.verifier.session import (
    TraceVerification,
    config_from_log,
    verify_trace_measurements,
)

EXIT_CRASH = 1
EXIT_USER_ERROR = 2
EXIT_REJECTED = 3
EXIT_DIGEST_MISMATCH = 4

DEFAULT_COUNTERS = "board3"

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, path_type=Path)


def guarded(command: Callable[..., None]) -> Callable[..., None]:
    """Maps anticipated failures to exit codes; anything else is a crash."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        start_time = time.monotonic()
        try:
            command(*args, **kwargs)
            elapsed_time = time.monotonic() - start_time
            rich_print(f"[green]Completed in {elapsed_time:.2f} seconds")
        except DigestMismatchError as ex:
            rich_print(f"[red]{str(ex)}")
            sys.exit(EXIT_DIGEST_MISMATCH)
        except UserError as ex:
            rich_print(f"[red]{str(ex)}")
            sys.exit(EXIT_USER_ERROR)
        except click.ClickException:
            raise
        except Exception:
            get_console().print_exception(show_locals=False)
            sys.exit(EXIT_CRASH)

    return wrapper


def parse_offset(
    ctx: click.Context, param: click.Parameter, value: str | None
) -> tuple[int, ...] | None:
    if value is None:
        return None
    try:
        result = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter("expected comma-separated integers")
    if any(v < 0 for v in result):
        raise click.BadParameter("offsets can't be negative")
    return result


format_option = click.option(
    "--format",
    "output_format",
    type=click.Choice(["text", "json"]),
    default="text",
    show_default=True,
    help="Report format written to stdout.",
)
offset_option = click.option(
    "--offset",
    callback=parse_offset,
    help="Constant per-snapshot footprint, one comma-separated entry per register.",
)
table_option = click.option(
    "--table",
    "table_path",
    default="default",
    show_default=True,
    help='Event table file, or "default" for the bundled one.',
)


def emit(text: str) -> None:
    click.echo(text, nl=False)


def write_document(path: Path | None, value: Any) -> None:
    if path is None:
        emit(dump_json(value))
        return
    path.write_text(dump_json(value))
    rich_print(f"[green]Wrote {path}")


def plural(count: int, noun: str) -> str:
    return f"{count} {noun}{'s' if count != 1 else ''}"


@click.group()
def cli_main() -> None:
    """Control flow attestation from hardware performance counter snapshots."""


# Preprocessing


def render_stats(stats: list[SegmentStats]) -> str:
    table = Table(title="Segments")
    for column in ("Start", "End", "Paths", "Loops", "Skip"):
        table.add_column(column)
    for s in stats:
        table.add_row(s.start, s.end, str(s.paths), str(s.loops), "yes" if s.skip else "")
    return render_plain(table)


@cli_main.command()
@click.option("--cfg", "cfg_path", type=EXISTING_FILE, required=True)
@table_option
@click.option("--out", "out_path", type=OUTPUT_FILE, required=True)
@click.option(
    "--budget-paths",
    type=click.IntRange(min=1),
    default=DEFAULT_PATH_BUDGET,
    show_default=True,
    help="Maximum number of simple paths per segment.",
)
@click.option(
    "--budget-cycles",
    type=click.IntRange(min=1),
    default=DEFAULT_CYCLE_BUDGET,
    show_default=True,
    help="Maximum number of simple cycles per looping region.",
)
@click.option(
    "--budget-nodes",
    type=click.IntRange(min=1),
    default=DEFAULT_NODE_BUDGET,
    show_default=True,
    help="Maximum number of (block, call stack) nodes.",
)
@format_option
@guarded
def preprocess(
    cfg_path: Path,
    table_path: str,
    out_path: Path,
    budget_paths: int,
    budget_cycles: int,
    budget_nodes: int,
    output_format: str,
) -> None:
    """Builds the segment database of a CFG."""
    table = get_event_table(table_path)
    cfg = load_cfg_file(cfg_path, table)
    with get_console().status("[blue]Enumerating segments..."):
        db = enumerate_segments(
            cfg, table, PreprocessBudgets(budget_paths, budget_cycles, budget_nodes)
        )
    out_path.write_text(dump_json(db.to_json()))
    stats = database_stats(db)
    rich_print(f"[yellow]Found {plural(len(stats), 'segment')}")
    if output_format == "json":
        emit(dump_json({"cfg_digest": db.cfg_digest, "segments": [s.to_json() for s in stats]}))
    else:
        emit(render_stats(stats))


# Verification


def render_verification(verification: TraceVerification, include_timings: bool) -> str:
    table = Table(title="Verification")
    columns = ["#", "Start", "End", "Verdict", "Candidates", "Nodes", "Cached", "Detail"]
    if include_timings:
        columns.append("Seconds")
    for column in columns:
        table.add_column(column)
    for i, (m, r) in enumerate(zip(verification.measurements, verification.results)):
        detail = r.reason or ("" if r.witness is None else str(list(r.witness)))
        row = [
            str(i),
            m.start_block,
            m.end_block,
            r.verdict.value,
            str(r.candidates_tried),
            str(r.solver_nodes),
            "yes" if r.cache_hit else "",
            detail,
        ]
        if include_timings:
            row.append(f"{r.elapsed:.4f}")
        table.add_row(*row)
    summary = verification.to_json()["summary"]
    lines = [f"{key}: {summary[key]}" for key in sorted(summary)]
    return render_plain(table) + "\n".join(lines) + "\n"


@cli_main.command()
@click.option("--db", "db_path", type=EXISTING_FILE, required=True)
@click.option("--measurements", "measurements_path", type=EXISTING_FILE, required=True)
@click.option(
    "--cfg",
    "cfg_path",
    type=EXISTING_FILE,
    help="Also check that the database was built from this CFG.",
)
@click.option(
    "--counters",
    help="Register layout of the measurements; read from the measurement file by default.",
)
@offset_option
@click.option("--no-cache", is_flag=True, help="Solve every segment, even repeated ones.")
@click.option(
    "--max-nodes",
    type=click.IntRange(min=1),
    default=DEFAULT_SOLVER_NODES,
    show_default=True,
    help="Branch-and-bound node budget per cone membership query.",
)
@click.option("--timings", is_flag=True, help="Include wall-clock timings in the report.")
@format_option
@guarded
def verify(
    db_path: Path,
    measurements_path: Path,
    cfg_path: Path | None,
    counters: str | None,
    offset: tuple[int, ...] | None,
    no_cache: bool,
    max_nodes: int,
    timings: bool,
    output_format: str,
) -> None:
    """Verifies a measurement log against a segment database."""
    db = load_database_file(db_path)
    log = load_measurement_log_file(measurements_path)
    check_digest(db, f"Measurements {measurements_path}", log.cfg_ref)
    if cfg_path is not None:
        check_digest(db, f"CFG {cfg_path}", cfg_digest(load_cfg_file(cfg_path)))
    if counters is None:
        config = config_from_log(db, log)
    else:
        config = CounterConfig.parse(counters, db.counters)
        if config.labels != log.counters:
            raise CounterConfigError(
                f"Measurements were taken with registers {', '.join(log.counters)}, "
                f"not {', '.join(config.labels)}"
            )
    with get_console().status("[blue]Verifying segments..."):
        verification = verify_trace_measurements(
            db,
            log.measurements,
            config,
            use_cache=not no_cache,
            offset=offset,
            max_nodes=max_nodes,
        )
    if output_format == "json":
        emit(dump_json(verification.to_json(include_timings=timings)))
    else:
        emit(render_verification(verification, timings))
    if not verification.accepted:
        rich_print(f"[red]Control flow rejected at segment {verification.rejected_at}")
        sys.exit(EXIT_REJECTED)
    rich_print(f"[green]Accepted {plural(len(verification.results), 'segment')}")


# Simulation


@cli_main.command()
@click.option("--cfg", "cfg_path", type=EXISTING_FILE, required=True)
@table_option
@click.option("--trace", "trace_path", type=EXISTING_FILE, required=True)
@click.option(
    "--counters",
    default=DEFAULT_COUNTERS,
    show_default=True,
    help='Preset, "all", or comma-separated registers of "+"-joined counters.',
)
@offset_option
@click.option("--out", "out_path", type=OUTPUT_FILE, help="Defaults to stdout.")
@guarded
def simulate(
    cfg_path: Path,
    table_path: str,
    trace_path: Path,
    counters: str,
    offset: tuple[int, ...] | None,
    out_path: Path | None,
) -> None:
    """Replays a block trace into counter snapshots."""
    table = get_event_table(table_path)
    cfg = load_cfg_file(cfg_path, table)
    digest = cfg_digest(cfg)
    cfg_ref, trace = load_trace_file(trace_path)
    if cfg_ref != digest:
        raise DigestMismatchError(f"Trace {trace_path}", digest, cfg_ref)
    if not validate_trace(cfg, trace, check_calls=True):
        raise InvalidTraceError(str(trace_path))
    config = CounterConfig.parse(counters, cfg.counters, table.deterministic)
    measurements = measure(cfg, table, config, trace, offset)
    rich_print(f"[yellow]Measured {plural(len(measurements), 'segment')}")
    write_document(out_path, MeasurementLog(digest, config.labels, tuple(measurements)).to_json())


@cli_main.command()
@click.option("--cfg", "cfg_path", type=EXISTING_FILE, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--min-segments", type=click.IntRange(min=0), default=1, show_default=True)
@click.option("--max-segments", type=click.IntRange(min=0), default=10, show_default=True)
@click.option(
    "--max-loop-iterations", type=click.IntRange(min=0), default=5, show_default=True
)
@click.option("--out", "out_path", type=OUTPUT_FILE, help="Defaults to stdout.")
@guarded
def walk(
    cfg_path: Path,
    seed: int,
    min_segments: int,
    max_segments: int,
    max_loop_iterations: int,
    out_path: Path | None,
) -> None:
    """Generates a random valid execution of a CFG."""
    cfg = load_cfg_file(cfg_path)
    constraints = WalkConstraints(
        min_segments=min_segments,
        max_segments=max_segments,
        max_loop_iterations=max_loop_iterations,
    )
    trace = random_valid_walk(cfg, seed, constraints)
    rich_print(f"[yellow]Generated {plural(len(trace), 'step')}")
    write_document(out_path, trace_to_json(cfg_digest(cfg), trace))


# Protocol


design_option = click.option(
    "--design",
    type=click.Choice([d.value for d in TracerDesign]),
    default=TracerDesign.HOST_MEDIATED.value,
    show_default=True,
    help="How the tracer is notified of tracee ecalls.",
)


def render_run(run: ProtocolRun) -> str:
    lines = []
    for event, effects in zip(run.events, run.effects):
        outcome = ", ".join(
            f"{e.kind.value} ({e.detail})" if e.detail else e.kind.value for e in effects
        )
        lines.append(f"{event} -> {outcome or 'nothing'}")
    summary = run.to_json()
    for key in ("context_switches", "granted_reads", "denied_reads"):
        lines.append(f"{key}: {summary[key]}")
    return "\n".join(lines) + "\n"


def render_exploration(result: ExplorationResult) -> str:
    summary = result.to_json()
    lines = [f"{key}: {summary[key]}" for key in sorted(summary) if key != "violations"]
    for violation in result.violations:
        lines.append(f"violation: {violation.message}")
        lines += [f"  {event}" for event in violation.events]
    return "\n".join(lines) + "\n"


def emit_run(run: ProtocolRun, output_format: str) -> None:
    emit(dump_json(run.to_json()) if output_format == "json" else render_run(run))


@cli_main.group()
def protocol() -> None:
    """Simulates the tracer, tracee and security monitor protocol."""


@protocol.command("run")
@click.option("--scenario", "scenario_path", type=EXISTING_FILE, required=True)
@design_option
@format_option
@guarded
def protocol_run(scenario_path: Path, design: str, output_format: str) -> None:
    """Applies a scripted sequence of events."""
    run = run_scenario(load_scenario_file(scenario_path), World(design=TracerDesign(design)))
    emit_run(run, output_format)


@protocol.command("explore")
@click.option("--depth", type=click.IntRange(min=0), default=10, show_default=True)
@click.option(
    "--alphabet",
    type=click.Choice(["honest", "adversarial"]),
    default="adversarial",
    show_default=True,
)
@click.option(
    "--state-budget",
    type=click.IntRange(min=1),
    default=DEFAULT_STATE_BUDGET,
    show_default=True,
)
@design_option
@format_option
@guarded
def protocol_explore(
    depth: int, alphabet: str, state_budget: int, design: str, output_format: str
) -> None:
    """Checks the safety properties on every event interleaving up to a depth."""
    events = honest_alphabet() if alphabet == "honest" else adversarial_alphabet()
    with get_console().status(f"[blue]Exploring {len(events)} events to depth {depth}..."):
        result = explore(World(design=TracerDesign(design)), events, depth, state_budget)
    rich_print(f"[yellow]Reached {plural(len(result.states), 'state')}")
    emit(dump_json(result.to_json()) if output_format == "json" else render_exploration(result))
    if result.violations:
        rich_print(f"[red]Found {plural(len(result.violations), 'violation')}")
        sys.exit(EXIT_REJECTED)


@protocol.command("session")
@click.option("--db", "db_path", type=EXISTING_FILE, required=True)
@click.option("--measurements", "measurements_path", type=EXISTING_FILE, required=True)
@offset_option
@design_option
@format_option
@guarded
def protocol_session(
    db_path: Path,
    measurements_path: Path,
    offset: tuple[int, ...] | None,
    design: str,
    output_format: str,
) -> None:
    """Drives one tracee run with the verdicts of the verifier."""
    db = load_database_file(db_path)
    log = load_measurement_log_file(measurements_path)
    check_digest(db, f"Measurements {measurements_path}", log.cfg_ref)
    verification = verify_trace_measurements(
        db, log.measurements, config_from_log(db, log), offset=offset
    )
    run = run_attested_session(
        [r.accepted for r in verification.results], TracerDesign(design)
    )
    emit_run(run, output_format)


# Experiments


@cli_main.command("attack-eval")
@click.argument("manifests", nargs=-1, type=str)
@click.option(
    "--root",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    default=Path("."),
    help="Directory searched for counter-attest*.toml manifests.",
)
@click.option(
    "--reps",
    type=click.IntRange(min=1),
    help="Repetitions per segment for every mutation kind.",
)
@format_option
@guarded
def attack_eval(
    manifests: list[str], root: Path, reps: int | None, output_format: str
) -> None:
    """Measures how reliably mutated control flows are rejected."""
    with get_console().status("[blue]Reading manifests..."):
        registry = ManifestRegistry(root)
        rich_print(f"[yellow]Found {plural(len(registry), 'manifest')}")
        for name in manifests:
            if name not in registry:
                raise click.NoSuchOption(
                    "manifests",
                    f"No such manifest: {name}",
                    possibilities=list(registry.names),
                )
        all_manifests = manifests or list(registry.names)
    evaluations: list[EvaluationReport] = []
    hashes: list[str] = []
    for name in all_manifests:
        manifest = registry.get(name)
        if reps is not None:
            manifest = replace(manifest, attack=replace(manifest.attack, repetitions=reps))
        with get_console().status(f"[blue]Evaluating {name}..."):
            evaluations.append(ManifestRun(manifest).evaluate())
        hashes.append(manifest.data_hash)
    if output_format == "json":
        experiments = [
            {**e.to_json(), "manifest_hash": h} for e, h in zip(evaluations, hashes)
        ]
        emit(dump_json({"experiments": experiments}))
    else:
        emit(render_reliability_table(evaluations))


@cli_main.command("rank-counters")
@click.option("--db", "db_path", type=EXISTING_FILE, required=True)
@click.option("--k", "k", type=click.IntRange(min=1), required=True, help="Registers available.")
@click.option("--top", type=click.IntRange(min=1), default=10, show_default=True)
@format_option
@guarded
def rank_counters(db_path: Path, k: int, top: int, output_format: str) -> None:
    """Ranks counter subsets by how sparse they make the loop lattice."""
    db = load_database_file(db_path)
    loops = db.loop_vectors
    if k > db.dimension:
        raise click.BadParameter(f"at most {db.dimension} counters exist", param_hint="--k")
    rich_print(f"[yellow]Ranking over {plural(len(loops), 'distinct loop')}")
    ranking = [
        ([db.counters[i] for i in subset], lattice_density_score(loops, subset))
        for subset in rank_counter_subsets(loops, k, db.dimension)[:top]
    ]
    if output_format == "json":
        emit(
            dump_json(
                [{"counters": names, "score": float(score)} for names, score in ranking]
            )
        )
        return
    table = Table(title=f"Best {k}-counter subsets")
    table.add_column("Counters")
    table.add_column("Covolume", justify="right")
    for names, score in ranking:
        table.add_row(", ".join(names), f"{float(score):.3f}")
    emit(render_plain(table))


# Demos


@cli_main.command()
@click.argument("name", type=click.Choice(sorted(DEMOS)))
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
)
@guarded
def demo(name: str, out_dir: Path) -> None:
    """Writes a demo program's CFG and a valid trace of it."""
    program = build_demo(name)
    cfg = load_cfg(program.document, f"<demo {name}>", get_event_table(None))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_document(out_dir / f"{name}.cfg.json", program.document)
    write_document(
        out_dir / f"{name}.trace.json",
        trace_to_json(cfg_digest(cfg), BlockTrace(program.trace)),
    )
