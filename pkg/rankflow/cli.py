"""
RANKFLOW Command Line Interface

    rankflow validate --config exp.json
    rankflow simulate --config exp.json --out run/ [--seed 7] [--timing]
    rankflow solve    --config exp.json --out field/ [--grid 400,400]
    rankflow tagged   --config exp.json --out tagged/ [--seed 7] [--grid M,K]
    rankflow study    --config exp.json --out study/ [--seed 0] [--threads 8] [--grid M,K] [--timing]

Exit codes: 0 ok, 2 invalid input or model, 3 numerical failure, 4 I/O failure.
Results go to --out; logs go to stderr.
"""

import json
import time as wallclock
from functools import wraps
from pathlib import Path
from typing import Optional

import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from rankflow.config import get_settings
from rankflow.errors import (
    EXIT_IO,
    EXIT_VALIDATION,
    ConfigError,
    ModelValidationError,
    RankflowError,
)
from rankflow.limit.solver import solve_field
from rankflow.model.assignment import make_assignment
from rankflow.model.spec import ModelSpec, model_hash
from rankflow.schemas.experiment import (
    ExperimentConfig,
    default_anchors,
    default_snapshot_times,
    load_experiment,
)
from rankflow.services.study import run_study, select_tagged_particles
from rankflow.simulation.engine import simulate as run_simulation
from rankflow.tagged.limit_path import simulate_tagged_limit
from rankflow.utils.export import export_field, export_sim, export_study, export_tagged
from rankflow.utils.logging import configure_logging
from rankflow.utils.provenance import RunManifest, generate_checksums_file
from rankflow.utils.rng import tagged_stream
from rankflow.validators.model_checks import ValidationReport, validate_model

app = typer.Typer(
    name="rankflow",
    help="Ranking process simulation, hydrodynamic limit and convergence studies.",
    no_args_is_help=True,
)
console = Console()
err_console = Console(stderr=True)

ConfigOption = typer.Option(..., "--config", "-c", exists=True, dir_okay=False, help="Experiment JSON")
OutOption = typer.Option(None, "--out", "-o", help="Output directory")
GridOption = typer.Option(None, "--grid", help="Solver grid as M,K")
TimingOption = typer.Option(False, "--timing", help="Record wall-clock runtimes in outputs")


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Override RANKFLOW_LOG_LEVEL"),
):
    settings = get_settings()
    configure_logging(log_level.upper() if log_level else settings.log_level, settings.log_format)


def handle_errors(func):
    """Map rankflow errors to exit codes with a one-line message on stderr."""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except RankflowError as e:
            err_console.print(f"[red]{e.code.value}[/red]: {e.message}")
            if isinstance(e, ModelValidationError) and e.report is not None:
                _print_issues(e.report, err_console)
            raise typer.Exit(e.exit_code) from e
        except ValidationError as e:
            err_console.print(f"[red]CONFIG_INVALID[/red]: {e}")
            raise typer.Exit(EXIT_VALIDATION) from e
        except OSError as e:
            err_console.print(f"[red]IO_FAILURE[/red]: {e}")
            raise typer.Exit(EXIT_IO) from e
    return wrapper


def _print_issues(report: ValidationReport, target: Console) -> None:
    table = Table(title="Model validation")
    for column in ("code", "type", "y", "t", "magnitude", "message"):
        table.add_column(column)
    for issue in report.issues:
        table.add_row(
            issue.code.value,
            "" if issue.type_index is None else str(issue.type_index),
            "" if issue.y is None else f"{issue.y:.4g}",
            "" if issue.t is None else f"{issue.t:.4g}",
            "" if issue.magnitude is None else f"{issue.magnitude:.3e}",
            issue.message,
        )
    target.print(table)


def parse_grid(grid: Optional[str]) -> tuple[Optional[int], Optional[int]]:
    if not grid:
        return None, None
    try:
        m, k = (int(part) for part in grid.split(","))
    except ValueError as e:
        raise ConfigError(f"--grid expects M,K, got {grid!r}") from e
    if m < 4 or k < 4:
        raise ConfigError(f"--grid needs M, K >= 4, got {grid!r}")
    return m, k


def _accepted_model(config: ExperimentConfig) -> ModelSpec:
    model = config.load_model()
    report = validate_model(model)
    if not report.accepted:
        raise ModelValidationError(f"Model rejected with {len(report.issues)} issue(s)", report)
    model.require_rate_bound()
    return model


def _out_dir(out: Optional[Path], command: str) -> Path:
    path = out or get_settings().output_dir / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _finish(manifest: RunManifest, out_dir: Path, outputs: list[Path]) -> None:
    for path in outputs:
        manifest.add_output_file(path)
    manifest.save(out_dir / "manifest.json")
    generate_checksums_file(out_dir)
    console.print(f"[green]Wrote[/green] {len(outputs) + 2} files to {out_dir}")


def _solve(config: ExperimentConfig, model: ModelSpec, grid: Optional[str]):
    m, k = parse_grid(grid)
    return solve_field(model, m or config.solve.grid_m, k or config.solve.grid_k, get_settings().solver)


@app.command()
@handle_errors
def validate(config: Path = ConfigOption):
    """Check the experiment config and its model; exit 2 if the model is rejected."""
    experiment = load_experiment(config)
    model = experiment.load_model()
    report = validate_model(model)
    if not report.accepted:
        _print_issues(report, console)
        raise typer.Exit(EXIT_VALIDATION)
    R = model.require_rate_bound()
    console.print(f"[green]Model accepted[/green]: {model.A} type(s), T={model.horizon:g}, R={R:.6g}")
    console.print(f"model hash {model_hash(model)}")


@app.command()
@handle_errors
def simulate(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = typer.Option(None, "--seed", help="Override simulate.seed"),
    timing: bool = TimingOption,
):
    """Run the N-particle process and write snapshots, tagged traces and Y^N_C."""
    experiment = load_experiment(config)
    model = _accepted_model(experiment)
    section = experiment.simulate
    settings = get_settings()
    seed = section.seed if seed is None else seed
    horizon = section.horizon or model.horizon
    times = section.snapshot_times or default_snapshot_times(
        horizon, section.snapshot_count or settings.simulation.snapshot_count
    )
    anchors = (
        default_anchors(horizon) if section.anchors is None
        else [a.to_anchor() for a in section.anchors]
    )
    assignment = make_assignment(model, section.N, section.assignment, seed)
    tagged = select_tagged_particles(assignment, section.tags)
    output = run_simulation(
        model, assignment, horizon, seed,
        snap_times=times,
        anchors=anchors,
        tagged=tagged,
        chunk_size=settings.simulation.chunk_size,
        debug=settings.simulation.debug_invariants,
        record_timing=timing or settings.study.record_timing,
    )
    out_dir = _out_dir(out, "simulate")
    manifest = RunManifest(
        command="simulate", seed=seed, model_hash=output.model_hash, rate_bound=output.rate_bound
    )
    manifest.add_input_file(config, "config")
    manifest.parameters = {"N": section.N, "horizon": horizon, "assignment": section.assignment.value}
    run_info = output.manifest()
    manifest.streams = run_info.pop("stream_counters")
    manifest.diagnostics = run_info
    _finish(manifest, out_dir, export_sim(output, out_dir))


@app.command()
@handle_errors
def solve(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    grid: Optional[str] = GridOption,
    timing: bool = TimingOption,
):
    """Solve the hydrodynamic limit and write f, g and eta on their grids."""
    started = wallclock.perf_counter()
    experiment = load_experiment(config)
    model = _accepted_model(experiment)
    field = _solve(experiment, model, grid)
    out_dir = _out_dir(out, "solve")
    manifest = RunManifest(command="solve", model_hash=model_hash(model), rate_bound=model.rate_bound)
    manifest.add_input_file(config, "config")
    manifest.parameters = {"M": field.M, "K": field.K, "horizon": field.horizon}
    manifest.diagnostics = {
        **field.diagnostics.to_dict(),
        "solidity_defect": field.solidity_defect(),
    }
    if timing or get_settings().study.record_timing:
        manifest.diagnostics["runtime_seconds"] = wallclock.perf_counter() - started
    _finish(manifest, out_dir, export_field(field, out_dir))


@app.command()
@handle_errors
def tagged(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = typer.Option(None, "--seed", help="Override tagged.seed"),
    grid: Optional[str] = GridOption,
):
    """Integrate limit tagged-particle paths driven by their candidate streams."""
    experiment = load_experiment(config)
    model = _accepted_model(experiment)
    section = experiment.tagged
    seed = section.seed if seed is None else seed
    for tag in section.tags:
        if tag.type_index >= model.A:
            raise ConfigError(f"Tag type {tag.type_index} out of range for {model.A} types")
    field = _solve(experiment, model, grid)
    horizon = section.horizon or model.horizon
    settings = get_settings()
    paths = [
        simulate_tagged_limit(
            field, model, tag.type_index, tag.y, horizon,
            tagged_stream(seed, k, model.rate_bound, settings.simulation.chunk_size),
        )
        for k, tag in enumerate(section.tags)
    ]
    out_dir = _out_dir(out, "tagged")
    manifest = RunManifest(command="tagged", seed=seed, model_hash=model_hash(model),
                           rate_bound=model.rate_bound)
    manifest.add_input_file(config, "config")
    manifest.parameters = {"M": field.M, "K": field.K, "horizon": horizon}
    manifest.diagnostics = {
        "tags": [
            {"y": tag.y, "type": tag.type_index, "jumps": [list(j) for j in path.jumps]}
            for tag, path in zip(section.tags, paths)
        ]
    }
    _finish(manifest, out_dir, [export_tagged(paths, out_dir)])


@app.command()
@handle_errors
def study(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    seed: Optional[int] = typer.Option(
        None, "--seed", help="First root seed; the study runs seeds seed, seed+1, ..."
    ),
    threads: Optional[int] = typer.Option(None, "--threads", min=1, help="Worker processes"),
    grid: Optional[str] = GridOption,
    timing: bool = TimingOption,
):
    """Run the convergence study over the configured N ladder and seeds."""
    experiment = load_experiment(config)
    if seed is not None:
        count = len(experiment.study.seed_list)
        experiment = experiment.model_copy(update={
            "study": experiment.study.model_copy(update={"seeds": list(range(seed, seed + count))})
        })
    model = _accepted_model(experiment)
    field = _solve(experiment, model, grid)
    result = run_study(
        experiment, model=model, field=field, threads=threads,
        record_timing=timing or None,
    )
    report = result.report
    out_dir = _out_dir(out, "study")

    manifest = RunManifest(
        command="study", seed=report.seeds[0], model_hash=report.model_hash,
        rate_bound=model.rate_bound,
    )
    manifest.add_input_file(config, "config")
    manifest.parameters = {
        "sizes": report.sizes,
        "seeds": report.seeds,
        "M": field.M,
        "K": field.K,
        "horizon": report.horizon,
    }
    manifest.streams = {f"N{run.N}_seed{run.seed}": run.stream_counters for run in report.runs}
    manifest.diagnostics = {
        **field.diagnostics.to_dict(),
        "solidity_defect": report.field.solidity_defect,
        "identity_defect": report.field.identity_defect,
    }
    outputs = export_study(result, out_dir)
    for path in outputs:
        manifest.add_output_file(path, path.relative_to(out_dir).as_posix())
    manifest.save(out_dir / "manifest.json")
    generate_checksums_file(out_dir)

    table = Table(title="Convergence (medians over seeds)")
    for column in ("N", "runs", "D_U", "D_Yc", "D_tag", "D_V"):
        table.add_column(column, justify="right")
    for row in report.summary:
        table.add_row(
            str(row.N),
            str(row.runs),
            f"{row.median_D_U:.4g}",
            f"{row.median_D_Yc:.4g}",
            json.dumps([round(d, 4) for d in row.median_D_tag]),
            "" if row.median_D_V is None else f"{row.median_D_V:.4g}",
        )
    console.print(table)
    console.print(f"[green]Wrote[/green] {len(outputs) + 2} files to {out_dir}")


if __name__ == "__main__":
    app()
