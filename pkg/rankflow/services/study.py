"""
RANKFLOW Convergence Study Service

Solves the limit once, then runs every (N, seed) simulation against it and
reduces the distances into a ConvergenceReport. Tasks are independent; they run
in a process pool whose workers receive the solved field once at start-up.
"""

import time as wallclock
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import structlog

from rankflow.config import Settings, get_settings
from rankflow.errors import ConfigError
from rankflow.harness.distances import (
    distance_tagged,
    distance_U,
    distance_V_run,
    distance_Yc,
    plain_grid_distance,
)
from rankflow.limit.field import CharacteristicField
from rankflow.limit.solver import solve_field
from rankflow.model.assignment import AssignmentMode, TypeAssignment, make_assignment
from rankflow.model.spec import ModelSpec, model_hash
from rankflow.schemas.experiment import (
    ExperimentConfig,
    TagSpec,
    default_anchors,
    default_snapshot_times,
)
from rankflow.schemas.report import ConvergenceReport, FieldSummary, RunDistances, TagSummary
from rankflow.simulation.engine import simulate
from rankflow.simulation.observables import Anchor, EmpiricalSnapshot
from rankflow.tagged.limit_path import TaggedPath, simulate_tagged_limit
from rankflow.utils.rng import GENERATOR_NAME, tagged_stream

logger = structlog.get_logger()


@dataclass(frozen=True)
class StudyPlan:
    """Everything a worker needs besides the solved field."""
    model: ModelSpec
    horizon: float
    snapshot_times: tuple[float, ...]
    anchors: tuple[Anchor, ...]
    tags: tuple[TagSpec, ...]
    assignment: AssignmentMode
    chunk_size: int
    tagged_steps: int
    velocity: bool
    record_timing: bool


def select_tagged_particles(assignment: TypeAssignment, tags: Sequence[TagSpec]) -> list[int]:
    """
    For each tag pick the particle of its type whose initial rank is nearest to
    N*y + 1 (lowest id on ties), skipping particles already taken.

    Raises:
        ConfigError: no untaken particle of the requested type exists
    """
    N = assignment.N
    types = np.asarray(assignment.type_of)
    ranks = np.asarray(assignment.initial_rank)
    taken: set[int] = set()
    chosen = []
    for tag in tags:
        ids = [int(i) for i in np.flatnonzero(types == tag.type_index) if int(i) not in taken]
        if not ids:
            raise ConfigError(
                f"No particle of type {tag.type_index} left to tag at N={N}",
                type_index=tag.type_index, N=N,
            )
        target = N * tag.y + 1
        pid = min(ids, key=lambda i: (abs(ranks[i] - target), i))
        taken.add(pid)
        chosen.append(pid)
    return chosen


def build_plan(
    config: ExperimentConfig,
    model: ModelSpec,
    settings: Optional[Settings] = None,
    record_timing: Optional[bool] = None,
) -> StudyPlan:
    settings = settings or get_settings()
    horizon = config.simulate.horizon or model.horizon
    if horizon > model.horizon:
        raise ConfigError(f"Simulation horizon {horizon} exceeds the model horizon {model.horizon}")
    count = config.simulate.snapshot_count or settings.simulation.snapshot_count
    times = config.simulate.snapshot_times or default_snapshot_times(horizon, count)
    if any(t > horizon for t in times):
        raise ConfigError(f"Snapshot times must lie in [0, {horizon}]")
    if config.simulate.anchors is None:
        anchors = default_anchors(horizon)
    else:
        anchors = [a.to_anchor() for a in config.simulate.anchors]
    for tag in config.study.tags:
        if tag.type_index >= model.A:
            raise ConfigError(f"Tag type {tag.type_index} out of range for {model.A} types")
    model.require_rate_bound()
    return StudyPlan(
        model=model,
        horizon=horizon,
        snapshot_times=tuple(times),
        anchors=tuple(anchors),
        tags=tuple(config.study.tags),
        assignment=config.study.assignment,
        chunk_size=settings.simulation.chunk_size,
        tagged_steps=settings.solver.tagged_steps,
        velocity=config.study.velocity,
        record_timing=settings.study.record_timing if record_timing is None else record_timing,
    )


def tagged_limit_paths(plan: StudyPlan, field: CharacteristicField, seed: int) -> list[TaggedPath]:
    """Limit paths of every study tag, driven by the tag's own candidate stream."""
    R = plan.model.require_rate_bound()
    return [
        simulate_tagged_limit(
            field, plan.model, tag.type_index, tag.y, plan.horizon,
            tagged_stream(seed, k, R, plan.chunk_size), steps=plan.tagged_steps,
        )
        for k, tag in enumerate(plan.tags)
    ]


def measure_run(
    plan: StudyPlan,
    field: CharacteristicField,
    paths: Sequence[TaggedPath],
    N: int,
    seed: int,
) -> RunDistances:
    """Simulate one (N, seed) pair and measure it against the limit."""
    return _measure(plan, field, paths, N, seed)[0]


def _measure(
    plan: StudyPlan,
    field: CharacteristicField,
    paths: Sequence[TaggedPath],
    N: int,
    seed: int,
    keep_snapshots: bool = False,
) -> tuple[RunDistances, Optional[list[EmpiricalSnapshot]]]:
    started = wallclock.perf_counter()
    assignment = make_assignment(plan.model, N, plan.assignment, seed)
    tagged = select_tagged_particles(assignment, plan.tags)
    output = simulate(
        plan.model, assignment, plan.horizon, seed,
        snap_times=plan.snapshot_times,
        anchors=plan.anchors,
        tagged=tagged,
        chunk_size=plan.chunk_size,
    )
    row = RunDistances(
        N=N,
        seed=seed,
        D_U=min(distance_U(output, field), 2.0),
        D_U_grid=max(
            (plain_grid_distance(s, field, s.time) for s in output.snapshots), default=0.0
        ),
        D_Yc=distance_Yc(output, field),
        # tag k and paths[k] consumed the same candidate stream
        D_tag=[distance_tagged(trace, path) for trace, path in zip(output.tagged, paths)],
        D_V=distance_V_run(output, plan.model, field) if plan.velocity else None,
        candidates=output.candidates,
        accepted=output.accepted,
        overshoots=output.overshoots,
        stream_counters=output.counters,
        runtime_seconds=wallclock.perf_counter() - started if plan.record_timing else None,
    )
    logger.info("Measured run", N=N, seed=seed, D_U=row.D_U, D_Yc=row.D_Yc)
    return row, (output.snapshots if keep_snapshots else None)


_worker_state: dict = {}


def _init_worker(plan: StudyPlan, field: CharacteristicField) -> None:
    _worker_state["plan"] = plan
    _worker_state["field"] = field


def _paths_task(seed: int) -> list[TaggedPath]:
    return tagged_limit_paths(_worker_state["plan"], _worker_state["field"], seed)


def _run_task(N: int, seed: int, paths: list[TaggedPath], keep_snapshots: bool):
    return _measure(_worker_state["plan"], _worker_state["field"], paths, N, seed, keep_snapshots)


def _field_summary(model: ModelSpec, field: CharacteristicField) -> FieldSummary:
    return FieldSummary(
        M=field.M,
        K=field.K,
        rate_bound=model.require_rate_bound(),
        solidity_defect=field.solidity_defect(),
        identity_defect=field.identity_defect(),
        f_iterations=len(field.diagnostics.f_diffs),
        g_iterations=len(field.diagnostics.g_diffs),
    )


@dataclass
class StudyResult:
    """A finished study: the report, the field it was measured against and the kept snapshots."""
    report: ConvergenceReport
    model: ModelSpec
    field: CharacteristicField
    snapshots: dict[tuple[int, int], list[EmpiricalSnapshot]]


def run_study(
    config: ExperimentConfig,
    model: Optional[ModelSpec] = None,
    field: Optional[CharacteristicField] = None,
    threads: Optional[int] = None,
    record_timing: Optional[bool] = None,
    settings: Optional[Settings] = None,
) -> StudyResult:
    """
    Run the configured N ladder over all seeds and reduce to a report.

    Snapshots are kept for the first seed at every N; the other runs only
    return their distances.

    Args:
        config: validated experiment config
        model: pre-loaded model (read from config otherwise)
        field: pre-solved field (solved from config.solve otherwise)
        threads: worker processes; 1 runs everything in-process
    """
    started = wallclock.perf_counter()
    settings = settings or get_settings()
    model = model or config.load_model()
    plan = build_plan(config, model, settings, record_timing)
    if field is None:
        field = solve_field(model, config.solve.grid_m, config.solve.grid_k, settings.solver)
    threads = threads or settings.study.threads
    seeds = config.study.seed_list
    sizes = config.study.sizes
    tasks = [(N, seed, seed == seeds[0]) for N in sizes for seed in seeds]
    logger.info("Starting convergence study", sizes=sizes, seeds=len(seeds), threads=threads)

    if threads <= 1:
        paths = {seed: tagged_limit_paths(plan, field, seed) for seed in seeds}
        results = [_measure(plan, field, paths[seed], N, seed, keep) for N, seed, keep in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_init_worker, initargs=(plan, field)
        ) as pool:
            # limit paths depend on the seed only; every N reuses them
            path_futures = {seed: pool.submit(_paths_task, seed) for seed in seeds}
            paths = {seed: future.result() for seed, future in path_futures.items()}
            run_futures = [
                pool.submit(_run_task, N, seed, paths[seed], keep) for N, seed, keep in tasks
            ]
            # collected in submission order, so the pool size never changes the report
            results = [future.result() for future in run_futures]

    runs = sorted((row for row, _ in results), key=lambda run: (run.N, run.seed))
    snapshots = {
        (row.N, row.seed): kept for row, kept in results if kept is not None
    }

    report = ConvergenceReport(
        model_hash=model_hash(model),
        horizon=plan.horizon,
        generator=GENERATOR_NAME,
        sizes=sizes,
        seeds=seeds,
        snapshot_times=list(plan.snapshot_times),
        anchors=[anchor.label for anchor in plan.anchors],
        tags=[
            TagSummary(
                y=tag.y,
                type_index=tag.type_index,
                jumps_by_seed={seed: len(paths[seed][k].jumps) for seed in seeds},
            )
            for k, tag in enumerate(plan.tags)
        ],
        field=_field_summary(model, field),
        runs=runs,
        summary=ConvergenceReport.summarize(runs),
        runtime_seconds=wallclock.perf_counter() - started if plan.record_timing else None,
    )
    logger.info(
        "Finished convergence study",
        median_D_U=report.medians("D_U"),
        decreasing=report.decreasing("D_U"),
    )
    return StudyResult(report=report, model=model, field=field, snapshots=snapshots)


def run_convergence_study(
    config: ExperimentConfig,
    model: Optional[ModelSpec] = None,
    field: Optional[CharacteristicField] = None,
    threads: Optional[int] = None,
    record_timing: Optional[bool] = None,
    settings: Optional[Settings] = None,
) -> ConvergenceReport:
    """Report of `run_study` without the field and snapshots."""
    return run_study(config, model, field, threads, record_timing, settings).report
