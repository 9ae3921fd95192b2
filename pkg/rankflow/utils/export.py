"""
RANKFLOW Export

CSV and JSON writers for simulation runs, solved fields, tagged paths and
convergence reports. Floats are written with a fixed format so identical runs
produce identical bytes.
"""

from functools import wraps
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
import structlog

from rankflow.errors import OutputError
from rankflow.limit.field import CharacteristicField
from rankflow.schemas.report import ConvergenceReport
from rankflow.services.study import StudyResult
from rankflow.simulation.engine import SimOutput
from rankflow.simulation.observables import EmpiricalSnapshot
from rankflow.tagged.limit_path import TaggedPath

logger = structlog.get_logger()

FLOAT_FORMAT = "%.12g"


def _io_guard(func):
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except OSError as e:
            raise OutputError(f"{func.__name__} failed: {e}", filename=e.filename) from e
    return wrapper


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def snapshot_frame(snapshots: Sequence[EmpiricalSnapshot]) -> pd.DataFrame:
    """Long table (time, y, type, value) of U^N at every breakpoint y = k/N."""
    frames = []
    for snap in snapshots:
        tails = snap.tail_measure()
        ys = np.arange(snap.N + 1) / snap.N
        for a in range(snap.A):
            frames.append(pd.DataFrame({"time": snap.time, "y": ys, "type": a, "value": tails[a]}))
    if not frames:
        return pd.DataFrame(columns=["time", "y", "type", "value"])
    return pd.concat(frames, ignore_index=True)


@_io_guard
def export_sim(output: SimOutput, out_dir: Path) -> list[Path]:
    """snapshots.csv, tagged.csv and yc.csv for one run."""
    tagged = pd.DataFrame(
        [
            {"time": t, "particle": trace.particle, "y": y}
            for trace in output.tagged
            for t, y in trace.changes
        ],
        columns=["time", "particle", "y"],
    )
    yc = pd.DataFrame(
        [
            {"anchor": anchor.label, "time": t, "value": value}
            for anchor, samples in output.yc.items()
            for t, value in samples
        ],
        columns=["anchor", "time", "value"],
    )
    paths = [
        _write_csv(snapshot_frame(output.snapshots), out_dir / "snapshots.csv"),
        _write_csv(tagged, out_dir / "tagged.csv"),
        _write_csv(yc, out_dir / "yc.csv"),
    ]
    logger.info("Exported simulation", out_dir=str(out_dir), snapshots=len(output.snapshots))
    return paths


@_io_guard
def export_field(field: CharacteristicField, out_dir: Path) -> list[Path]:
    """f.csv (y, t, f), g.csv (s, t, g) for s <= t, eta.csv (t, type, eta)."""
    Y, T = np.meshgrid(field.ys, field.ts, indexing="ij")
    f_frame = pd.DataFrame({"y": Y.ravel(), "t": T.ravel(), "f": field.f.ravel()})
    S, T = np.meshgrid(field.ts, field.ts, indexing="ij")
    upper = np.triu(np.ones_like(field.g, dtype=bool))
    g_frame = pd.DataFrame({"s": S[upper], "t": T[upper], "g": field.g[upper]})
    eta_frame = pd.concat(
        [
            pd.DataFrame({"t": field.ts, "type": a, "eta": field.eta[a]})
            for a in range(field.model.A)
        ],
        ignore_index=True,
    )
    paths = [
        _write_csv(f_frame, out_dir / "f.csv"),
        _write_csv(g_frame, out_dir / "g.csv"),
        _write_csv(eta_frame, out_dir / "eta.csv"),
    ]
    logger.info("Exported field", out_dir=str(out_dir), M=field.M, K=field.K)
    return paths


@_io_guard
def export_tagged(paths: list[TaggedPath], out_dir: Path) -> Path:
    """tagged_limit.csv with (tag, t, y) samples of every path."""
    frame = pd.concat(
        [
            pd.DataFrame({"tag": k, "t": path.times, "y": path.positions})
            for k, path in enumerate(paths)
        ],
        ignore_index=True,
    ) if paths else pd.DataFrame(columns=["tag", "t", "y"])
    return _write_csv(frame, out_dir / "tagged_limit.csv")


@_io_guard
def write_report(report: ConvergenceReport, out_dir: Path) -> list[Path]:
    """report.json plus a flat distances.csv with one row per (N, seed)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    report_path.write_text(report.model_dump_json(indent=2) + "\n")
    rows = []
    for run in report.runs:
        row = run.model_dump(exclude={"D_tag", "stream_counters"})
        row.update({f"D_tag_{k}": d for k, d in enumerate(run.D_tag)})
        rows.append(row)
    if report.runtime_seconds is None:
        rows = [{k: v for k, v in row.items() if k != "runtime_seconds"} for row in rows]
    distances = _write_csv(pd.DataFrame(rows), out_dir / "distances.csv")
    return [report_path, distances]


def read_report(path: Path) -> ConvergenceReport:
    return ConvergenceReport.model_validate_json(Path(path).read_text())


@_io_guard
def export_study(result: StudyResult, out_dir: Path) -> list[Path]:
    """
    Full study tree:
        report.json, distances.csv
        fields/f.csv, fields/g.csv, fields/eta.csv
        snapshots/N{N}_seed{seed}.csv for every kept run
    """
    paths = write_report(result.report, out_dir)
    paths += export_field(result.field, out_dir / "fields")
    for (N, seed), snapshots in sorted(result.snapshots.items()):
        paths.append(
            _write_csv(snapshot_frame(snapshots), out_dir / "snapshots" / f"N{N}_seed{seed}.csv")
        )
    logger.info("Exported study", out_dir=str(out_dir), files=len(paths))
    return paths
