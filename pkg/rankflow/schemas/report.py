"""
RANKFLOW Convergence Report Schemas
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


class RunDistances(BaseModel):
    """Distances of one (N, seed) run to the limit."""

    N: int
    seed: int
    D_U: float = Field(ge=0.0, le=2.0, description="Certified sup total-variation distance")
    D_U_grid: float = Field(ge=0.0, description="Same distance on the N + 1 breakpoints only")
    D_Yc: float = Field(ge=0.0)
    D_tag: list[float] = Field(default_factory=list)
    D_V: Optional[float] = Field(default=None, ge=0.0)
    candidates: int = 0
    accepted: int = 0
    overshoots: int = 0
    stream_counters: dict[str, list[int]] = Field(
        default_factory=dict, description="Philox counters of every stream after the run"
    )
    runtime_seconds: Optional[float] = None


class SizeSummary(BaseModel):
    """Medians over seeds at one N."""

    N: int
    runs: int
    median_D_U: float
    median_D_Yc: float
    median_D_tag: list[float] = Field(default_factory=list)
    median_D_V: Optional[float] = None


class FieldSummary(BaseModel):
    M: int
    K: int
    rate_bound: float
    solidity_defect: float
    identity_defect: list[float]
    f_iterations: int
    g_iterations: int


class TagSummary(BaseModel):
    y: float
    type_index: int
    jumps_by_seed: dict[int, int] = Field(default_factory=dict)


class ConvergenceReport(BaseModel):
    """Outcome of a convergence study; round-trips through JSON unchanged."""

    model_config = ConfigDict(protected_namespaces=())

    model_hash: str
    horizon: float
    generator: str
    sizes: list[int]
    seeds: list[int]
    snapshot_times: list[float]
    anchors: list[str]
    tags: list[TagSummary] = Field(default_factory=list)
    field: FieldSummary
    runs: list[RunDistances]
    summary: list[SizeSummary]
    runtime_seconds: Optional[float] = None

    @staticmethod
    def summarize(runs: list[RunDistances]) -> list[SizeSummary]:
        summary = []
        for N in sorted({run.N for run in runs}):
            group = [run for run in runs if run.N == N]
            tags = np.array([run.D_tag for run in group], dtype=float)
            velocity = [run.D_V for run in group if run.D_V is not None]
            summary.append(
                SizeSummary(
                    N=N,
                    runs=len(group),
                    median_D_U=float(np.median([run.D_U for run in group])),
                    median_D_Yc=float(np.median([run.D_Yc for run in group])),
                    median_D_tag=[float(x) for x in np.median(tags, axis=0)] if tags.size else [],
                    median_D_V=float(np.median(velocity)) if velocity else None,
                )
            )
        return summary

    def medians(self, metric: str) -> list[float]:
        """Per-N medians of D_U, D_Yc or D_V in increasing N."""
        return [getattr(row, f"median_{metric}") for row in self.summary]

    def decreasing(self, metric: str) -> bool:
        values = self.medians(metric)
        return all(later < earlier for earlier, later in zip(values, values[1:]))
