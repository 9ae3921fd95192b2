"""
RANKFLOW Initial Type Assignment

Places N particles on ranks 1..N so the empirical tail counts per type follow
r_a * rho_a(y). Particle i starts at rank i + 1.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import structlog

from rankflow.errors import InfeasibleAssignmentError
from rankflow.model.spec import ModelSpec
from rankflow.utils.rng import StreamPurpose, make_generator

logger = structlog.get_logger()


class AssignmentMode(str, Enum):
    QUANTILE = "quantile"
    IID = "iid"


@dataclass(frozen=True)
class TypeAssignment:
    N: int
    type_of: np.ndarray
    initial_rank: np.ndarray

    def __post_init__(self):
        if len(self.type_of) != self.N or len(self.initial_rank) != self.N:
            raise ValueError("Assignment arrays must have length N")
        ranks = np.sort(np.asarray(self.initial_rank))
        if not np.array_equal(ranks, np.arange(1, self.N + 1)):
            raise ValueError("initial_rank must be a permutation of 1..N")

    def tail_counts(self, A: int) -> np.ndarray:
        """counts[a, k] = #type-a particles with initial rank >= k + 1, k = 0..N."""
        counts = np.zeros((A, self.N + 1), dtype=np.int64)
        by_rank = np.empty(self.N, dtype=np.int64)
        by_rank[np.asarray(self.initial_rank) - 1] = self.type_of
        for a in range(A):
            hits = (by_rank == a).astype(np.int64)
            counts[a, :-1] = np.cumsum(hits[::-1])[::-1]
        return counts


def _target_tails(model: ModelSpec, N: int) -> np.ndarray:
    ys = np.arange(N + 1) / N
    return np.stack([
        N * r * rho.eval_grid(ys, 0.0) for r, rho in zip(model.weights, model.profiles)
    ])


def _quantile_types(model: ModelSpec, N: int) -> np.ndarray:
    """
    Fill ranks from the back; each rank takes the type whose tail count lags its
    target N r_a rho_a(k/N) the most (ties go to the highest type index).
    """
    targets = _target_tails(model, N)
    A = model.A
    counts = np.zeros(A)
    types = np.empty(N, dtype=np.int64)
    for k in range(N - 1, -1, -1):
        deficit = targets[:, k] - counts
        a = A - 1 - int(np.argmax(deficit[::-1]))
        counts[a] += 1
        types[k] = a
        worst = np.abs(targets[:, k] - counts).max()
        if worst > A:
            raise InfeasibleAssignmentError(
                f"Tail counts cannot follow the profiles at y={k / N:.6g}",
                y=k / N, deviation=float(worst),
            )
    return types


def _iid_types(model: ModelSpec, N: int, seed: int) -> np.ndarray:
    """Each rank draws its type from the profile mass of its cell ((x-1)/N, x/N)."""
    tails = _target_tails(model, N) / N
    masses = np.clip(tails[:, :-1] - tails[:, 1:], 0.0, None)
    totals = masses.sum(axis=0)
    if np.any(totals <= 0.0):
        k = int(np.argmax(totals <= 0.0))
        raise InfeasibleAssignmentError(
            f"No profile mass in rank cell at y={k / N:.6g}", y=k / N
        )
    cumulative = np.cumsum(masses / totals, axis=0)
    draws = make_generator(seed, StreamPurpose.ASSIGNMENT, N).random(N)
    return np.minimum((draws[None, :] >= cumulative).sum(axis=0), model.A - 1)


def make_assignment(
    model: ModelSpec,
    N: int,
    mode: AssignmentMode = AssignmentMode.QUANTILE,
    seed: int = 0,
) -> TypeAssignment:
    """
    Build the initial ranks and types for N particles.

    Raises:
        InfeasibleAssignmentError: the profiles admit no single-occupancy placement
    """
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    mode = AssignmentMode(mode)
    if mode == AssignmentMode.QUANTILE:
        types = _quantile_types(model, N)
    else:
        types = _iid_types(model, N, seed)
    assignment = TypeAssignment(
        N=N, type_of=types, initial_rank=np.arange(1, N + 1, dtype=np.int64)
    )
    logger.debug("Built type assignment", N=N, mode=mode.value, types=model.A)
    return assignment
