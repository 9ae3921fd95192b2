"""
RANKFLOW Finite-N Observables

Empirical tail measures U^N, the finite-N velocity V^N, and anchors for the
empirical characteristic Y^N_C.
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from rankflow.errors import InvalidAnchorError
from rankflow.model.spec import ModelSpec


def tail_start(N: int, y: float) -> int:
    """Smallest k with k >= N*y, i.e. ranks k+1..N are the tail {X >= N*y + 1}."""
    return min(max(math.ceil(N * y - 1e-9), 0), N)


@dataclass(frozen=True)
class Anchor:
    """Boundary point gamma = (y0, t0) with y0 = 0 or t0 = 0."""
    y0: float
    t0: float

    @property
    def on_initial_line(self) -> bool:
        return self.t0 == 0.0

    @property
    def label(self) -> str:
        return f"y0={self.y0:g},t0={self.t0:g}"


def validate_anchor(anchor: Anchor, horizon: float) -> Anchor:
    if anchor.y0 != 0.0 and anchor.t0 != 0.0:
        raise InvalidAnchorError(
            f"Anchor {anchor.label} is not on the boundary (need y0 = 0 or t0 = 0)",
            y0=anchor.y0, t0=anchor.t0,
        )
    if not (0.0 <= anchor.y0 <= 1.0) or not (0.0 <= anchor.t0 <= horizon):
        raise InvalidAnchorError(
            f"Anchor {anchor.label} lies outside [0,1] x [0,{horizon:g}]",
            y0=anchor.y0, t0=anchor.t0,
        )
    return anchor


@dataclass(frozen=True)
class EmpiricalSnapshot:
    """Types in rank order at one time; type_by_rank[x-1] is the type at rank x."""
    time: float
    type_by_rank: np.ndarray
    A: int

    @property
    def N(self) -> int:
        return len(self.type_by_rank)

    def tail_counts(self) -> np.ndarray:
        """counts[a, k] = #type-a particles with rank >= k + 1, for k = 0..N."""
        counts = np.zeros((self.A, self.N + 1), dtype=np.int64)
        for a in range(self.A):
            hits = (self.type_by_rank == a).astype(np.int64)
            counts[a, :-1] = np.cumsum(hits[::-1])[::-1]
        return counts

    def tail_measure(self) -> np.ndarray:
        """U^N(a, k/N) for k = 0..N, shape (A, N+1)."""
        return self.tail_counts() / self.N

    def value(self, y: float) -> np.ndarray:
        """U^N(., y) as a length-A vector."""
        return self.tail_counts()[:, tail_start(self.N, y)] / self.N

    def velocity_profile(self, model: ModelSpec, weights: Sequence[float]) -> np.ndarray:
        """
        V^N(h, k/N) = (1/N) sum over ranks >= k+1 of h_a w_a(Y_i, t), for k = 0..N.
        """
        N = self.N
        ys = np.arange(N) / N
        terms = np.zeros(N)
        for a, (w, h) in enumerate(zip(model.rates, weights)):
            if h == 0.0:
                continue
            mask = self.type_by_rank == a
            if mask.any():
                terms[mask] = h * w.eval_grid(ys[mask], self.time)
        profile = np.zeros(N + 1)
        profile[:-1] = np.cumsum(terms[::-1])[::-1] / N
        return profile


def empirical_U(snapshot: EmpiricalSnapshot, y: float) -> np.ndarray:
    """U^N(., y, t) = (1/N) #{i of type a : X_i >= N*y + 1}."""
    return snapshot.value(y)


def empirical_V(
    snapshot: EmpiricalSnapshot, model: ModelSpec, weights: Sequence[float], y: float
) -> float:
    return float(snapshot.velocity_profile(model, weights)[tail_start(snapshot.N, y)])
