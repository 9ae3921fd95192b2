"""
RANKFLOW Tagged Limit Path

A tagged particle in the limit drifts with velocity V(1, Y, t) and is reset to
0 at the accepted points of its candidate stream. Between candidates the drift
is integrated by fixed-step RK4; a candidate inside a step splits the step so
the jump happens exactly at the candidate time.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import structlog

from rankflow.config import get_settings
from rankflow.errors import OutOfDomainError
from rankflow.limit.field import CharacteristicField
from rankflow.model.spec import ModelSpec
from rankflow.utils.rng import CandidateStream

logger = structlog.get_logger()

_DOMAIN_TOL = 1e-9


@dataclass
class TaggedPath:
    """Limit trajectory of one tagged particle sampled on a uniform time grid."""
    type_index: int
    initial_y: float
    times: np.ndarray
    positions: np.ndarray
    jumps: list[tuple[float, float]] = field(default_factory=list)

    @property
    def jump_times(self) -> list[float]:
        return [t for t, _ in self.jumps]


class _Drift:
    def __init__(self, field: CharacteristicField):
        self.field = field
        self.weights = (1.0,) * field.model.A

    def __call__(self, y: float, t: float) -> float:
        return self.field.V(self.weights, min(max(y, 0.0), 1.0), t)

    def step(self, y: float, t: float, h: float) -> float:
        if h <= 0.0:
            return y
        k1 = self(y, t)
        k2 = self(y + 0.5 * h * k1, t + 0.5 * h)
        k3 = self(y + 0.5 * h * k2, t + 0.5 * h)
        k4 = self(y + h * k3, t + h)
        return _in_domain(y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, t + h)


def _in_domain(y: float, t: float) -> float:
    if y < -_DOMAIN_TOL or y > 1.0 + _DOMAIN_TOL:
        raise OutOfDomainError(f"Tagged path left [0, 1] at t={t:g} (y={y:.3e})", y=y, t=t)
    return min(max(y, 0.0), 1.0)


def simulate_tagged_limit(
    field: CharacteristicField,
    model: ModelSpec,
    a: int,
    y_i: float,
    T: float,
    stream: CandidateStream,
    steps: Optional[int] = None,
) -> TaggedPath:
    """
    Integrate the limit tagged-particle dynamics on [0, T].

    Args:
        field: solved characteristic field covering [0, T]
        a: type of the particle
        y_i: initial normalized position in [0, 1)
        stream: rate-R candidate stream; sharing it with a finite-N tagged
            particle couples the two paths
        steps: RK4 steps over [0, T]; defaults to the solver's tagged_steps

    Returns:
        TaggedPath sampled at steps + 1 uniform times, with (time, pre-jump
        position) for every accepted jump
    """
    if not 0.0 <= y_i < 1.0:
        raise OutOfDomainError(f"Initial position {y_i} outside [0, 1)", y=y_i)
    if T > field.horizon * (1.0 + 1e-12):
        raise OutOfDomainError(f"T={T} exceeds the solved horizon {field.horizon}", t=T)
    steps = steps or get_settings().solver.tagged_steps
    R = model.require_rate_bound()
    rate = model.rates[a]
    drift = _Drift(field)

    times = np.linspace(0.0, T, steps + 1)
    positions = np.empty(steps + 1)
    positions[0] = y = float(y_i)
    t = 0.0
    jumps: list[tuple[float, float]] = []
    for k in range(1, steps + 1):
        t_end = float(times[k])
        while stream.peek() <= t_end:
            when, _, u = stream.pop()
            y = drift.step(y, t, when - t)
            t = when
            if R > 0.0 and u < rate.eval(y, t) / R:
                jumps.append((t, y))
                y = 0.0
        y = drift.step(y, t, t_end - t)
        t = t_end
        positions[k] = y

    logger.debug("Integrated tagged limit path", type_index=a, initial_y=y_i, jumps=len(jumps))
    return TaggedPath(type_index=a, initial_y=float(y_i), times=times, positions=positions, jumps=jumps)
