"""
RANKFLOW Particle Simulator

Exact event-driven simulation of the N-particle move-to-front ranking process.
Candidate jumps come from Poisson streams at the global rate bound R: one
merged stream of rate (N - L) R over the untagged particles, and one dedicated
rate-R stream per tagged particle. A candidate for particle i at time s is
accepted with probability w_a(Y_i(s-), s) / R, and accepted particles move to
rank 1.
"""

import time as wallclock
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import structlog

from rankflow.errors import InvalidAnchorError, UnknownAnchorError
from rankflow.model.assignment import TypeAssignment
from rankflow.model.spec import ModelSpec, model_hash
from rankflow.simulation.observables import (
    Anchor,
    EmpiricalSnapshot,
    tail_start,
    validate_anchor,
)
from rankflow.simulation.recency import RecencyIndex
from rankflow.utils.rng import (
    GENERATOR_NAME,
    CandidateStream,
    StreamPurpose,
    generator_counter,
    make_generator,
    tagged_stream,
)

logger = structlog.get_logger()


@dataclass
class AnchorTracker:
    """Y^N_C bookkeeping: which anchored particles have not jumped since t0."""
    anchor: Anchor
    marks: Optional[bytearray] = None
    jumped: int = 0

    @property
    def active(self) -> bool:
        return self.marks is not None

    def activate(self, ranks: np.ndarray, N: int) -> None:
        start = tail_start(N, self.anchor.y0)
        self.marks = bytearray((ranks - 1 >= start).astype(np.uint8).tobytes())
        self.jumped = 0

    def value(self, N: int) -> float:
        return self.anchor.y0 + self.jumped / N


@dataclass
class TaggedTrace:
    """Full event list of one tagged particle's normalized position."""
    tag_index: int
    particle: int
    type_index: int
    initial_y: float
    changes: list[tuple[float, float]] = field(default_factory=list)
    jumps: list[tuple[float, float]] = field(default_factory=list)

    def position_at(self, times: np.ndarray) -> np.ndarray:
        """Right-continuous Y^N_i(t) at each of `times`."""
        change_times = np.array([c[0] for c in self.changes])
        values = np.array([c[1] for c in self.changes])
        idx = np.searchsorted(change_times, np.asarray(times), side="right") - 1
        return values[np.clip(idx, 0, None)]


class ParticleState:
    """Mutable state of one run: ranks, types, clock, jump counts, anchor marks."""

    def __init__(self, model: ModelSpec, assignment: TypeAssignment, debug: bool = False):
        self.model = model
        self.N = assignment.N
        self.type_of = [int(a) for a in assignment.type_of]
        self.types = np.asarray(assignment.type_of, dtype=np.int64)
        self.recency = RecencyIndex(assignment.initial_rank)
        self.now = 0.0
        self.jump_count = [0] * self.N
        self.trackers: dict[Anchor, AnchorTracker] = {}
        self.debug = debug

    def rank(self, pid: int) -> int:
        return self.recency.rank(pid)

    def register_anchor(self, anchor: Anchor) -> None:
        validate_anchor(anchor, self.model.horizon)
        self.trackers.setdefault(anchor, AnchorTracker(anchor))

    def activate_anchors(self, time: float) -> None:
        pending = [
            tr for tr in self.trackers.values() if not tr.active and tr.anchor.t0 <= time
        ]
        if pending:
            ranks = self.recency.ranks()
            for tracker in pending:
                tracker.activate(ranks, self.N)

    def jump(self, pid: int, time: float) -> None:
        """Accepted jump: pid moves to rank 1; everyone ahead of it shifts back by one."""
        self.recency.move_to_front(pid)
        self.jump_count[pid] += 1
        self.now = time
        for tracker in self.trackers.values():
            marks = tracker.marks
            if marks is not None and marks[pid]:
                marks[pid] = 0
                tracker.jumped += 1
        if self.debug:
            self.recency.check()

    def snapshot(self) -> EmpiricalSnapshot:
        self.recency.check()
        order = self.recency.order()
        return EmpiricalSnapshot(time=self.now, type_by_rank=self.types[order], A=self.model.A)

    def empirical_U(self, y: float) -> np.ndarray:
        return self.snapshot().value(y)

    def track_Yc(self, anchor: Anchor) -> float:
        """Y^N_C for a registered anchor at the current time."""
        tracker = self.trackers.get(anchor)
        if tracker is None:
            raise UnknownAnchorError(f"Anchor {anchor.label} was not registered")
        if not tracker.active:
            raise InvalidAnchorError(
                f"Anchor {anchor.label} starts after the current time {self.now:g}"
            )
        return tracker.value(self.N)


@dataclass
class SimOutput:
    """Everything one run produces."""
    N: int
    seed: int
    horizon: float
    rate_bound: float
    model_hash: str
    snapshots: list[EmpiricalSnapshot]
    yc: dict[Anchor, list[tuple[float, float]]]
    tagged: list[TaggedTrace]
    jump_count: np.ndarray
    final_order: np.ndarray
    candidates: int = 0
    accepted: int = 0
    overshoots: int = 0
    compactions: int = 0
    counters: dict[str, list[int]] = field(default_factory=dict)
    runtime_seconds: Optional[float] = None

    def manifest(self) -> dict:
        data = {
            "N": self.N,
            "seed": self.seed,
            "horizon": self.horizon,
            "model_hash": self.model_hash,
            "rate_bound": self.rate_bound,
            "generator": GENERATOR_NAME,
            "stream_counters": self.counters,
            "candidates": self.candidates,
            "accepted": self.accepted,
            "overshoots": self.overshoots,
            "compactions": self.compactions,
            "snapshot_times": [s.time for s in self.snapshots],
            "anchors": [a.label for a in self.yc],
            "tagged_particles": [tr.particle for tr in self.tagged],
        }
        if self.runtime_seconds is not None:
            data["runtime_seconds"] = self.runtime_seconds
        return data


def _checkpoints(snap_times: Sequence[float], anchors: Sequence[Anchor], T: float) -> list[float]:
    times = {float(s) for s in snap_times} | {a.t0 for a in anchors} | {float(T)}
    return sorted(times)


def simulate(
    model: ModelSpec,
    assignment: TypeAssignment,
    T: float,
    seed: int,
    snap_times: Sequence[float] = (),
    anchors: Sequence[Anchor] = (),
    tagged: Sequence[int] = (),
    chunk_size: int = 4096,
    debug: bool = False,
    record_timing: bool = False,
) -> SimOutput:
    """
    Run the ranking process on [0, T].

    Args:
        model: accepted model; its rate bound is computed if missing
        assignment: initial ranks and types
        T: horizon, at most model.horizon
        seed: root seed of all streams
        snap_times: times in [0, T] at which snapshots and Y^N_C samples are taken
        anchors: boundary points for Y^N_C tracking
        tagged: particle ids that get dedicated candidate streams, in tag order

    Raises:
        InvalidAnchorError: an anchor is off the boundary or outside the domain
    """
    started = wallclock.perf_counter()
    if T > model.horizon + 1e-12:
        raise ValueError(f"T={T} exceeds the model horizon {model.horizon}")
    for s in snap_times:
        if not 0.0 <= s <= T:
            raise ValueError(f"Snapshot time {s} outside [0, {T}]")
    R = model.require_rate_bound()
    state = ParticleState(model, assignment, debug=debug)
    anchors = [Anchor(float(a.y0), float(a.t0)) for a in anchors]
    for anchor in anchors:
        state.register_anchor(anchor)
        if anchor.t0 > T:
            raise InvalidAnchorError(f"Anchor {anchor.label} starts after T={T}")

    N = state.N
    tagged = [int(p) for p in tagged]
    if len(set(tagged)) != len(tagged) or any(not 0 <= p < N for p in tagged):
        raise ValueError(f"Tagged particles must be distinct ids in [0, {N})")
    tagged_set = set(tagged)
    bulk_ids = [pid for pid in range(N) if pid not in tagged_set]

    # untagged particles share one merged stream of rate (N - tags) R; each tag owns one
    bulk_generator = make_generator(seed, StreamPurpose.BULK, N)
    tag_streams = [tagged_stream(seed, k, R, chunk_size) for k in range(len(tagged))]
    streams = [CandidateStream(bulk_generator, len(bulk_ids) * R, len(bulk_ids), chunk_size)]
    streams += tag_streams

    # constant rates skip the rank lookup
    rates = model.rates
    constant_accept = [
        (w.eval(0.0, 0.0) / R if R > 0 else 0.0) if w.is_constant else None for w in rates
    ]

    traces = []
    tag_rank = []
    for k, pid in enumerate(tagged):
        rank = state.rank(pid)
        y0 = (rank - 1) / N
        traces.append(TaggedTrace(k, pid, state.type_of[pid], y0, changes=[(0.0, y0)]))
        tag_rank.append(rank)

    snap_set = {float(s) for s in snap_times}
    snapshots: list[EmpiricalSnapshot] = []
    yc: dict[Anchor, list[tuple[float, float]]] = {a: [] for a in anchors}
    candidates = accepted = overshoots = 0

    def checkpoint(at: float) -> None:
        state.now = at
        state.activate_anchors(at)
        if at in snap_set:
            snapshots.append(state.snapshot())
            for anchor, samples in yc.items():
                if anchor.t0 <= at:
                    samples.append((at, state.track_Yc(anchor)))

    pending = _checkpoints(snap_times, anchors, T)
    next_check = 0
    type_of = state.type_of
    recency = state.recency

    while True:
        # earliest candidate over all streams
        best = streams[0].peek()
        source = 0
        for k in range(1, len(streams)):
            candidate_time = streams[k].peek()
            if candidate_time < best:
                best = candidate_time
                source = k
        # checkpoints strictly before the next candidate
        while next_check < len(pending) and pending[next_check] < best:
            checkpoint(pending[next_check])
            next_check += 1
        if best > T:
            break

        when, pick, u = streams[source].pop()
        candidates += 1
        pid = bulk_ids[pick] if source == 0 else tagged[source - 1]
        a = type_of[pid]
        rank = -1
        # thinning: accept with probability w_a(y, t) / R
        p = constant_accept[a]
        if p is None:
            rank = recency.rank(pid)
            rate = rates[a].eval((rank - 1) / N, when)
            if rate > R:
                overshoots += 1
            p = rate / R
        if u >= p:
            continue

        accepted += 1
        # tags ranked ahead of the jumper move back one place; the jumper goes to rank 1
        if traces:
            if rank < 0:
                rank = recency.rank(pid)
            for k, trace in enumerate(traces):
                if trace.particle == pid:
                    trace.jumps.append((when, (rank - 1) / N))
                    tag_rank[k] = 1
                    trace.changes.append((when, 0.0))
                elif tag_rank[k] < rank:
                    tag_rank[k] += 1
                    trace.changes.append((when, (tag_rank[k] - 1) / N))
        state.jump(pid, when)

    while next_check < len(pending):
        checkpoint(pending[next_check])
        next_check += 1
    state.now = T

    if overshoots:
        logger.warning("Acceptance probability exceeded 1", overshoots=overshoots, rate_bound=R)

    runtime = wallclock.perf_counter() - started
    output = SimOutput(
        N=N,
        seed=seed,
        horizon=T,
        rate_bound=R,
        model_hash=model_hash(model),
        snapshots=snapshots,
        yc=yc,
        tagged=traces,
        jump_count=np.asarray(state.jump_count, dtype=np.int64),
        final_order=recency.order(),
        candidates=candidates,
        accepted=accepted,
        overshoots=overshoots,
        compactions=recency.compactions,
        counters={
            "bulk": generator_counter(bulk_generator),
            **{f"tag_{k}": generator_counter(s.generator) for k, s in enumerate(tag_streams)},
        },
        runtime_seconds=runtime if record_timing else None,
    )
    logger.info(
        "Simulated ranking process",
        N=N, seed=seed, horizon=T, candidates=candidates, accepted=accepted,
    )
    return output
