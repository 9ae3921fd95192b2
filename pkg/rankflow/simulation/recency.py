"""
RANKFLOW Recency Index

Order-statistics structure for move-to-front ranking. Every particle owns a
recency slot; a jump moves it to a fresh slot above all others. A particle's
rank is 1 + the number of occupied slots above its own, answered by a binary
indexed tree in O(log capacity). When fresh slots run out the slots are
compacted to 0..N-1 and the tree is rebuilt in O(capacity).
"""

import numpy as np


class RecencyIndex:
    """Ranks 1..N over particle ids 0..N-1 with O(log N) rank and move-to-front."""

    def __init__(self, initial_rank, capacity_factor: int = 2):
        ranks = [int(x) for x in initial_rank]
        self.N = len(ranks)
        self.capacity = max(capacity_factor * self.N, self.N + 1)
        self.slot_of = [0] * self.N
        self.particle_at = [-1] * self.capacity
        for pid, rank in enumerate(ranks):
            slot = self.N - rank
            self.slot_of[pid] = slot
            self.particle_at[slot] = pid
        self.next_slot = self.N
        self.compactions = 0
        self._rebuild()

    def _rebuild(self) -> None:
        # linear-time construction: each node pushes its partial sum to its parent
        tree = [0] * (self.capacity + 1)
        for slot, pid in enumerate(self.particle_at):
            if pid >= 0:
                tree[slot + 1] += 1
        for i in range(1, self.capacity + 1):
            parent = i + (i & -i)
            if parent <= self.capacity:
                tree[parent] += tree[i]
        self.tree = tree

    def _add(self, slot: int, delta: int) -> None:
        tree = self.tree
        i = slot + 1
        size = self.capacity
        while i <= size:
            tree[i] += delta
            i += i & -i

    def _occupied_through(self, slot: int) -> int:
        """Occupied slots in [0, slot]."""
        tree = self.tree
        i = slot + 1
        total = 0
        while i > 0:
            total += tree[i]
            i -= i & -i
        return total

    def rank(self, pid: int) -> int:
        return self.N - self._occupied_through(self.slot_of[pid]) + 1

    def move_to_front(self, pid: int) -> None:
        if self.next_slot >= self.capacity:
            self._compact()
        old = self.slot_of[pid]
        self._add(old, -1)
        self.particle_at[old] = -1
        new = self.next_slot
        self.next_slot += 1
        self.slot_of[pid] = new
        self.particle_at[new] = pid
        self._add(new, 1)

    def _compact(self) -> None:
        survivors = [pid for pid in self.particle_at if pid >= 0]
        self.particle_at = [-1] * self.capacity
        for slot, pid in enumerate(survivors):
            self.particle_at[slot] = pid
            self.slot_of[pid] = slot
        self.next_slot = self.N
        self.compactions += 1
        self._rebuild()

    def order(self) -> np.ndarray:
        """Particle ids front to back (index x-1 holds the particle at rank x)."""
        occupied = [pid for pid in self.particle_at if pid >= 0]
        return np.asarray(occupied[::-1], dtype=np.int64)

    def ranks(self) -> np.ndarray:
        """ranks[pid] for every particle."""
        result = np.empty(self.N, dtype=np.int64)
        result[self.order()] = np.arange(1, self.N + 1)
        return result

    def check(self) -> None:
        """Assert the structure still encodes a permutation of 1..N."""
        occupied = [slot for slot, pid in enumerate(self.particle_at) if pid >= 0]
        if len(occupied) != self.N or self._occupied_through(self.capacity - 1) != self.N:
            raise AssertionError("recency slots do not hold exactly N particles")
        for slot in occupied:
            if self.slot_of[self.particle_at[slot]] != slot:
                raise AssertionError(f"slot {slot} and its particle disagree")
        if sorted(self.ranks().tolist()) != list(range(1, self.N + 1)):
            raise AssertionError("ranks are not a permutation of 1..N")
