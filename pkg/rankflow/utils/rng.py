"""
RANKFLOW Random Streams

Counter-based Philox streams keyed by (seed, purpose, index). A tagged
particle's candidate stream depends only on the seed and the tag index, so the
same randomness drives it at every N and in the limit-path integrator.
"""

import math
from enum import IntEnum
from typing import Optional

import numpy as np

GENERATOR_NAME = "philox4x64"


class StreamPurpose(IntEnum):
    BULK = 0
    TAGGED = 1
    ASSIGNMENT = 2


def make_generator(seed: int, purpose: StreamPurpose, index: int = 0) -> np.random.Generator:
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.Philox(sequence))


def generator_counter(generator: np.random.Generator) -> list[int]:
    """Current Philox counter words, for the run manifest."""
    state = generator.bit_generator.state
    return [int(word) for word in state["state"]["counter"]]


class CandidateStream:
    """
    Homogeneous Poisson candidate times at `rate`, each with an acceptance uniform.

    With `choices` set, every candidate also carries a uniformly drawn index in
    [0, choices), which realizes the merged stream of that many particles.
    Draws happen in fixed-size chunks so consumption order is reproducible.
    """

    def __init__(
        self,
        generator: np.random.Generator,
        rate: float,
        choices: Optional[int] = None,
        chunk_size: int = 4096,
    ):
        self.generator = generator
        self.rate = float(rate)
        self.choices = choices
        self.chunk_size = chunk_size
        self._clock = 0.0
        self._times: list[float] = []
        self._picks: list[int] = []
        self._uniforms: list[float] = []
        self._pos = 0
        self.drawn = 0

    def _refill(self) -> None:
        gaps = self.generator.standard_exponential(self.chunk_size) / self.rate
        times = self._clock + np.cumsum(gaps)
        if self.choices is not None:
            self._picks = self.generator.integers(0, self.choices, self.chunk_size).tolist()
        self._uniforms = self.generator.random(self.chunk_size).tolist()
        self._times = times.tolist()
        self._clock = self._times[-1]
        self._pos = 0

    def peek(self) -> float:
        """Time of the next candidate (inf for a zero-rate stream)."""
        if self.rate <= 0.0 or (self.choices is not None and self.choices <= 0):
            return math.inf
        if self._pos >= len(self._times):
            self._refill()
        return self._times[self._pos]

    def pop(self) -> tuple[float, int, float]:
        """Consume the next candidate: (time, picked index, acceptance uniform)."""
        time = self.peek()
        if math.isinf(time):
            return time, -1, 1.0
        pos = self._pos
        self._pos += 1
        self.drawn += 1
        pick = self._picks[pos] if self.choices is not None else -1
        return time, pick, self._uniforms[pos]


def tagged_stream(seed: int, tag_index: int, rate: float, chunk_size: int = 4096) -> CandidateStream:
    """The dedicated candidate stream of tag `tag_index`, as the simulator draws it."""
    return CandidateStream(make_generator(seed, StreamPurpose.TAGGED, tag_index), rate, None, chunk_size)
