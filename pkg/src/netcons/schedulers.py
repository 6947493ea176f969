"""Interaction schedulers.

Every scheduler picks the first node A uniformly and then the second node B:

* ``random``: B uniform over the other n - 1 nodes.
* ``history``: with probability 0.75 B is drawn from A's last 50 partners,
  otherwise uniformly.
* ``reverse-history``: the same with probability 0.25 for the history branch.
* ``connection``: with probability 0.8 B is an active neighbour of A,
  otherwise uniformly.

An empty history (or an isolated A for ``connection``) falls back to the
uniform choice, so every ordered pair always has positive probability.

The module-level ``next_pair_*`` functions are the plain one-step versions.
:class:`Scheduler` produces the same distributions for the run loop and
draws its random numbers in blocks.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "SchedulerKind",
    "SchedulerConfig",
    "History",
    "Scheduler",
    "make_scheduler",
    "next_pair_random",
    "next_pair_history",
    "next_pair_reverse_history",
    "next_pair_connection",
    "choose_uniform",
    "choose_from_history",
    "choose_by_connection",
]

HISTORY_CAPACITY = 50
HISTORY_PROB = 0.75
REVERSE_HISTORY_PROB = 0.25
CONNECTION_PROB = 0.80

_BLOCK = 4096


class SchedulerKind(str, Enum):
    RANDOM = "random"
    HISTORY = "history"
    REVERSE_HISTORY = "reverse-history"
    CONNECTION = "connection"


@dataclass(frozen=True)
class SchedulerConfig:
    kind: SchedulerKind = SchedulerKind.RANDOM
    history_capacity: int = HISTORY_CAPACITY
    # probability of the non-uniform branch; None means the kind's default
    bias: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", SchedulerKind(self.kind))
        if self.history_capacity < 1:
            raise ValueError("history capacity must be >= 1")
        if self.bias is not None and not 0.0 <= self.bias <= 1.0:
            raise ValueError(f"branch probability must be in [0, 1], got {self.bias}")

    @property
    def branch_probability(self) -> float:
        if self.bias is not None:
            return self.bias
        return {
            SchedulerKind.RANDOM: 0.0,
            SchedulerKind.HISTORY: HISTORY_PROB,
            SchedulerKind.REVERSE_HISTORY: REVERSE_HISTORY_PROB,
            SchedulerKind.CONNECTION: CONNECTION_PROB,
        }[self.kind]

    @classmethod
    def coerce(cls, value) -> SchedulerConfig:
        if isinstance(value, SchedulerConfig):
            return value
        return cls(kind=SchedulerKind(value))

    def with_overrides(self, **kw) -> SchedulerConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


class History:
    """Per-node buffers of the most recent interaction partners.

    Duplicates are kept; the oldest entry is evicted once ``capacity`` is
    reached. A node never appears in its own buffer.
    """

    def __init__(self, n: int, capacity: int = HISTORY_CAPACITY):
        self.capacity = capacity
        self.buffers = [deque(maxlen=capacity) for _ in range(n)]

    def record(self, a: int, b: int) -> None:
        self.buffers[a].append(b)
        self.buffers[b].append(a)

    def __getitem__(self, v: int) -> deque:
        return self.buffers[v]


# ---------------------------------------------------------------------------
# one-step functions


def choose_uniform(a: int, n: int, rng: np.random.Generator) -> int:
    b = int(rng.integers(0, n - 1))
    return b + 1 if b >= a else b


def choose_from_history(
    a: int, n: int, buffer: Sequence[int], rng: np.random.Generator, p: float
) -> int:
    if len(buffer) and rng.random() < p:
        b = buffer[int(rng.integers(0, len(buffer)))]
        assert b != a, "history buffers never hold the owner"
        return b
    return choose_uniform(a, n, rng)


def choose_by_connection(
    a: int, n: int, neighbours: Sequence[int], rng: np.random.Generator, p: float = CONNECTION_PROB
) -> int:
    if len(neighbours) and rng.random() < p:
        return neighbours[int(rng.integers(0, len(neighbours)))]
    return choose_uniform(a, n, rng)


def next_pair_random(n: int, rng: np.random.Generator) -> tuple[int, int]:
    a = int(rng.integers(0, n))
    return a, choose_uniform(a, n, rng)


def next_pair_history(
    n: int, history: History, rng: np.random.Generator, p: float = HISTORY_PROB
) -> tuple[int, int]:
    a = int(rng.integers(0, n))
    return a, choose_from_history(a, n, history[a], rng, p)


def next_pair_reverse_history(
    n: int, history: History, rng: np.random.Generator, p: float = REVERSE_HISTORY_PROB
) -> tuple[int, int]:
    return next_pair_history(n, history, rng, p)


def next_pair_connection(
    n: int, config, rng: np.random.Generator, p: float = CONNECTION_PROB
) -> tuple[int, int]:
    a = int(rng.integers(0, n))
    return a, choose_by_connection(a, n, config.nbrs[a], rng, p)


# ---------------------------------------------------------------------------
# run-loop schedulers


class Scheduler:
    """Scheduler state for one run: kind, history buffers and RNG stream."""

    def __init__(self, config: SchedulerConfig, n: int, rng: np.random.Generator):
        if n < 2:
            raise ValueError("need at least two nodes")
        self.config = config
        self.kind = config.kind
        self.n = n
        self.rng = rng
        self.p = config.branch_probability
        self.history = (
            History(n, config.history_capacity)
            if self.kind in (SchedulerKind.HISTORY, SchedulerKind.REVERSE_HISTORY)
            else None
        )

    def pairs(self, cfg) -> Iterator[tuple[int, int]]:
        """Endless stream of ordered pairs.

        Each pair is computed when requested, so ``connection`` sees the
        configuration as left by the previous interaction.
        """
        if self.kind is SchedulerKind.RANDOM:
            return self._random()
        if self.kind is SchedulerKind.CONNECTION:
            return self._connection(cfg)
        return self._history()

    def _random(self):
        n, rng = self.n, self.rng
        while True:
            a = rng.integers(0, n, _BLOCK)
            b = rng.integers(0, n - 1, _BLOCK)
            b += b >= a
            yield from zip(a.tolist(), b.tolist())

    def _blocks(self):
        n, rng = self.n, self.rng
        while True:
            a = rng.integers(0, n, _BLOCK).tolist()
            u = rng.random(_BLOCK).tolist()
            r = rng.random(_BLOCK).tolist()
            yield from zip(a, u, r)

    def _history(self):
        n, p = self.n, self.p
        buffers = self.history.buffers
        m = n - 1
        for a, u, r in self._blocks():
            buf = buffers[a]
            if buf and u < p:
                b = buf[int(r * len(buf))]
            else:
                b = int(r * m)
                if b >= a:
                    b += 1
            buf.append(b)
            buffers[b].append(a)
            yield a, b

    def _connection(self, cfg):
        n, p = self.n, self.p
        nbrs = cfg.nbrs
        m = n - 1
        for a, u, r in self._blocks():
            na = nbrs[a]
            if na and u < p:
                b = na[int(r * len(na))]
            else:
                b = int(r * m)
                if b >= a:
                    b += 1
            yield a, b


def make_scheduler(config: SchedulerConfig | str, n: int, rng: np.random.Generator) -> Scheduler:
    return Scheduler(SchedulerConfig.coerce(config), n, rng)
