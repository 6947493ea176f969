"""Configuration, interaction rule application and the run loop.

A run has three stages: build the initial configuration, apply scheduler
selected interactions until the detector fires or the step budget is spent,
then extract a :class:`RunResult`.

Rules are matched on the ordered pair handed over by the scheduler first and
on the reversed pair second, so the printed (asymmetric) tables react to a
pair regardless of which node the scheduler names first.
"""

from __future__ import annotations

import functools
import hashlib
import re
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .detectors import DetectorKind, make_detector, resolve_detector
from .protocols import ProtocolSpec, Rule
from .schedulers import SchedulerConfig, make_scheduler

__all__ = [
    "NodeState",
    "Configuration",
    "InteractionOutcome",
    "RunResult",
    "InvalidPopulationError",
    "SelfInteractionError",
    "init_configuration",
    "apply_interaction",
    "run",
    "Simulation",
    "snapshot",
    "parse_dot_edges",
    "spawn_streams",
]


class InvalidPopulationError(ValueError):
    pass


class SelfInteractionError(ValueError):
    pass


@dataclass(frozen=True)
class NodeState:
    symbol: str
    payload: tuple[int, int] | None = None


@dataclass(frozen=True)
class InteractionOutcome:
    changed: bool
    rule_applied: Rule | str | None = None


@dataclass
class RunResult:
    protocol: str
    scheduler: str
    detector: str
    n: int
    seed: int | None
    converged: bool
    total_interactions: int
    effective_interactions: int
    final_census: dict[str, int] = field(default_factory=dict)
    leader_counters: tuple[int, int] | None = None
    head_start: int | None = None
    census_trace: np.ndarray | None = field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# compiled protocol


@dataclass(frozen=True)
class _Compiled:
    index: dict[str, int]
    # (s_initiator * nq + s_responder) * 2 + e -> (new_i, new_r, new_e, rule_no)
    table: tuple
    counting: bool


@functools.lru_cache(maxsize=64)
def _compile(protocol: ProtocolSpec) -> _Compiled:
    index = {s: i for i, s in enumerate(protocol.states)}
    nq = len(index)
    direct = {}
    for k, rule in enumerate(protocol.rules):
        a, b, e = rule.lhs
        a2, b2, e2 = rule.rhs
        direct[(index[a], index[b], e)] = (index[a2], index[b2], e2, k)
    table = [None] * (nq * nq * 2)
    for a in range(nq):
        for b in range(nq):
            for e in (0, 1):
                hit = direct.get((a, b, e))
                if hit is None:
                    rev = direct.get((b, a, e))
                    if rev is not None:
                        hit = (rev[1], rev[0], rev[2], rev[3])
                table[(a * nq + b) * 2 + e] = hit
    return _Compiled(index=index, table=tuple(table), counting=protocol.is_counting)


# ---------------------------------------------------------------------------
# configuration


class Configuration:
    """Node states plus the active edge set of one run.

    Per-node neighbour lists are kept alongside a position map so edges can be
    tested, added, removed and sampled in O(1).
    """

    def __init__(self, protocol: ProtocolSpec, n: int):
        if n < 2:
            raise InvalidPopulationError(f"population size must be >= 2, got {n}")
        self.protocol = protocol
        self.n = n
        self._compiled = _compile(protocol)
        self.symbols = protocol.states
        self.state = [0] * n
        self.census = [0] * len(protocol.states)
        self.census[0] = n
        self.nbrs: list[list[int]] = [[] for _ in range(n)]
        self.pos: list[dict[int, int]] = [{} for _ in range(n)]
        self.degree = [0] * n
        self.degree_count = [0] * n
        self.degree_count[0] = n
        self.num_edges = 0
        self.edge_version = 0
        self.leader: int | None = None
        self.r0 = self.r1 = 0

    # states ---------------------------------------------------------------

    def set_state(self, v: int, symbol: str) -> None:
        s = self._compiled.index[symbol]
        self.census[self.state[v]] -= 1
        self.census[s] += 1
        self.state[v] = s

    def symbol(self, v: int) -> str:
        return self.symbols[self.state[v]]

    def node_state(self, v: int) -> NodeState:
        if v == self.leader and self.symbol(v) == "l":
            return NodeState("l", (self.r0, self.r1))
        return NodeState(self.symbol(v))

    def census_dict(self) -> dict[str, int]:
        return {s: c for s, c in zip(self.symbols, self.census) if c}

    @property
    def leader_counters(self) -> tuple[int, int] | None:
        return (self.r0, self.r1) if self.leader is not None and self.protocol.is_counting else None

    # edges ----------------------------------------------------------------

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.pos[u]

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise SelfInteractionError("self-edges are not allowed")
        if v in self.pos[u]:
            return
        for x, y in ((u, v), (v, u)):
            self.pos[x][y] = len(self.nbrs[x])
            self.nbrs[x].append(y)
            d = self.degree[x]
            self.degree_count[d] -= 1
            self.degree_count[d + 1] += 1
            self.degree[x] = d + 1
        self.num_edges += 1
        self.edge_version += 1

    def remove_edge(self, u: int, v: int) -> None:
        if v not in self.pos[u]:
            return
        for x, y in ((u, v), (v, u)):
            i = self.pos[x].pop(y)
            last = self.nbrs[x].pop()
            if last != y:
                self.nbrs[x][i] = last
                self.pos[x][last] = i
            d = self.degree[x]
            self.degree_count[d] -= 1
            self.degree_count[d - 1] += 1
            self.degree[x] = d - 1
        self.num_edges -= 1
        self.edge_version += 1

    def active_edges(self) -> set[tuple[int, int]]:
        return {(u, v) for u in range(self.n) for v in self.nbrs[u] if u < v}

    @classmethod
    def from_edges(cls, protocol: ProtocolSpec, n: int, edges, states=None) -> Configuration:
        """Build a configuration directly, e.g. for detector checks."""
        cfg = cls(protocol, n)
        if states is not None:
            for v, s in enumerate(states):
                cfg.set_state(v, s)
        for u, v in edges:
            cfg.add_edge(u, v)
        return cfg

    def copy(self) -> Configuration:
        other = Configuration.__new__(Configuration)
        other.__dict__.update(self.__dict__)
        other.state = list(self.state)
        other.census = list(self.census)
        other.nbrs = [list(x) for x in self.nbrs]
        other.pos = [dict(x) for x in self.pos]
        other.degree = list(self.degree)
        other.degree_count = list(self.degree_count)
        return other

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return (
            self.protocol == other.protocol
            and self.state == other.state
            and self.active_edges() == other.active_edges()
            and self.degree == other.degree
            and (self.r0, self.r1, self.leader) == (other.r0, other.r1, other.leader)
        )


def init_configuration(protocol: ProtocolSpec, n: int) -> Configuration:
    """Initial configuration: all edges inactive, states per the protocol.

    For the counting protocol node 0 is the leader ``l(b, 0)`` and nodes
    1..b start in ``q1``.
    """
    cfg = Configuration(protocol, n)
    idx = cfg._compiled.index
    cfg.state = [idx[protocol.initial]] * n
    cfg.census = [0] * len(idx)
    cfg.census[idx[protocol.initial]] = n
    if protocol.leader is not None:
        cfg.leader = 0
        cfg.set_state(0, protocol.leader)
    if protocol.is_counting:
        b = protocol.head_start
        if b > n - 1:
            raise InvalidPopulationError(f"head start b={b} needs n >= b + 1, got n={n}")
        cfg.r0, cfg.r1 = b, 0
        for v in range(1, b + 1):
            cfg.set_state(v, "q1")
    return cfg


def _counting_apply(cfg: Configuration, u: int, v: int) -> InteractionOutcome:
    if cfg.leader not in (u, v):
        return InteractionOutcome(False)
    lead = cfg.leader
    other = v if u == lead else u
    if cfg.symbol(lead) == "halt":
        return InteractionOutcome(False)
    if cfg.r0 == cfg.r1:
        cfg.set_state(lead, "halt")
        return InteractionOutcome(True, "halt")
    s = cfg.symbol(other)
    if s == "q0":
        cfg.r0 += 1
        cfg.set_state(other, "q1")
        return InteractionOutcome(True, "count-q0")
    if s == "q1":
        cfg.r1 += 1
        cfg.set_state(other, "q2")
        return InteractionOutcome(True, "count-q1")
    return InteractionOutcome(False)


def apply_interaction(
    config: Configuration, initiator: int, responder: int, protocol: ProtocolSpec | None = None
) -> InteractionOutcome:
    """Apply one interaction in place and report whether anything changed."""
    if initiator == responder:
        raise SelfInteractionError(f"node {initiator} cannot interact with itself")
    protocol = protocol or config.protocol
    comp = _compile(protocol)
    if comp.counting:
        return _counting_apply(config, initiator, responder)
    nq = len(comp.index)
    sa, sb = config.state[initiator], config.state[responder]
    e = 1 if responder in config.pos[initiator] else 0
    hit = comp.table[(sa * nq + sb) * 2 + e]
    if hit is None:
        return InteractionOutcome(False)
    na, nb, ne, k = hit
    rule = protocol.rules[k]
    if (na, nb, ne) == (sa, sb, e):
        return InteractionOutcome(False, rule)
    config.set_state(initiator, protocol.states[na])
    config.set_state(responder, protocol.states[nb])
    if ne != e:
        if ne:
            config.add_edge(initiator, responder)
        else:
            config.remove_edge(initiator, responder)
    return InteractionOutcome(True, rule)


# ---------------------------------------------------------------------------
# run loop


def spawn_streams(seed: int | None, count: int = 2) -> list[np.random.Generator]:
    """Independent generator streams derived from one run seed."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def draw_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**63))


def _rule_label(protocol: ProtocolSpec, k) -> str:
    if k is None:
        return "-"
    return str(k) if isinstance(k, int) else k


class Simulation:
    """One run: configuration, scheduler and detector with a shared seed.

    ``trace`` receives one line per step::

        <step> <initiator> <responder> <rule-id> <changed>

    where rule-id is the 0-based rule index (a name for the counting protocol)
    or ``-`` when no rule matched.
    """

    def __init__(
        self,
        protocol: ProtocolSpec,
        n: int,
        scheduler: SchedulerConfig | str = "random",
        detector: DetectorKind | str | None = None,
        seed: int | None = None,
        trace: TextIO | None = None,
        record_census: bool = False,
        snapshot_every: int | None = None,
        on_snapshot: Callable[[int, str], None] | None = None,
    ):
        self.protocol = protocol
        self.seed = draw_seed() if seed is None else seed
        self.scheduler_config = SchedulerConfig.coerce(scheduler)
        self.detector_kind = resolve_detector(protocol, detector)
        self.config = init_configuration(protocol, n)
        self.detector = make_detector(self.detector_kind, self.config)
        sched_rng, _ = spawn_streams(self.seed)
        self.scheduler = make_scheduler(self.scheduler_config, n, sched_rng)
        self._pairs = self.scheduler.pairs(self.config)
        self.trace = trace
        self.snapshot_every = snapshot_every
        self.on_snapshot = on_snapshot
        self.total = 0
        self.effective = 0
        self.converged = self.detector.check()
        self._census_rows: list[list[int]] | None = [] if record_census else None

    def run(self, max_steps: int) -> RunResult:
        if max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if not self.converged and max_steps > self.total:
            if self.config._compiled.counting:
                self._loop_counting(max_steps)
            else:
                self._loop_table(max_steps)
        return self.result()

    def result(self) -> RunResult:
        cfg = self.config
        census_trace = None
        if self._census_rows is not None:
            census_trace = np.asarray(self._census_rows, dtype=np.int64).reshape(
                -1, len(cfg.census)
            )
        return RunResult(
            protocol=self.protocol.name,
            scheduler=self.scheduler_config.kind.value,
            detector=self.detector_kind.value,
            n=cfg.n,
            seed=self.seed,
            converged=self.converged,
            total_interactions=self.total,
            effective_interactions=self.effective,
            final_census=cfg.census_dict(),
            leader_counters=cfg.leader_counters,
            head_start=self.protocol.head_start if self.protocol.is_counting else None,
            census_trace=census_trace,
        )

    def _observe(self, step, a, b, rule, changed):
        if self.trace is not None:
            self.trace.write(f"{step} {a} {b} {_rule_label(self.protocol, rule)} {int(changed)}\n")
        if self._census_rows is not None:
            self._census_rows.append(list(self.config.census))
        if self.snapshot_every and step % self.snapshot_every == 0 and self.on_snapshot:
            self.on_snapshot(step, snapshot(self.config))

    def _loop_table(self, max_steps: int) -> None:
        cfg = self.config
        table = cfg._compiled.table
        nq = len(cfg.census)
        state, pos, census = cfg.state, cfg.pos, cfg.census
        check = self.detector.check
        structural = self.detector.structural
        observe = (
            self._observe
            if (self.trace is not None or self._census_rows is not None or self.snapshot_every)
            else None
        )
        steps, eff = self.total, self.effective
        done = False
        for _, (a, b) in zip(range(max_steps - steps), self._pairs):
            steps += 1
            sa = state[a]
            sb = state[b]
            e = 1 if b in pos[a] else 0
            hit = table[(sa * nq + sb) * 2 + e]
            if hit is None:
                if observe:
                    observe(steps, a, b, None, False)
                continue
            na, nb, ne, k = hit
            if na == sa and nb == sb and ne == e:
                if observe:
                    observe(steps, a, b, k, False)
                continue
            eff += 1
            if na != sa:
                census[sa] -= 1
                census[na] += 1
                state[a] = na
            if nb != sb:
                census[sb] -= 1
                census[nb] += 1
                state[b] = nb
            if ne != e:
                if ne:
                    cfg.add_edge(a, b)
                else:
                    cfg.remove_edge(a, b)
                if observe:
                    observe(steps, a, b, k, True)
                if check():
                    done = True
                    break
            else:
                if observe:
                    observe(steps, a, b, k, True)
                if not structural and check():
                    done = True
                    break
        self.total, self.effective = steps, eff
        self.converged = done

    def _loop_counting(self, max_steps: int) -> None:
        cfg = self.config
        idx = cfg._compiled.index
        L, HALT, Q0, Q1, Q2 = idx["l"], idx["halt"], idx["q0"], idx["q1"], idx["q2"]
        state, census = cfg.state, cfg.census
        lead = cfg.leader
        r0, r1 = cfg.r0, cfg.r1
        check = self.detector.check
        observe = (
            self._observe
            if (self.trace is not None or self._census_rows is not None or self.snapshot_every)
            else None
        )
        steps, eff = self.total, self.effective
        done = False
        for _, (a, b) in zip(range(max_steps - steps), self._pairs):
            steps += 1
            if a == lead:
                other = b
            elif b == lead:
                other = a
            else:
                if observe:
                    observe(steps, a, b, None, False)
                continue
            if state[lead] != L:
                if observe:
                    observe(steps, a, b, None, False)
                continue
            if r0 == r1:
                state[lead] = HALT
                census[L] -= 1
                census[HALT] += 1
                rule = "halt"
            else:
                so = state[other]
                if so == Q0:
                    r0 += 1
                    state[other] = Q1
                    census[Q0] -= 1
                    census[Q1] += 1
                    rule = "count-q0"
                elif so == Q1:
                    r1 += 1
                    state[other] = Q2
                    census[Q1] -= 1
                    census[Q2] += 1
                    rule = "count-q1"
                else:
                    if observe:
                        observe(steps, a, b, None, False)
                    continue
            eff += 1
            cfg.r0, cfg.r1 = r0, r1
            if observe:
                observe(steps, a, b, rule, True)
            if check():
                done = True
                break
        cfg.r0, cfg.r1 = r0, r1
        self.total, self.effective = steps, eff
        self.converged = done


def run(
    protocol: ProtocolSpec,
    n: int,
    scheduler: SchedulerConfig | str = "random",
    detector: DetectorKind | str | None = None,
    max_steps: int = 10**9,
    seed: int | None = None,
    **kwargs,
) -> RunResult:
    """Run one simulation to convergence or until ``max_steps`` interactions.

    Identical (protocol, n, scheduler, detector, seed) give identical results.
    Extra keyword arguments go to :class:`Simulation` (``trace``,
    ``record_census``, ``snapshot_every``, ``on_snapshot``).
    """
    return Simulation(protocol, n, scheduler, detector, seed, **kwargs).run(max_steps)


def trace_digest(lines: str) -> str:
    return hashlib.sha256(lines.encode()).hexdigest()


# ---------------------------------------------------------------------------
# DOT output


def snapshot(config: Configuration) -> str:
    """The active-edge graph as DOT text, nodes labelled by their state."""
    out = ["graph configuration {"]
    for v in range(config.n):
        ns = config.node_state(v)
        label = ns.symbol if ns.payload is None else f"{ns.symbol}({ns.payload[0]},{ns.payload[1]})"
        out.append(f'  {v} [label="{label}"];')
    for u, v in sorted(config.active_edges()):
        out.append(f"  {u} -- {v};")
    out.append("}")
    return "\n".join(out) + "\n"


_DOT_EDGE = re.compile(r"^\s*(\d+)\s*--\s*(\d+)\s*;\s*$")


def parse_dot_edges(text: str) -> set[tuple[int, int]]:
    edges = set()
    for line in text.splitlines():
        m = _DOT_EDGE.match(line)
        if m:
            u, v = int(m.group(1)), int(m.group(2))
            edges.add((min(u, v), max(u, v)))
    return edges
