"""Protocol definitions: built-in transition tables, a text format, counting
leader semantics and a random protocol generator.

A table protocol is a finite set of rules

    (a, b, e) -> (a', b', e')

where ``a`` and ``b`` are the states of the initiator and the responder and
``e`` is the state (0 inactive, 1 active) of the connection between them.
Triples without a rule are identity interactions.

The text format is line oriented, ``#`` starts a comment::

    name: faster-global-line
    states: q0 q1 q2 q l f
    initial: all q0
    rule: (q0, q0, 0) -> (q1, l, 1)
    rule: (l, q0, 0) -> (q2, l, 1)

``initial:`` is either ``all <state>`` or ``leader <state> rest <state>``.
An optional ``symmetric: true`` line is recorded on the protocol.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "Rule",
    "ProtocolSpec",
    "CountingLeaderState",
    "ProtocolParseError",
    "UndeclaredSymbolError",
    "DuplicateRuleError",
    "EdgeStateError",
    "MissingInitialError",
    "BUILTIN_NAMES",
    "builtin",
    "parse_protocol_file",
    "format_protocol",
    "check_protocol",
    "counting_transition",
    "random_protocol",
]

TABLE = "table"
COUNTING = "counting"


@dataclass(frozen=True)
class Rule:
    lhs: tuple[str, str, int]
    rhs: tuple[str, str, int]

    def __str__(self) -> str:
        a, b, e = self.lhs
        a2, b2, e2 = self.rhs
        return f"({a}, {b}, {e}) -> ({a2}, {b2}, {e2})"


@dataclass(frozen=True)
class ProtocolSpec:
    """Immutable protocol description.

    ``initial`` is the state every node starts in. When ``leader`` is set,
    node 0 starts in the leader state instead and the rest in ``initial``.
    For ``kind == "counting"`` the rules are implicit and ``head_start`` is
    the initial lead ``b`` of the first counter.
    """

    name: str
    states: tuple[str, ...]
    rules: tuple[Rule, ...] = ()
    initial: str = "q0"
    leader: str | None = None
    kind: str = TABLE
    head_start: int = 0
    symmetric: bool = False

    def __post_init__(self):
        if len(set(self.states)) != len(self.states):
            raise ValueError(f"duplicate states in {self.states}")
        declared = set(self.states)
        for s in (self.initial, self.leader):
            if s is not None and s not in declared:
                raise ValueError(f"initial state {s!r} not in Q")
        if self.kind not in (TABLE, COUNTING):
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.head_start < 0:
            raise ValueError("head start must be >= 0")
        seen = set()
        for rule in self.rules:
            for sym in rule.lhs[:2] + rule.rhs[:2]:
                if sym not in declared:
                    raise ValueError(f"rule {rule} uses undeclared state {sym!r}")
            if rule.lhs[2] not in (0, 1) or rule.rhs[2] not in (0, 1):
                raise ValueError(f"rule {rule} has an edge state outside {{0, 1}}")
            if rule.lhs in seen:
                raise ValueError(f"duplicate rule for {rule.lhs}")
            seen.add(rule.lhs)

    @property
    def is_counting(self) -> bool:
        return self.kind == COUNTING

    def rule_for(self, a: str, b: str, e: int) -> Rule | None:
        for rule in self.rules:
            if rule.lhs == (a, b, e):
                return rule
        return None


def _rules(*rows: tuple[str, str, int, str, str, int]) -> tuple[Rule, ...]:
    return tuple(Rule(lhs=r[:3], rhs=r[3:]) for r in rows)


_FAST_GLOBAL_LINE = ProtocolSpec(
    name="fast-global-line",
    states=("q0", "q1", "q2", "q2'", "l", "l'", "l''", "f0", "f1"),
    rules=_rules(
        ("q0", "q0", 0, "q1", "l", 1),
        ("l", "q0", 0, "q2", "l", 1),
        ("l", "l", 0, "q2'", "l'", 1),
        ("l'", "q2", 1, "l''", "f1", 0),
        ("l'", "q1", 1, "l''", "f0", 0),
        ("l''", "q2'", 1, "l", "q2", 1),
        ("l", "f0", 0, "q2", "l", 1),
        ("l", "f1", 0, "q2'", "l'", 1),
    ),
)

_FASTER_GLOBAL_LINE = ProtocolSpec(
    name="faster-global-line",
    states=("q0", "q1", "q2", "q", "l", "f"),
    rules=_rules(
        ("q0", "q0", 0, "q1", "l", 1),
        ("l", "q0", 0, "q2", "l", 1),
        ("l", "q", 0, "q2", "l", 1),
        ("l", "l", 0, "l", "f", 0),
        ("f", "q2", 1, "q", "f", 0),
        ("f", "q1", 1, "q", "q", 0),
    ),
)

# Only the prose description of the star protocol is available; this is the
# smallest table with the described stable configuration.
_GLOBAL_STAR = ProtocolSpec(
    name="global-star",
    states=("c", "p"),
    initial="c",
    rules=_rules(
        ("c", "c", 0, "c", "p", 1),
        ("c", "p", 0, "c", "p", 1),
        ("p", "p", 1, "p", "p", 0),
    ),
)

# Invariant: a node in q_i has degree i.
_CYCLE_COVER = ProtocolSpec(
    name="cycle-cover",
    states=("q0", "q1", "q2"),
    rules=_rules(
        ("q0", "q0", 0, "q1", "q1", 1),
        ("q0", "q1", 0, "q1", "q2", 1),
        ("q1", "q0", 0, "q2", "q1", 1),
        ("q1", "q1", 0, "q2", "q2", 1),
    ),
)

DEFAULT_HEAD_START = 2


def _counting(b: int) -> ProtocolSpec:
    return ProtocolSpec(
        name="counting-upper-bound",
        states=("l", "q0", "q1", "q2", "halt"),
        initial="q0",
        leader="l",
        kind=COUNTING,
        head_start=b,
    )


_BUILTINS = {
    p.name: p for p in (_FAST_GLOBAL_LINE, _FASTER_GLOBAL_LINE, _GLOBAL_STAR, _CYCLE_COVER)
}
BUILTIN_NAMES = tuple(_BUILTINS) + ("counting-upper-bound",)


def builtin(name: str, b: int = DEFAULT_HEAD_START) -> ProtocolSpec:
    """Return a built-in protocol by name.

    ``b`` is only used by ``counting-upper-bound``.
    """
    if name == "counting-upper-bound":
        return _counting(b)
    try:
        return _BUILTINS[name]
    except KeyError:
        raise LookupError(
            f"unknown protocol {name!r}; choose from {', '.join(BUILTIN_NAMES)}"
        ) from None


# ---------------------------------------------------------------------------
# counting leader


@dataclass(frozen=True)
class CountingLeaderState:
    r0: int
    r1: int = 0
    halted: bool = False

    def __post_init__(self):
        if not 0 <= self.r1 <= self.r0:
            raise ValueError(f"need 0 <= r1 <= r0, got r0={self.r0} r1={self.r1}")
        if self.halted and self.r0 != self.r1:
            raise ValueError("a halted leader must have r0 == r1")


def counting_transition(
    leader: CountingLeaderState, other: str
) -> tuple[CountingLeaderState, str]:
    """One interaction of the counting leader with a non-leader in state ``other``.

    The halt check has priority: a leader whose counters are equal halts on
    this interaction and leaves ``other`` untouched. Halted leaders are inert.
    """
    if leader.halted:
        return leader, other
    if leader.r0 == leader.r1:
        return replace(leader, halted=True), other
    if other == "q0":
        return replace(leader, r0=leader.r0 + 1), "q1"
    if other == "q1":
        return replace(leader, r1=leader.r1 + 1), "q2"
    return leader, other


# ---------------------------------------------------------------------------
# random protocols


def random_protocol(num_states: int, seed: int | None) -> ProtocolSpec:
    """A total random table protocol on ``num_states`` states.

    Every ordered lhs triple gets a right hand side drawn uniformly from
    Q x Q x {0, 1}. All nodes start in ``q0``.
    """
    if not 2 <= num_states <= 16:
        raise ValueError(f"num_states must be in [2, 16], got {num_states}")
    rng = np.random.default_rng(seed)
    states = tuple(f"q{i}" for i in range(num_states))
    lhs = list(itertools.product(range(num_states), range(num_states), (0, 1)))
    draws = rng.integers(0, [num_states, num_states, 2], size=(len(lhs), 3))
    rules = tuple(
        Rule(
            lhs=(states[a], states[b], e),
            rhs=(states[int(a2)], states[int(b2)], int(e2)),
        )
        for (a, b, e), (a2, b2, e2) in zip(lhs, draws)
    )
    return ProtocolSpec(name=f"random-{num_states}-{seed}", states=states, rules=rules)


# ---------------------------------------------------------------------------
# text format


class ProtocolParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UndeclaredSymbolError(ProtocolParseError):
    def __init__(self, symbol: str, line: int):
        self.symbol = symbol
        super().__init__(f"undeclared state {symbol!r}", line)


class DuplicateRuleError(ProtocolParseError):
    def __init__(self, lhs, line: int, first_line: int):
        self.first_line = first_line
        super().__init__(
            f"duplicate rule for {lhs} (first defined on line {first_line})", line
        )


class EdgeStateError(ProtocolParseError):
    pass


class MissingInitialError(ProtocolParseError):
    pass


_SYMBOL = r"[A-Za-z_][A-Za-z0-9_']*"
_TRIPLE = rf"\(\s*({_SYMBOL})\s*,\s*({_SYMBOL})\s*,\s*(\S+?)\s*\)"
_RULE_RE = re.compile(rf"^{_TRIPLE}\s*->\s*{_TRIPLE}$")
_SYMBOL_RE = re.compile(rf"^{_SYMBOL}$")


def _edge(token: str, line: int) -> int:
    if token not in ("0", "1"):
        raise EdgeStateError(f"edge state must be 0 or 1, got {token!r}", line)
    return int(token)


def parse_protocol_file(text: str) -> ProtocolSpec:
    """Parse the line-oriented protocol format into a :class:`ProtocolSpec`."""
    name = None
    states: list[str] | None = None
    states_line = 0
    initial = leader = None
    symmetric = False
    rules: list[Rule] = []
    rule_lines: dict[tuple, int] = {}

    def declared(sym: str, lineno: int) -> str:
        if states is None or sym not in states:
            raise UndeclaredSymbolError(sym, lineno)
        return sym

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ProtocolParseError(f"expected '<key>: <value>', got {line!r}", lineno)
        key, value = key.strip().lower(), value.strip()
        if key == "name":
            name = value
        elif key == "states":
            tokens = value.replace(",", " ").split()
            for tok in tokens:
                if not _SYMBOL_RE.match(tok):
                    raise ProtocolParseError(f"bad state name {tok!r}", lineno)
            if len(set(tokens)) != len(tokens):
                raise ProtocolParseError("duplicate state in declaration", lineno)
            if not tokens:
                raise ProtocolParseError("empty state declaration", lineno)
            states, states_line = tokens, lineno
        elif key == "initial":
            words = value.split()
            if len(words) == 2 and words[0] == "all":
                initial, leader = declared(words[1], lineno), None
            elif len(words) == 4 and words[0] == "leader" and words[2] == "rest":
                leader = declared(words[1], lineno)
                initial = declared(words[3], lineno)
            else:
                raise ProtocolParseError(
                    f"initial must be 'all <s>' or 'leader <s> rest <s>', got {value!r}",
                    lineno,
                )
        elif key == "rule":
            m = _RULE_RE.match(value)
            if not m:
                raise ProtocolParseError(f"malformed rule {value!r}", lineno)
            a, b, e, a2, b2, e2 = m.groups()
            lhs = (declared(a, lineno), declared(b, lineno), _edge(e, lineno))
            rhs = (declared(a2, lineno), declared(b2, lineno), _edge(e2, lineno))
            if lhs in rule_lines:
                raise DuplicateRuleError(lhs, lineno, rule_lines[lhs])
            rule_lines[lhs] = lineno
            rules.append(Rule(lhs=lhs, rhs=rhs))
        elif key == "symmetric":
            if value.lower() not in ("true", "false"):
                raise ProtocolParseError(f"symmetric must be true or false, got {value!r}", lineno)
            symmetric = value.lower() == "true"
        else:
            raise ProtocolParseError(f"unknown directive {key!r}", lineno)

    if states is None:
        raise ProtocolParseError("missing 'states:' declaration")
    if initial is None:
        raise MissingInitialError("missing 'initial:' directive", states_line)
    return ProtocolSpec(
        name=name or "unnamed",
        states=tuple(states),
        rules=tuple(rules),
        initial=initial,
        leader=leader,
        symmetric=symmetric,
    )


def format_protocol(spec: ProtocolSpec) -> str:
    """Inverse of :func:`parse_protocol_file` for table protocols."""
    if spec.is_counting:
        raise ValueError("the counting protocol has no table form")
    lines = [f"name: {spec.name}", "states: " + " ".join(spec.states)]
    if spec.leader is None:
        lines.append(f"initial: all {spec.initial}")
    else:
        lines.append(f"initial: leader {spec.leader} rest {spec.initial}")
    if spec.symmetric:
        lines.append("symmetric: true")
    lines.extend(f"rule: {rule}" for rule in spec.rules)
    return "\n".join(lines) + "\n"


def check_protocol(spec: ProtocolSpec) -> list[str]:
    """Lint warnings for a table protocol (empty list means clean)."""
    warnings = []
    produced = {spec.initial, spec.leader}
    for rule in spec.rules:
        produced.update(rule.rhs[:2])
    for s in spec.states:
        if s not in produced:
            warnings.append(f"state {s!r} is unreachable: not initial and in no rule output")
    identity = [r for r in spec.rules if r.lhs == r.rhs]
    for r in identity:
        warnings.append(f"rule {r} is an identity and can be dropped")
    return warnings

