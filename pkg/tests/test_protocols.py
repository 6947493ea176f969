import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcons.protocols import (
    CountingLeaderState,
    DuplicateRuleError,
    EdgeStateError,
    MissingInitialError,
    ProtocolParseError,
    ProtocolSpec,
    Rule,
    UndeclaredSymbolError,
    builtin,
    check_protocol,
    counting_transition,
    format_protocol,
    parse_protocol_file,
    random_protocol,
)


def test_builtin_sizes():
    fast = builtin("fast-global-line")
    faster = builtin("faster-global-line")
    assert (len(fast.states), len(fast.rules)) == (9, 8)
    assert (len(faster.states), len(faster.rules)) == (6, 6)


def test_faster_contains_leader_leader_rule():
    faster = builtin("faster-global-line")
    assert Rule(("l", "l", 0), ("l", "f", 0)) in faster.rules


def test_cycle_cover_is_the_four_activations():
    cc = builtin("cycle-cover")
    lhs = {r.lhs for r in cc.rules}
    assert lhs == {(f"q{i}", f"q{j}", 0) for i in (0, 1) for j in (0, 1)}
    for r in cc.rules:
        i, j = int(r.lhs[0][1]), int(r.lhs[1][1])
        assert r.rhs == (f"q{i + 1}", f"q{j + 1}", 1)


def test_global_star_table():
    star = builtin("global-star")
    assert star.rule_for("c", "c", 0).rhs == ("c", "p", 1)
    assert star.rule_for("p", "p", 1).rhs == ("p", "p", 0)
    assert star.initial == "c"


def test_unknown_builtin():
    with pytest.raises(LookupError):
        builtin("global-ring")


@pytest.mark.parametrize(
    "name, fname",
    [("faster-global-line", "faster_global_line.proto"), ("fast-global-line", "fast_global_line.proto")],
)
def test_builtins_match_transcriptions(data_dir, name, fname):
    text = (data_dir / fname).read_text()
    assert parse_protocol_file(text) == builtin(name)
    body = "".join(line + "\n" for line in text.splitlines() if not line.startswith("#"))
    assert format_protocol(builtin(name)) == body


def test_empty_rule_section():
    spec = parse_protocol_file("states: a b\ninitial: all a\n")
    assert spec.rules == ()
    assert spec.name == "unnamed"


def test_undeclared_symbol_names_state_and_line():
    text = "states: q0 q1\ninitial: all q0\n\nrule: (q0, q9, 0) -> (q1, q1, 1)\n"
    with pytest.raises(UndeclaredSymbolError) as exc:
        parse_protocol_file(text)
    assert exc.value.symbol == "q9"
    assert exc.value.line == 4
    assert "q9" in str(exc.value) and "line 4" in str(exc.value)


def test_duplicate_lhs():
    text = (
        "states: a b\ninitial: all a\n"
        "rule: (a, a, 0) -> (b, b, 1)\n"
        "rule: (a, a, 0) -> (a, b, 1)\n"
    )
    with pytest.raises(DuplicateRuleError) as exc:
        parse_protocol_file(text)
    assert (exc.value.line, exc.value.first_line) == (4, 3)


@pytest.mark.parametrize("bad", ["2", "x", "01"])
def test_malformed_edge_state(bad):
    text = f"states: a b\ninitial: all a\nrule: (a, a, {bad}) -> (b, b, 1)\n"
    with pytest.raises(EdgeStateError) as exc:
        parse_protocol_file(text)
    assert exc.value.line == 3


def test_missing_initial():
    with pytest.raises(MissingInitialError):
        parse_protocol_file("states: a b\nrule: (a, a, 0) -> (b, b, 1)\n")


def test_parse_errors_are_distinct():
    kinds = {UndeclaredSymbolError, DuplicateRuleError, EdgeStateError, MissingInitialError}
    assert len(kinds) == 4
    assert all(issubclass(k, ProtocolParseError) for k in kinds)


def test_leader_initial_and_symmetric():
    spec = parse_protocol_file(
        "name: x\nstates: l q\ninitial: leader l rest q\nsymmetric: true\n"
    )
    assert (spec.leader, spec.initial, spec.symmetric) == ("l", "q", True)


def test_check_protocol_unreachable():
    spec = parse_protocol_file(
        "states: a b c\ninitial: all a\nrule: (a, c, 0) -> (b, b, 1)\n"
    )
    warnings = check_protocol(spec)
    assert len(warnings) == 1 and "'c'" in warnings[0]
    assert check_protocol(builtin("faster-global-line")) == []


_names = st.lists(
    st.from_regex(r"[a-z][a-z0-9_']{0,3}", fullmatch=True), min_size=1, max_size=5, unique=True
)


@st.composite
def protocols(draw):
    states = draw(_names)
    lhs_all = list(itertools.product(states, states, (0, 1)))
    lhs = draw(st.lists(st.sampled_from(lhs_all), unique=True, max_size=len(lhs_all)))
    rhs = st.tuples(st.sampled_from(states), st.sampled_from(states), st.sampled_from((0, 1)))
    rules = tuple(Rule(l, draw(rhs)) for l in lhs)
    leader = draw(st.none() | st.sampled_from(states))
    return ProtocolSpec(
        name=draw(st.from_regex(r"[a-z][a-z-]{0,8}", fullmatch=True)),
        states=tuple(states),
        rules=rules,
        initial=draw(st.sampled_from(states)),
        leader=leader,
        symmetric=draw(st.booleans()),
    )


@settings(max_examples=200)
@given(protocols())
def test_parse_print_round_trip(spec):
    assert parse_protocol_file(format_protocol(spec)) == spec


# counting leader


def test_counting_meets_q0():
    assert counting_transition(CountingLeaderState(3, 2), "q0") == (CountingLeaderState(4, 2), "q1")


def test_counting_meets_q1():
    assert counting_transition(CountingLeaderState(3, 1), "q1") == (CountingLeaderState(3, 2), "q2")


@pytest.mark.parametrize("other", ["q0", "q1", "q2"])
def test_counting_halts_when_equal(other):
    leader, out = counting_transition(CountingLeaderState(3, 3), other)
    assert leader.halted and out == other


def test_counting_q2_is_inert():
    assert counting_transition(CountingLeaderState(5, 2), "q2") == (CountingLeaderState(5, 2), "q2")


def test_halted_leader_is_inert():
    h = CountingLeaderState(2, 2, halted=True)
    assert counting_transition(h, "q0") == (h, "q0")


def test_counting_leader_invariants():
    with pytest.raises(ValueError):
        CountingLeaderState(1, 2)
    with pytest.raises(ValueError):
        CountingLeaderState(3, 1, halted=True)


# random protocols


def test_random_protocol_deterministic():
    assert random_protocol(4, 11) == random_protocol(4, 11)
    assert random_protocol(4, 11) != random_protocol(4, 12)


def test_random_protocol_is_total():
    spec = random_protocol(4, 3)
    assert len(spec.rules) == 4 * 4 * 2 == 32
    assert {r.lhs for r in spec.rules} == set(itertools.product(spec.states, spec.states, (0, 1)))


def test_random_protocol_closure():
    spec = random_protocol(6, 5)
    assert all(s in spec.states for r in spec.rules for s in r.rhs[:2])
    assert spec.initial == "q0" and spec.leader is None


@pytest.mark.parametrize("k", [1, 17])
def test_random_protocol_range(k):
    with pytest.raises(ValueError):
        random_protocol(k, 0)
