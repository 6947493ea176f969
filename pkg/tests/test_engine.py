import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netcons.detectors import ConfigurationError
from netcons.engine import (
    Configuration,
    InvalidPopulationError,
    SelfInteractionError,
    Simulation,
    apply_interaction,
    init_configuration,
    parse_dot_edges,
    run,
    snapshot,
    trace_digest,
)
from netcons.protocols import ProtocolSpec, builtin, random_protocol

FAST = builtin("fast-global-line")
FASTER = builtin("faster-global-line")
STAR = builtin("global-star")
CYCLE = builtin("cycle-cover")


def recount_degrees(cfg):
    deg = [0] * cfg.n
    for u, v in cfg.active_edges():
        deg[u] += 1
        deg[v] += 1
    return deg


# init


def test_init_cycle_cover():
    cfg = init_configuration(CYCLE, 4)
    assert [cfg.symbol(v) for v in range(4)] == ["q0"] * 4
    assert cfg.active_edges() == set()


def test_init_counting():
    cfg = init_configuration(builtin("counting-upper-bound", b=1), 3)
    assert cfg.node_state(0).symbol == "l"
    assert cfg.node_state(0).payload == (1, 0)
    assert cfg.census_dict() == {"l": 1, "q0": 1, "q1": 1}
    assert cfg.node_state(1).payload is None


def test_init_smallest_population():
    cfg = init_configuration(FAST, 2)
    assert cfg.census_dict() == {"q0": 2}
    assert cfg.num_edges == 0


def test_init_rejects_tiny_population():
    with pytest.raises(InvalidPopulationError):
        init_configuration(FAST, 1)


def test_init_rejects_head_start_too_large():
    with pytest.raises(InvalidPopulationError):
        init_configuration(builtin("counting-upper-bound", b=5), 4)


# apply_interaction


def test_first_line_rule():
    cfg = init_configuration(FAST, 3)
    out = apply_interaction(cfg, 0, 1, FAST)
    assert out.changed and out.rule_applied == FAST.rules[0]
    assert (cfg.symbol(0), cfg.symbol(1)) == ("q1", "l")
    assert cfg.has_edge(0, 1) and cfg.degree[:2] == [1, 1]


def test_unmatched_triple_is_identity():
    cfg = Configuration.from_edges(FAST, 3, [], states=["q1", "q1", "q0"])
    before = cfg.copy()
    out = apply_interaction(cfg, 0, 1, FAST)
    assert not out.changed and out.rule_applied is None
    assert cfg == before


def test_cycle_cover_q1_q0():
    cfg = Configuration.from_edges(CYCLE, 3, [(0, 2)], states=["q1", "q0", "q1"])
    out = apply_interaction(cfg, 0, 1, CYCLE)
    assert out.changed
    assert (cfg.symbol(0), cfg.symbol(1)) == ("q2", "q1")
    assert cfg.has_edge(0, 1)


def test_reverse_order_matches_printed_rule():
    # only (l, q0, 0) is printed; the pair arrives as (q0-node, l-node)
    cfg = Configuration.from_edges(FASTER, 2, [], states=["q0", "l"])
    apply_interaction(cfg, 0, 1, FASTER)
    assert (cfg.symbol(0), cfg.symbol(1)) == ("l", "q2")


def test_self_interaction():
    cfg = init_configuration(FAST, 3)
    with pytest.raises(SelfInteractionError):
        apply_interaction(cfg, 1, 1, FAST)


def test_counting_apply():
    p = builtin("counting-upper-bound", b=1)
    cfg = init_configuration(p, 4)  # leader 0, node 1 in q1, nodes 2,3 in q0
    assert apply_interaction(cfg, 2, 0).rule_applied == "count-q0"
    assert cfg.leader_counters == (2, 0)
    assert not apply_interaction(cfg, 2, 3).changed
    apply_interaction(cfg, 0, 1)
    apply_interaction(cfg, 0, 2)
    assert cfg.leader_counters == (2, 2)
    assert apply_interaction(cfg, 0, 3).rule_applied == "halt"
    assert cfg.symbol(0) == "halt" and cfg.symbol(3) == "q0"


# fuzzing invariants


@settings(max_examples=60, deadline=None)
@given(
    k=st.integers(2, 6),
    proto_seed=st.integers(0, 10**6),
    n=st.integers(2, 50),
    steps=st.integers(0, 400),
    seed=st.integers(0, 10**6),
)
def test_degree_bookkeeping_and_conservation(k, proto_seed, n, steps, seed):
    protocol = random_protocol(k, proto_seed)
    cfg = init_configuration(protocol, n)
    rnd = random.Random(seed)
    for _ in range(steps):
        a, b = rnd.sample(range(n), 2)
        before = cfg.copy()
        out = apply_interaction(cfg, a, b)
        if not out.changed:
            assert cfg == before
        assert sum(cfg.census) == n
        assert all(u != v for u, v in cfg.active_edges())
    assert cfg.degree == recount_degrees(cfg)
    assert sum(cfg.degree) == 2 * len(cfg.active_edges()) == 2 * cfg.num_edges
    hist = [cfg.degree.count(d) for d in range(n)]
    assert hist == cfg.degree_count
    for v in range(n):
        assert sorted(cfg.nbrs[v]) == sorted(cfg.pos[v])
        assert all(cfg.nbrs[v][i] == u for u, i in cfg.pos[v].items())


@settings(max_examples=30, deadline=None)
@given(n=st.integers(3, 40), b=st.integers(0, 2), seed=st.integers(0, 10**6))
def test_counting_bookkeeping(n, b, seed):
    p = builtin("counting-upper-bound", b=b)
    sim = Simulation(p, n, detector="none", seed=seed)
    cfg = sim.config
    for budget in range(50, 4000, 50):
        sim.run(budget)
        c = cfg.census_dict()
        r0, r1 = cfg.r0, cfg.r1
        # nodes that left q0, and nodes that went q1 -> q2
        assert r0 - b == (n - b - 1) - c.get("q0", 0)
        assert r1 == c.get("q2", 0)
        assert 0 <= r1 <= r0 <= n


# run


def test_star_two_nodes():
    r = run(STAR, 2, seed=123)
    assert r.converged and r.total_interactions == 1 and r.effective_interactions == 1
    assert r.final_census == {"c": 1, "p": 1}


def test_faster_line_n100_in_reference_range():
    n = 100
    r = run(FASTER, n, seed=2024, max_steps=n**3)
    assert r.converged
    assert 0.03 * n**3 <= r.total_interactions <= 0.30 * n**3


@pytest.mark.parametrize("scheduler", ["random", "history", "reverse-history", "connection"])
def test_runs_are_deterministic(scheduler):
    def go():
        buf = io.StringIO()
        r = run(CYCLE, 30, scheduler, seed=77, trace=buf)
        return r, trace_digest(buf.getvalue())

    (r1, h1), (r2, h2) = go(), go()
    assert r1 == r2 and h1 == h2
    assert run(CYCLE, 3, seed=5) == run(CYCLE, 3, seed=5)


def test_different_seeds_give_different_traces():
    a, b = io.StringIO(), io.StringIO()
    run(CYCLE, 30, seed=1, trace=a)
    run(CYCLE, 30, seed=2, trace=b)
    assert a.getvalue() != b.getvalue()


def test_step_counting_is_monotone():
    sim = Simulation(FAST, 20, seed=9, detector="none")
    last_total = last_eff = 0
    for budget in range(1, 300):
        r = sim.run(budget)
        assert r.total_interactions == budget == last_total + 1
        assert last_eff <= r.effective_interactions <= r.total_interactions
        last_total, last_eff = r.total_interactions, r.effective_interactions


def test_max_steps_zero():
    r = run(FAST, 10, max_steps=0, seed=1)
    assert not r.converged and r.total_interactions == 0


def test_step_budget_exhaustion():
    r = run(FAST, 50, max_steps=100, seed=1)
    assert not r.converged and r.total_interactions == 100


def test_incompatible_detector():
    with pytest.raises(ConfigurationError):
        run(FAST, 10, detector="counting-halt", seed=1)
    with pytest.raises(ConfigurationError):
        run(builtin("counting-upper-bound"), 10, detector="spanning-line", seed=1)
    with pytest.raises(ConfigurationError):
        run(CYCLE, 2, detector="spanning-ring", seed=1)


def test_counting_with_b_plus_one_nodes():
    for b in (1, 2, 4):
        r = run(builtin("counting-upper-bound", b=b), b + 1, seed=b)
        assert r.converged and r.leader_counters == (b, b)
        assert r.leader_counters[0] == (b + 1) - 1


def test_counting_halts_everywhere():
    for n in range(3, 51):
        for seed in range(100):
            r = run(builtin("counting-upper-bound", b=2), n, seed=seed, max_steps=10**7)
            assert r.converged, (n, seed)
            r0, r1 = r.leader_counters
            assert r0 == r1 and sum(r.final_census.values()) == n


def test_trace_lines():
    buf = io.StringIO()
    r = run(STAR, 5, seed=3, trace=buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == r.total_interactions
    fields = [ln.split() for ln in lines]
    assert [int(f[0]) for f in fields] == list(range(1, len(lines) + 1))
    assert sum(int(f[4]) for f in fields) == r.effective_interactions
    for f in fields:
        assert f[3] == "-" or 0 <= int(f[3]) < len(STAR.rules)


def test_snapshot_callback():
    snaps = []
    run(CYCLE, 10, seed=2, snapshot_every=5, on_snapshot=lambda s, d: snaps.append((s, d)))
    assert snaps and all(s % 5 == 0 for s, _ in snaps)


# snapshot


def test_snapshot_isolated():
    dot = snapshot(init_configuration(FAST, 2))
    assert dot.count('label="q0"') == 2
    assert parse_dot_edges(dot) == set()


def test_snapshot_k2():
    cfg = Configuration.from_edges(STAR, 2, [(0, 1)], states=["c", "p"])
    dot = snapshot(cfg)
    assert '0 [label="c"]' in dot and '1 [label="p"]' in dot
    assert parse_dot_edges(dot) == {(0, 1)}


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] < e[1])),
    )
))
def test_snapshot_round_trip(case):
    n, edges = case
    cfg = Configuration.from_edges(FAST, n, edges)
    text = snapshot(cfg)
    assert parse_dot_edges(text) == cfg.active_edges() == edges
    assert snapshot(cfg) == text


def test_snapshot_counting_payload():
    cfg = init_configuration(builtin("counting-upper-bound", b=2), 5)
    assert 'label="l(2,0)"' in snapshot(cfg)


def test_protocol_spec_is_hashable():
    assert hash(FAST) == hash(builtin("fast-global-line"))
    assert isinstance(FAST, ProtocolSpec)


@pytest.mark.parametrize("protocol, n, fname", [
    (CYCLE, 6, "cycle_cover_n6_seed3.trace"),
    (builtin("counting-upper-bound", b=1), 5, "counting_n5_b1_seed3.trace"),
])
def test_golden_traces(data_dir, protocol, n, fname):
    buf = io.StringIO()
    run(protocol, n, seed=3, trace=buf)
    assert buf.getvalue() == (data_dir / fname).read_text()
