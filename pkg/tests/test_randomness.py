import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from contact_lab.errors import HorizonExceeded, LambdaOutOfRange
from contact_lab.graphs import Graph, Line, build_interval, build_star, build_sv_tree, split_at_estar
from contact_lab.randomness import (
    EV_RECOVERY,
    EventLog,
    ExplicitEventLog,
    RestrictedLog,
    derive_seed,
    extend_event_log,
    parse_event_dump,
    reachable,
    replica_seed,
    sweep,
    thin,
)

# -- brute force over explicit paths ----------------------------------------


def _open_after(recs, v, start, end):
    """No recovery of v in [start, end]."""
    return not any(start <= r <= end for r in recs[v])


def brute_reach(log, lam, source, s0, s1, target, a, b):
    """Enumerate arrow sequences out of {source} x [s0, s1] that land on target in [a, b]."""
    thr = lam / log.lambda_max
    recs = log.recoveries
    if source == target and s0 <= b:
        if s1 >= a:
            return True
        # ride the source itself from some s in [s0, s1] up to a
        last = max((r for r in recs[source] if r <= a), default=-math.inf)
        if last < s1:
            return True
    arrows = sorted((t, u, w) for (u, w), lst in log.transmissions.items() for t, m in lst if m < thr)

    def at_target(t):
        return t <= b and (t >= a or _open_after(recs, target, t, a))

    def dfs(v, t, k):
        # v is infected from time t on; try every later arrow out of v
        for j in range(k, len(arrows)):
            tt, u, w = arrows[j]
            if u != v or tt < t or not _open_after(recs, v, t, tt):
                continue
            if w == target and at_target(tt):
                return True
            if dfs(w, tt, j + 1):
                return True
        return False

    for j, (tt, u, w) in enumerate(arrows):
        if u != source or tt < s0:
            continue
        last = max((r for r in recs[source] if r <= tt), default=-math.inf)
        if last >= min(s1, tt):
            continue
        if w == target and at_target(tt):
            return True
        if dfs(w, tt, j + 1):
            return True
    return False


@st.composite
def tiny_logs(draw):
    """Small trees with hand-sized logs.

    Event times are distinct odd multiples of 1/16 and query times are
    multiples of 1/4, so no two events and no event and query coincide.
    """
    n = draw(st.integers(2, 4))
    parents = [draw(st.integers(0, k - 1)) for k in range(1, n)]
    g = Graph.from_edges([Line(z) for z in range(n)], [(p, k + 1) for k, p in enumerate(parents)])
    slots = iter(draw(st.lists(st.integers(0, 79), min_size=40, max_size=40, unique=True)))

    def times(k):
        return [(2 * next(slots) + 1) / 16 for _ in range(k)]

    recs = {v: times(draw(st.integers(0, 3))) for v in range(n)}
    trs = {}
    for u in range(n):
        for w in g.neighbors(u):
            k = draw(st.integers(0, 3))
            trs[(u, w)] = list(zip(times(k), draw(st.lists(st.floats(0, 0.999), min_size=k, max_size=k))))
    return ExplicitEventLog(g, 1.0, 10.0, recs, trs)


quarters = st.integers(0, 24).map(lambda k: k / 4)
spans = st.integers(0, 16).map(lambda k: k / 4)


@settings(max_examples=400)
@given(tiny_logs(), st.floats(0, 1), st.data())
def test_reachable_matches_path_enumeration(log, lam, data):
    n = log.graph.vertex_count
    x = data.draw(st.integers(0, n - 1))
    y = data.draw(st.integers(0, n - 1))
    s0 = data.draw(quarters)
    s1 = s0 + data.draw(spans)
    a = data.draw(quarters)
    b = a + data.draw(spans)
    got = reachable(log, lam, [(x, (s0, s1))], [y], (a, b))
    assert got == brute_reach(log, lam, x, s0, s1, y, a, b)


@settings(max_examples=400)
@given(tiny_logs(), st.floats(0, 1), quarters.filter(lambda t: t > 0))
def test_sweep_state_matches_paths_from_time_zero(log, lam, t):
    n = log.graph.vertex_count
    state = {0}
    for time, kind, v, _ in sweep(log, lam, [0], t):
        if kind == EV_RECOVERY:
            state.discard(v)
        else:
            state.add(v)
    for y in range(n):
        expect = brute_reach(log, lam, 0, 0.0, 0.0, y, t, t)
        assert (y in state) == expect


# -- determinism and laziness -------------------------------------------------


def test_same_seed_same_log():
    g = build_star(6)
    a = EventLog(g, 0.5, 20.0, 7)
    b = EventLog(g, 0.5, 20.0, 7)
    assert a.dump() == b.dump()
    assert EventLog(g, 0.5, 20.0, 8).dump() != a.dump()


def test_reading_order_does_not_matter():
    g = build_interval(5)
    a = EventLog(g, 1.0, 30.0, 3)
    b = EventLog(g, 1.0, 30.0, 3)
    forward = [list(a.recovery_stream(v, 0.0).__next__() for _ in range(1)) for v in range(5)]
    backward = [list(b.recovery_stream(v, 0.0).__next__() for _ in range(1)) for v in reversed(range(5))]
    assert forward == backward[::-1]


def test_extension_is_a_prefix_extension():
    g = build_star(4)
    short = EventLog(g, 0.8, 5.0, 11)
    long = extend_event_log(short, 50.0)
    assert long.horizon == 50.0
    for ev in short.events():
        assert ev in long.events()
    cut = [ev for ev in long.events() if ev[-2 if ev[0] == "T" else -1] < 5.0]
    assert cut == short.events()


def test_explicit_log_rejects_bad_input():
    g = build_interval(2)
    with pytest.raises(ValueError):
        ExplicitEventLog(g, 1.0, 5.0, {0: [6.0]})
    with pytest.raises(ValueError):
        ExplicitEventLog(g, 1.0, 5.0, transmissions={(0, 1): [(1.0, 1.5)]})
    log = ExplicitEventLog(g, 1.0, 5.0, {0: [2.0]})
    with pytest.raises(HorizonExceeded):
        extend_event_log(log, 10.0)
    with pytest.raises(HorizonExceeded):
        reachable(log, 1.0, [(1, 0.0)], [0], (0.0, 10.0))


def test_dump_roundtrip():
    g = build_star(5)
    log = EventLog(g, 0.7, 10.0, 5)
    again = parse_event_dump(log.dump(), g)
    assert again.events() == log.events()
    assert again.dump() == log.dump()


def test_seed_derivation_is_order_sensitive():
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert len({replica_seed(0, i) for i in range(1000)}) == 1000


# -- law of the log -------------------------------------------------------------


def test_recovery_counts_are_poisson():
    g = build_interval(400)
    log = EventLog(g, 1.0, 5.0, 21)
    counts = [len(r) for r in log.recoveries]
    assert abs(np.mean(counts) - 5.0) < 4 * math.sqrt(5.0 / 400)
    assert abs(np.var(counts) / np.mean(counts) - 1) < 0.25


def test_recovery_gaps_are_exponential():
    log = EventLog(build_interval(1), 1.0, 4000.0, 2)
    times = log.recoveries[0]
    gaps = np.diff([0.0] + times)
    assert stats.kstest(gaps, "expon").pvalue > 1e-3


def test_arrows_per_edge_and_marks():
    g = build_star(6)
    lam_max = 0.6
    log = EventLog(g, lam_max, 2000.0, 9)
    tr = log.transmissions
    for (u, w), lst in tr.items():
        # each directed edge carries a rate lam_max process
        assert abs(len(lst) - lam_max * 2000) < 5 * math.sqrt(lam_max * 2000)
    marks = [m for lst in tr.values() for _, m in lst]
    assert stats.kstest(marks, "uniform").pvalue > 1e-3


def test_thinned_rate():
    g = build_interval(2)
    log = EventLog(g, 1.0, 4000.0, 4)
    view = thin(log, 0.3)
    n = len(view.transmissions[(0, 1)])
    assert abs(n - 0.3 * 4000) < 5 * math.sqrt(1200)
    with pytest.raises(LambdaOutOfRange):
        thin(log, 1.5)


# -- monotone couplings ---------------------------------------------------------


def _state_at(log, lam, init, t):
    state = set(init)
    for _, kind, v, _src in sweep(log, lam, init, t):
        if kind == EV_RECOVERY:
            state.discard(v)
        else:
            state.add(v)
    return state


@given(st.integers(0, 2**32), st.floats(0, 0.5), st.floats(0, 0.5), st.floats(0.5, 8))
def test_thinning_is_monotone(seed, l1, l2, t):
    lo, hi = sorted((l1, l2))
    g = build_star(7)
    log = EventLog(g, 0.5, 10.0, seed)
    assert _state_at(log, lo, [0, 1], t) <= _state_at(log, hi, [0, 1], t)


@given(st.integers(0, 2**32), st.sets(st.integers(0, 6)), st.sets(st.integers(0, 6)), st.floats(0.5, 8))
def test_initial_set_is_monotone(seed, a, extra, t):
    g = build_star(7)
    log = EventLog(g, 0.5, 10.0, seed)
    assert _state_at(log, 0.5, a, t) <= _state_at(log, 0.5, a | extra, t)


def test_restricted_log_is_dominated():
    g = build_sv_tree(2)
    _, plus = split_at_estar(g)
    for seed in range(30):
        log = EventLog(g, 0.8, 20.0, seed)
        sub = RestrictedLog.by_labels(log, plus)
        big = _state_at(log, 0.8, [g.vertex_of(Line(1))], 15.0)
        small = _state_at(sub, 0.8, [plus.vertex_of(Line(1))], 15.0)
        assert {plus.labels[v] for v in small} <= {g.labels[v] for v in big}
