"""Contact-process trajectories: direct stochastic simulation and log replay."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from contact_lab.errors import HorizonExceeded, InitOutsideRegion, InvalidRate
from contact_lab.graphs import Graph
from contact_lab.randomness import (
    EV_RECOVERY,
    KIND_DIRECT,
    TIME_CAP,
    derive_seed,
    sweep,
)

EXTINCTION = "extinction"
HORIZON = "horizon"
ESCAPE = "escape"
EVENT_BUDGET = "event_budget"
OCCUPATION = "occupation"


@dataclass(frozen=True)
class StopRule:
    """When to end a trajectory; the first rule to trigger wins.

    Extinction always ends a run. ``escape_region`` stops as soon as a vertex
    outside it gets infected; ``occupation`` is ``(region, threshold)`` and
    stops once more than ``threshold`` vertices of ``region`` are infected.
    """

    horizon: Optional[float] = None
    escape_region: Optional[frozenset[int]] = None
    event_budget: Optional[int] = None
    occupation: Optional[tuple[frozenset[int], float]] = None

    def __post_init__(self):
        if self.horizon is not None and not 0 <= self.horizon <= TIME_CAP:
            raise ValueError(f"horizon must lie in [0, {TIME_CAP:g}]")
        if self.event_budget is not None and self.event_budget < 1:
            raise ValueError("event budget must be at least 1")


@dataclass(frozen=True)
class SimOutcome:
    stop_reason: str
    stop_time: float
    extinct: bool
    escaped: bool
    peak_infected: int
    total_events: int
    estar_crossings: int = 0


class Fenwick:
    """Binary indexed tree over non-negative integer weights."""

    __slots__ = ("n", "tree", "top")

    def __init__(self, n: int):
        self.n = n
        self.tree = [0] * (n + 1)
        self.top = 1 << max(n.bit_length() - 1, 0) if n else 0

    def add(self, i: int, delta: int) -> None:
        tree, n = self.tree, self.n
        i += 1
        while i <= n:
            tree[i] += delta
            i += i & -i

    def prefix(self, i: int) -> int:
        """Sum of weights at indices ``< i``."""
        s, tree = 0, self.tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, k: int) -> tuple[int, int]:
        """Index ``i`` with ``prefix(i) <= k < prefix(i + 1)`` and the offset ``k - prefix(i)``."""
        pos, step, tree, n = 0, self.top, self.tree, self.n
        while step:
            nxt = pos + step
            if nxt <= n and tree[nxt] <= k:
                pos = nxt
                k -= tree[nxt]
            step >>= 1
        return pos, k


class _Monitor:
    """Shared bookkeeping of stop rules and outcome statistics."""

    __slots__ = ("count", "peak", "events", "crossings", "stop", "region", "occ_region",
                 "occ_threshold", "occ_count", "budget", "edge", "trace", "escaped")

    def __init__(self, init: set[int], stop: StopRule, edge, trace):
        self.count = len(init)
        self.peak = len(init)
        self.events = 0
        self.crossings = 0
        self.stop = stop
        self.region = stop.escape_region
        self.budget = stop.event_budget
        if stop.occupation is not None:
            self.occ_region, self.occ_threshold = stop.occupation
            self.occ_count = sum(1 for v in init if v in self.occ_region)
        else:
            self.occ_region, self.occ_threshold, self.occ_count = None, 0.0, 0
        self.edge = None if edge is None else frozenset(edge)
        self.trace = trace
        self.escaped = False
        if trace is not None:
            for v in sorted(init):
                trace.append((0.0, "I", v, -1))

    def initial_reason(self) -> Optional[str]:
        if self.count == 0:
            return EXTINCTION
        if self.occ_region is not None and self.occ_count > self.occ_threshold:
            return OCCUPATION
        return None

    def recover(self, t: float, v: int) -> Optional[str]:
        self.count -= 1
        self.events += 1
        if self.occ_region is not None and v in self.occ_region:
            self.occ_count -= 1
        if self.trace is not None:
            self.trace.append((t, "R", v, -1))
        if self.count == 0:
            return EXTINCTION
        if self.budget is not None and self.events >= self.budget:
            return EVENT_BUDGET
        return None

    def infect(self, t: float, w: int, src: int) -> Optional[str]:
        self.count += 1
        self.events += 1
        if self.count > self.peak:
            self.peak = self.count
        if self.edge is not None and src >= 0 and self.edge == {w, src}:
            self.crossings += 1
        if self.trace is not None:
            self.trace.append((t, "T", w, src))
        if self.region is not None and w not in self.region:
            self.escaped = True
            return ESCAPE
        if self.occ_region is not None and w in self.occ_region:
            self.occ_count += 1
            if self.occ_count > self.occ_threshold:
                return OCCUPATION
        if self.budget is not None and self.events >= self.budget:
            return EVENT_BUDGET
        return None

    def outcome(self, reason: str, t: float) -> SimOutcome:
        return SimOutcome(
            stop_reason=reason,
            stop_time=t,
            extinct=reason == EXTINCTION,
            escaped=self.escaped,
            peak_infected=self.peak,
            total_events=self.events,
            estar_crossings=self.crossings,
        )


def run_direct(
    g: Graph,
    lam: float,
    init: Iterable[int],
    stop: StopRule = StopRule(),
    seed: int = 0,
    *,
    designated_edge: Optional[tuple[int, int]] = None,
    trace: Optional[list] = None,
) -> SimOutcome:
    """Simulate the Markov chain straight from its jump rates.

    Each infected vertex contributes rate 1 to recovery and ``lam * deg`` to
    transmission; a transmission picks a uniformly random directed edge out
    of the infected set and is a no-op if its target is already infected.
    """
    if lam < 0:
        raise InvalidRate(f"lambda must be non-negative, got {lam}")
    init_set = set(init)
    mon = _Monitor(init_set, stop, designated_edge, trace)
    reason = mon.initial_reason()
    if reason is not None:
        return mon.outcome(reason, 0.0)
    if stop.horizon == 0:
        return mon.outcome(HORIZON, 0.0)

    rng = random.Random(derive_seed(seed, KIND_DIRECT))
    expo, unif = rng.expovariate, rng.random
    adj = g.adjacency
    n = len(adj)
    infected = bytearray(n)
    members: list[int] = []
    pos = [-1] * n
    fen = Fenwick(n)
    sumdeg = 0
    for v in sorted(init_set):
        infected[v] = 1
        pos[v] = len(members)
        members.append(v)
        fen.add(v, len(adj[v]))
        sumdeg += len(adj[v])
    horizon = stop.horizon if stop.horizon is not None else TIME_CAP
    t = 0.0
    while True:
        n_inf = len(members)
        total = n_inf + lam * sumdeg
        t += expo(total)
        if t >= horizon:
            return mon.outcome(HORIZON, horizon)
        u = unif() * total
        if u < n_inf:
            v = members[int(u)]
            last = members.pop()
            if last != v:
                members[pos[v]] = last
                pos[last] = pos[v]
            pos[v] = -1
            infected[v] = 0
            fen.add(v, -len(adj[v]))
            sumdeg -= len(adj[v])
            reason = mon.recover(t, v)
        else:
            k = int((u - n_inf) / lam)
            if k >= sumdeg:
                k = sumdeg - 1
            v, r = fen.find(k)
            w = adj[v][r]
            if infected[w]:
                continue
            infected[w] = 1
            pos[w] = len(members)
            members.append(w)
            fen.add(w, len(adj[w]))
            sumdeg += len(adj[w])
            reason = mon.infect(t, w, v)
        if reason is not None:
            return mon.outcome(reason, t)


def run_from_log(
    g: Graph,
    log,
    lam: float,
    init: Iterable[int],
    stop: StopRule = StopRule(),
    *,
    auto_extend: bool = False,
    designated_edge: Optional[tuple[int, int]] = None,
    trace: Optional[list] = None,
) -> SimOutcome:
    """Deterministic trajectory read off the graphical construction in ``log``."""
    if log.graph is not g and log.graph != g:
        raise ValueError("event log was sampled on a different graph")
    if lam < 0:
        raise InvalidRate(f"lambda must be non-negative, got {lam}")
    init_set = set(init)
    mon = _Monitor(init_set, stop, designated_edge, trace)
    reason = mon.initial_reason()
    if reason is not None:
        return mon.outcome(reason, 0.0)
    if stop.horizon == 0:
        return mon.outcome(HORIZON, 0.0)

    wanted = stop.horizon if stop.horizon is not None else math.inf
    if wanted > log.horizon and not auto_extend:
        t_end = log.horizon
    elif wanted > log.horizon and not log.extendable:
        raise HorizonExceeded("log cannot be extended past its horizon")
    else:
        t_end = min(wanted, TIME_CAP)
    for t, kind, v, src in sweep(log, lam, init_set, t_end):
        if kind == EV_RECOVERY:
            reason = mon.recover(t, v)
        else:
            reason = mon.infect(t, v, src)
        if reason is not None:
            return mon.outcome(reason, t)
    if t_end == wanted:
        return mon.outcome(HORIZON, t_end)
    raise HorizonExceeded(f"run still active at the log horizon {log.horizon}")


def replay_events(log, lam: float, init: Iterable[int], t_end: float) -> list[tuple[float, int, int]]:
    """State changes ``(time, kind, vertex)`` of a replay, for coupling checks."""
    return [(t, kind, v) for t, kind, v, _ in sweep(log, lam, init, t_end)]


@dataclass(frozen=True)
class ConfinementResult:
    confined: bool
    extinct_within_region: bool


def confinement_trial(
    g: Graph,
    region: Iterable[int],
    lam: float,
    init: Iterable[int],
    seed: int,
    horizon: Optional[float] = None,
) -> ConfinementResult:
    """Run until extinction or the first infection outside ``region``.

    Without a horizon both flags coincide: the infection died out before
    ever leaving the region. With one, ``confined`` also counts runs still
    inside the region at the horizon.
    """
    region = frozenset(region)
    init = set(init)
    if not init <= region:
        raise InitOutsideRegion("initial infection must lie inside the region")
    out = run_direct(g, lam, init, StopRule(horizon=horizon, escape_region=region), seed)
    return ConfinementResult(confined=not out.escaped, extinct_within_region=out.extinct)
