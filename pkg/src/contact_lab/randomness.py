"""Graphical construction: marked Poisson event logs and infection-path sweeps.

Every random quantity is a pure function of ``(seed, kind, object, block)``
through a SplitMix64 counter hash, so a log never depends on the order in
which it is read. Each vertex owns two streams:

* recoveries at rate 1;
* outgoing transmission arrows at rate ``lambda_max * deg(v)``, each carrying
  a uniformly chosen target neighbor and a uniform mark in [0, 1).

Splitting the outgoing stream by target gives independent rate
``lambda_max`` processes per directed edge. Streams are generated in
fixed time blocks whose length depends only on the stream's rate, which makes
skipping ahead O(1) and extension of the horizon trivially consistent.

A rate ``lam <= lambda_max`` view keeps the arrows with ``mark < lam /
lambda_max``; sharing one log across rates, initial sets, or subgraphs gives
the monotone couplings exactly.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from contact_lab.errors import HorizonExceeded, LambdaOutOfRange
from contact_lab.graphs import Graph

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53

KIND_RECOVERY = 1
KIND_TRANSMISSION = 2
KIND_REPLICA = 3
KIND_DIRECT = 4

TIME_CAP = 1e12


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integers into one 64-bit key. Order-sensitive, platform-independent."""
    h = 0x6A09E667F3BCC909
    for p in parts:
        h = mix64((h ^ (p & MASK64)) + GOLDEN & MASK64)
    return h


def replica_seed(base_seed: int, index: int) -> int:
    return derive_seed(base_seed, KIND_REPLICA, index)


def _object_key(base: int, v: int, b: int) -> int:
    """mix64(mix64(base ^ v) + b * GOLDEN), inlined: one call per block."""
    z = base ^ v
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    z = ((z ^ (z >> 31)) + b * GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _block_length(rate: float) -> float:
    # power of two >= 1/rate: one expected event per block, exact float grid
    return 2.0 ** math.ceil(math.log2(1.0 / rate))


class _LogBase:
    graph: Graph
    lambda_max: float
    horizon: float

    def recovery_stream(self, v: int, t: float) -> Iterator[float]:
        raise NotImplementedError

    def transmission_stream(self, v: int, t: float) -> Iterator[tuple[float, int, float]]:
        raise NotImplementedError

    @property
    def extendable(self) -> bool:
        return False

    # materialized views, restricted to (0, horizon)

    @property
    def recoveries(self) -> list[list[float]]:
        out = []
        for v in range(self.graph.vertex_count):
            times = []
            for t in self.recovery_stream(v, 0.0):
                if t >= self.horizon:
                    break
                times.append(t)
            out.append(times)
        return out

    @property
    def transmissions(self) -> dict[tuple[int, int], list[tuple[float, float]]]:
        """Per directed edge ``(u, w)``: sorted ``(time, mark)`` pairs."""
        out: dict[tuple[int, int], list[tuple[float, float]]] = {}
        for u, nb in enumerate(self.graph.adjacency):
            for w in nb:
                out[(u, w)] = []
            for t, w, mark in self.transmission_stream(u, 0.0):
                if t >= self.horizon:
                    break
                out[(u, w)].append((t, mark))
        return out

    def events(self) -> list[tuple]:
        """All events as ``('R', v, t)`` / ``('T', u, w, t, mark)``, in replay order."""
        evs: list[tuple] = []
        for v, times in enumerate(self.recoveries):
            evs.extend((t, 0, v, ("R", v, t)) for t in times)
        for (u, w), arrows in self.transmissions.items():
            evs.extend((t, 1, u, ("T", u, w, t, m)) for t, m in arrows)
        evs.sort(key=lambda e: e[:3])
        return [e[3] for e in evs]

    def dump(self) -> str:
        """Plain-text event dump; floats carry 17 significant digits."""
        head = f"# horizon={self.horizon!r} lambda_max={self.lambda_max!r} vertices={self.graph.vertex_count}"
        rows = [head]
        for ev in self.events():
            if ev[0] == "R":
                rows.append(f"R {ev[1]} {ev[2]:.17g}")
            else:
                rows.append(f"T {ev[1]} {ev[2]} {ev[3]:.17g} {ev[4]:.17g}")
        return "\n".join(rows) + "\n"


class EventLog(_LogBase):
    """Seeded, lazily generated realization of all Poisson processes on a graph.

    Equality of ``(graph, lambda_max, horizon, seed)`` implies equality of
    every event; reading order, caching and extension never change values.
    """

    def __init__(self, graph: Graph, lambda_max: float, horizon: float, seed: int):
        if not lambda_max > 0:
            raise ValueError("lambda_max must be positive")
        if not 0 < horizon <= TIME_CAP:
            raise ValueError(f"horizon must lie in (0, {TIME_CAP:g}]")
        self.graph = graph
        self.lambda_max = float(lambda_max)
        self.horizon = float(horizon)
        self.seed = int(seed) & MASK64
        self._rec_key = derive_seed(self.seed, KIND_RECOVERY)
        self._tr_key = derive_seed(self.seed, KIND_TRANSMISSION)
        self._lengths: dict[int, float] = {}

    @property
    def extendable(self) -> bool:
        return True

    def extend(self, new_horizon: float) -> "EventLog":
        if not new_horizon > self.horizon:
            raise ValueError("new horizon must exceed the current one")
        return EventLog(self.graph, self.lambda_max, new_horizon, self.seed)

    def _recovery_block(self, v: int, b: int) -> list[float]:
        start = b * 1.0
        end = start + 1.0
        s = _object_key(self._rec_key, v, b)
        out = []
        t = start
        log = math.log
        while True:
            s = (s + GOLDEN) & MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            t -= log(1.0 - ((z ^ (z >> 31)) >> 11) * _TO_UNIT)
            if t >= end:
                return out
            out.append(t)

    def _transmission_block(self, v: int, b: int, rate: float, length: float) -> list[tuple[float, int, float]]:
        nb = self.graph.adjacency[v]
        deg = len(nb)
        start = b * length
        end = start + length
        s = _object_key(self._tr_key, v, b)
        out = []
        t = start
        log = math.log
        while True:
            s = (s + GOLDEN) & MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            t -= log(1.0 - ((z ^ (z >> 31)) >> 11) * _TO_UNIT) / rate
            if t >= end:
                return out
            s = (s + GOLDEN) & MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            target = nb[(((z ^ (z >> 31)) >> 11) * deg) >> 53]
            s = (s + GOLDEN) & MASK64
            z = s
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
            out.append((t, target, ((z ^ (z >> 31)) >> 11) * _TO_UNIT))

    def recovery_stream(self, v: int, t: float) -> Iterator[float]:
        b = int(t)
        while True:
            for r in self._recovery_block(v, b):
                if r > t:
                    yield r
            b += 1

    def transmission_stream(self, v: int, t: float) -> Iterator[tuple[float, int, float]]:
        deg = self.graph.degree(v)
        if deg == 0:
            return
        rate = self.lambda_max * deg
        length = self._lengths.get(deg)
        if length is None:
            length = self._lengths[deg] = _block_length(rate)
        b = int(t / length)
        while True:
            for ev in self._transmission_block(v, b, rate, length):
                if ev[0] > t:
                    yield ev
            b += 1

    def __repr__(self) -> str:
        return (f"EventLog(vertices={self.graph.vertex_count}, lambda_max={self.lambda_max}, "
                f"horizon={self.horizon}, seed={self.seed})")


class ExplicitEventLog(_LogBase):
    """Event log given as explicit lists, e.g. hand-written or parsed from a dump."""

    def __init__(
        self,
        graph: Graph,
        lambda_max: float,
        horizon: float,
        recoveries: dict[int, Sequence[float]] | None = None,
        transmissions: dict[tuple[int, int], Sequence[tuple[float, float]]] | None = None,
    ):
        self.graph = graph
        self.lambda_max = float(lambda_max)
        self.horizon = float(horizon)
        self._rec = [sorted((recoveries or {}).get(v, ())) for v in range(graph.vertex_count)]
        out: list[list[tuple[float, int, float]]] = [[] for _ in range(graph.vertex_count)]
        for (u, w), arrows in (transmissions or {}).items():
            if not graph.has_edge(u, w):
                raise ValueError(f"transmission on non-edge {u}->{w}")
            for t, mark in arrows:
                if not 0.0 <= mark < 1.0:
                    raise ValueError("marks must lie in [0, 1)")
                out[u].append((t, w, mark))
        for lst in out:
            lst.sort()
        self._tr = out
        for times in self._rec:
            if any(not 0 < x < self.horizon for x in times):
                raise ValueError("event times must lie strictly inside (0, horizon)")
        for lst in self._tr:
            if any(not 0 < x[0] < self.horizon for x in lst):
                raise ValueError("event times must lie strictly inside (0, horizon)")

    def recovery_stream(self, v: int, t: float) -> Iterator[float]:
        times = self._rec[v]
        return iter(times[bisect_right(times, t):])

    def transmission_stream(self, v: int, t: float) -> Iterator[tuple[float, int, float]]:
        lst = self._tr[v]
        k = bisect_right(lst, (t, math.inf, math.inf))
        return iter(lst[k:])


class RestrictedLog(_LogBase):
    """A parent log seen from an induced subgraph.

    Arrows leaving the subgraph are dropped; everything else is the parent's
    randomness, so runs on the subgraph are coupled below runs on the parent.
    """

    def __init__(self, parent: _LogBase, subgraph: Graph, sub_to_parent: Sequence[int]):
        self.parent = parent
        self.graph = subgraph
        self.lambda_max = parent.lambda_max
        self.horizon = parent.horizon
        self.sub_to_parent = list(sub_to_parent)
        self._parent_to_sub = {p: s for s, p in enumerate(self.sub_to_parent)}

    @classmethod
    def by_labels(cls, parent: _LogBase, subgraph: Graph) -> "RestrictedLog":
        return cls(parent, subgraph, [parent.graph.vertex_of(lab) for lab in subgraph.labels])

    @property
    def extendable(self) -> bool:
        return self.parent.extendable

    def extend(self, new_horizon: float) -> "RestrictedLog":
        return RestrictedLog(self.parent.extend(new_horizon), self.graph, self.sub_to_parent)  # type: ignore[attr-defined]

    def recovery_stream(self, v: int, t: float) -> Iterator[float]:
        return self.parent.recovery_stream(self.sub_to_parent[v], t)

    def transmission_stream(self, v: int, t: float) -> Iterator[tuple[float, int, float]]:
        inv = self._parent_to_sub
        for time, w, mark in self.parent.transmission_stream(self.sub_to_parent[v], t):
            sw = inv.get(w)
            if sw is not None:
                yield time, sw, mark


def sample_event_log(g: Graph, lambda_max: float, horizon: float, seed: int) -> EventLog:
    return EventLog(g, lambda_max, horizon, seed)


def extend_event_log(log: _LogBase, new_horizon: float) -> _LogBase:
    if not log.extendable:
        raise HorizonExceeded("this event log cannot be extended")
    return log.extend(new_horizon)  # type: ignore[attr-defined]


@dataclass(frozen=True)
class ThinnedView:
    """The rate-``lam`` process inside a log sampled at ``lambda_max``."""

    log: _LogBase
    lam: float

    @property
    def threshold(self) -> float:
        return self.lam / self.log.lambda_max

    def visible(self, mark: float) -> bool:
        return mark < self.threshold

    @property
    def recoveries(self) -> list[list[float]]:
        return self.log.recoveries

    @property
    def transmissions(self) -> dict[tuple[int, int], list[tuple[float, float]]]:
        thr = self.threshold
        return {e: [a for a in arrows if a[1] < thr] for e, arrows in self.log.transmissions.items()}


def thin(log: _LogBase, lam: float) -> ThinnedView:
    if not 0 <= lam <= log.lambda_max:
        raise LambdaOutOfRange(f"lambda={lam} outside [0, {log.lambda_max}]")
    return ThinnedView(log, lam)


def parse_event_dump(text: str, graph: Graph) -> ExplicitEventLog:
    horizon = lambda_max = None
    recs: dict[int, list[float]] = {}
    trs: dict[tuple[int, int], list[tuple[float, float]]] = {}
    for row in text.splitlines():
        parts = row.split()
        if not parts:
            continue
        if parts[0] == "#":
            for item in parts[1:]:
                key, _, val = item.partition("=")
                if key == "horizon":
                    horizon = float(val)
                elif key == "lambda_max":
                    lambda_max = float(val)
        elif parts[0] == "R":
            recs.setdefault(int(parts[1]), []).append(float(parts[2]))
        elif parts[0] == "T":
            trs.setdefault((int(parts[1]), int(parts[2])), []).append((float(parts[3]), float(parts[4])))
        else:
            raise ValueError(f"cannot parse event line {row!r}")
    if horizon is None or lambda_max is None:
        raise ValueError("dump header must give horizon and lambda_max")
    return ExplicitEventLog(graph, lambda_max, horizon, recs, trs)


# -- sweep ----------------------------------------------------------------

EV_RECOVERY = 0
EV_INFECTION = 1
EV_INJECTION = 2
_EV_UNPIN = 3


def sweep(
    log: _LogBase,
    lam: float,
    initial: Iterable[int],
    t_end: float,
    *,
    injections: Iterable[tuple[int, float]] = (),
    pins: Iterable[tuple[int, float, float]] = (),
) -> Iterator[tuple[float, int, int, int]]:
    """Replay the infected set forward in time from ``initial`` at time 0.

    Yields only state changes, in time order, as ``(time, kind, vertex,
    source)``: a recovery of an infected vertex, an infection of a healthy
    vertex along a visible arrow from ``source``, or an external injection.
    Events at or after ``t_end`` are not processed. ``pins`` hold a vertex
    infected over ``[t0, t1)`` by ignoring its recoveries there, which
    realizes a source that can emit a path at any time in that window.
    """
    if not 0 <= lam <= log.lambda_max:
        raise LambdaOutOfRange(f"lambda={lam} outside [0, {log.lambda_max}]")
    thr = lam / log.lambda_max
    n = log.graph.vertex_count
    infected = bytearray(n)
    pinned = [0] * n
    epoch = [0] * n
    rec_it: list = [None] * n
    tr_it: list = [None] * n
    heap: list[tuple[float, int, int, int, int]] = []
    push, pop = heapq.heappush, heapq.heappop
    rec_stream, tr_stream = log.recovery_stream, log.transmission_stream
    spread = thr > 0.0
    all_visible = thr >= 1.0

    def activate(v: int, t: float) -> None:
        infected[v] = 1
        e = epoch[v]
        it = rec_stream(v, t)
        rec_it[v] = it
        r = next(it, None)
        if r is not None:
            push(heap, (r, EV_RECOVERY, v, e, -1))
        if spread:
            it2 = tr_stream(v, t)
            tr_it[v] = it2
            for tt, w, m in it2:
                if tt >= t_end:
                    break
                if all_visible or m < thr:
                    push(heap, (tt, EV_INFECTION, v, e, w))
                    break

    for v in set(initial):
        activate(v, 0.0)
    for v, s in injections:
        push(heap, (s, EV_INJECTION, v, 0, -1))
    for v, s0, s1 in pins:
        if s1 > s0:
            push(heap, (s0, EV_INJECTION, v, 1, -1))
            push(heap, (s1, _EV_UNPIN, v, 0, -1))

    while heap:
        item = heap[0]
        t = item[0]
        if t >= t_end:
            return
        pop(heap)
        kind, v, e = item[1], item[2], item[3]
        if kind == EV_RECOVERY:
            if epoch[v] != e:
                continue
            if pinned[v]:
                r = next(rec_it[v], None)
                if r is not None:
                    push(heap, (r, EV_RECOVERY, v, e, -1))
                continue
            infected[v] = 0
            epoch[v] = e + 1
            yield (t, EV_RECOVERY, v, -1)
        elif kind == EV_INFECTION:
            if epoch[v] != e:
                continue
            for tt, w, m in tr_it[v]:
                if tt >= t_end:
                    break
                if all_visible or m < thr:
                    push(heap, (tt, EV_INFECTION, v, e, w))
                    break
            w = item[4]
            if not infected[w]:
                activate(w, t)
                yield (t, EV_INFECTION, w, v)
        elif kind == EV_INJECTION:
            if e:
                pinned[v] += 1
            if not infected[v]:
                activate(v, t)
                yield (t, EV_INJECTION, v, -1)
        else:
            pinned[v] -= 1


def reachable(
    log: _LogBase,
    lam: float,
    sources: Iterable[tuple[int, float | tuple[float, float]]],
    targets: Iterable[int],
    window: tuple[float, float],
) -> bool:
    """Whether an infection path joins some source point to some target in ``window``.

    A source is ``(vertex, time)`` or ``(vertex, (t0, t1))``; the latter
    stands for every point of ``{vertex} x [t0, t1]``. ``window`` may end at
    ``math.inf`` when the log can be extended; on a finite graph the sweep
    then ends at extinction. A point source that already lies in the target
    set inside the window counts as connected by the constant path.
    """
    a, b = window
    tset = set(targets)
    initial, injections, pins = [], [], []
    for v, s in sources:
        if isinstance(s, tuple) and s[0] == s[1]:
            s = s[0]
        if isinstance(s, tuple):
            s0, s1 = s
            if v in tset and s0 <= b and s1 >= a:
                return True
            if s0 == 0.0:
                initial.append(v)
            pins.append((v, s0, s1))
        else:
            if v in tset and a <= s <= b:
                return True
            if s == 0.0:
                initial.append(v)
            else:
                injections.append((v, s))
    if b > log.horizon and not log.extendable:
        raise HorizonExceeded(f"window end {b} beyond log horizon {log.horizon}")
    hit = {v for v in initial if v in tset}
    checked = False
    # the window is closed, so events at b itself still count
    for t, kind, v, _src in sweep(log, lam, initial, math.nextafter(b, math.inf), injections=injections, pins=pins):
        if not checked and t > a:
            checked = True
            if hit:
                return True
        if kind == EV_RECOVERY:
            hit.discard(v)
        elif v in tset:
            if t >= a:
                return True
            hit.add(v)
    return bool(hit) and not checked
