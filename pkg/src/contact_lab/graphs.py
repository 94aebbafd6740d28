"""Finite graphs used by the simulator: paths, stars and the hub-and-leaves tree.

Vertices are dense integers ``0..n-1``; each carries a label tying it back to
its coordinate, either a position ``z`` on the integer line or the ``j``-th
leaf attached to hub number ``i``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from contact_lab.errors import BudgetExceeded, NoSuchEdge, Unreachable


@dataclass(frozen=True, order=True)
class Line:
    z: int


@dataclass(frozen=True, order=True)
class Leaf:
    i: int
    j: int


VertexLabel = Union[Line, Leaf]


class Graph:
    """Immutable undirected simple graph with sorted adjacency lists."""

    __slots__ = ("adjacency", "labels", "edge_count", "_index")

    def __init__(self, labels: Sequence[VertexLabel], adjacency: Sequence[Sequence[int]]):
        if len(labels) != len(adjacency):
            raise ValueError("labels and adjacency differ in length")
        n = len(labels)
        adj = tuple(tuple(sorted(nb)) for nb in adjacency)
        total = 0
        for v, nb in enumerate(adj):
            for k, w in enumerate(nb):
                if w == v:
                    raise ValueError(f"self-loop at vertex {v}")
                if not 0 <= w < n:
                    raise ValueError(f"neighbor {w} of {v} out of range")
                if k and nb[k - 1] == w:
                    raise ValueError(f"duplicate edge {v}-{w}")
            total += len(nb)
        for v, nb in enumerate(adj):
            for w in nb:
                if not _sorted_contains(adj[w], v):
                    raise ValueError(f"adjacency not symmetric at {v}-{w}")
        if len(set(labels)) != n:
            raise ValueError("vertex labels are not distinct")
        self.adjacency = adj
        self.labels = tuple(labels)
        self.edge_count = total // 2
        self._index = None

    @classmethod
    def from_edges(cls, labels: Sequence[VertexLabel], edges: Iterable[tuple[int, int]]) -> "Graph":
        adj: list[list[int]] = [[] for _ in labels]
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
        return cls(labels, adj)

    @property
    def vertex_count(self) -> int:
        return len(self.adjacency)

    def __len__(self) -> int:
        return len(self.adjacency)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def max_degree(self) -> int:
        return max((len(nb) for nb in self.adjacency), default=0)

    def has_edge(self, u: int, v: int) -> bool:
        return 0 <= u < len(self) and _sorted_contains(self.adjacency[u], v)

    def edges(self) -> list[tuple[int, int]]:
        """Edges as ``(u, v)`` with ``u < v``, sorted."""
        return [(u, v) for u, nb in enumerate(self.adjacency) for v in nb if u < v]

    def vertex_of(self, label: VertexLabel) -> int:
        if self._index is None:
            self._index = {lab: v for v, lab in enumerate(self.labels)}
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"no vertex labelled {label}") from None

    def __contains__(self, label: object) -> bool:
        try:
            self.vertex_of(label)  # type: ignore[arg-type]
        except KeyError:
            return False
        return True

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.labels == other.labels and self.adjacency == other.adjacency

    def __hash__(self) -> int:
        return hash((self.labels, self.adjacency))

    def __repr__(self) -> str:
        return f"Graph(vertices={self.vertex_count}, edges={self.edge_count})"


def _sorted_contains(seq: Sequence[int], x: int) -> bool:
    lo, hi = 0, len(seq)
    while lo < hi:
        mid = (lo + hi) // 2
        if seq[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < len(seq) and seq[lo] == x


@dataclass(frozen=True)
class BuildBudget:
    max_vertices: int = 1_000_000

    def __post_init__(self):
        if self.max_vertices < 2:
            raise ValueError("max_vertices must be at least 2")


@dataclass(frozen=True)
class SequenceTable:
    """Hub positions ``o[i]`` and leaf counts ``d[i]``, keyed from 1."""

    o: dict[int, int] = field(default_factory=dict)
    d: dict[int, int] = field(default_factory=dict)

    @property
    def i_max(self) -> int:
        return max(self.d)


def compute_sequences(i_max: int) -> SequenceTable:
    """Exact hub positions o_1..o_{i_max+1} and leaf counts d_1..d_{i_max}.

    Hubs alternate sides of the origin; each new hub is placed so far out that
    its predecessor's star must hold the infection for a long time to reach it,
    and d_i is then set to i times that gap.
    """
    if i_max < 2:
        raise ValueError("i_max must be at least 2")
    o = {1: -1, 2: 2}
    d = {1: 1}
    for i in range(2, i_max + 1):
        if i % 2:
            o[i + 1] = o[i - 1] + i * sum(d[2 * j] for j in range(1, (i - 1) // 2 + 1))
        else:
            o[i + 1] = o[i - 1] - i * sum(d[2 * j + 1] for j in range((i - 2) // 2 + 1))
        d[i] = i * abs(o[i] - o[i + 1])
    return SequenceTable(o=o, d=d)


def build_interval(n: int, pad: int = 0) -> Graph:
    """Path on line positions ``1 - pad .. n + pad``."""
    if n < 1 or pad < 0:
        raise ValueError("need n >= 1 and pad >= 0")
    labels = [Line(z) for z in range(1 - pad, n + pad + 1)]
    return Graph.from_edges(labels, ((k, k + 1) for k in range(len(labels) - 1)))


def build_star(n: int) -> Graph:
    """Star on ``n`` vertices; the hub is vertex 0 (labelled ``Line(0)``)."""
    if n < 2:
        raise ValueError("a star needs at least 2 vertices")
    labels = [Line(0)] + [Leaf(1, j) for j in range(1, n)]
    return Graph.from_edges(labels, ((0, k) for k in range(1, n)))


def sv_tree_size(i_max: int) -> int:
    table = compute_sequences(i_max)
    return table.o[i_max] - table.o[i_max - 1] + 1 + sum(table.d.values())


def build_sv_tree(i_max: int, budget: BuildBudget = BuildBudget()) -> Graph:
    """Truncation of the hub-and-leaves tree to hubs 1..i_max.

    The line segment runs from the leftmost built hub ``o[i_max-1]`` to the
    rightmost ``o[i_max]``; hub ``i`` gets ``d[i]`` leaves. Vertex order is
    line left to right, then leaves grouped by hub.
    """
    if i_max < 2 or i_max % 2:
        raise ValueError("i_max must be an even integer >= 2")
    table = compute_sequences(i_max)
    lo, hi = table.o[i_max - 1], table.o[i_max]
    required = hi - lo + 1 + sum(table.d.values())
    if required > budget.max_vertices:
        raise BudgetExceeded(required, budget.max_vertices)
    labels: list[VertexLabel] = [Line(z) for z in range(lo, hi + 1)]
    edges = [(k, k + 1) for k in range(hi - lo)]
    for i in range(1, i_max + 1):
        hub = table.o[i] - lo
        for j in range(1, table.d[i] + 1):
            edges.append((hub, len(labels)))
            labels.append(Leaf(i, j))
    return Graph.from_edges(labels, edges)


def estar(g: Graph) -> tuple[int, int]:
    """Vertex ids of the privileged edge between line positions 0 and 1."""
    if Line(0) not in g or Line(1) not in g:
        raise NoSuchEdge("graph lacks line position 0 or 1")
    u, v = g.vertex_of(Line(0)), g.vertex_of(Line(1))
    if not g.has_edge(u, v):
        raise NoSuchEdge("graph has no edge between Line(0) and Line(1)")
    return u, v


def induced_subgraph(g: Graph, vertices: Iterable[int]) -> tuple[Graph, list[int]]:
    """Subgraph on ``vertices`` (kept in ascending id order) and the new-to-old id map."""
    keep = sorted(set(vertices))
    new_id = {v: k for k, v in enumerate(keep)}
    adj = [[new_id[w] for w in g.adjacency[v] if w in new_id] for v in keep]
    return Graph([g.labels[v] for v in keep], adj), keep


def component(g: Graph, v: int, blocked: tuple[int, int] | None = None) -> list[int]:
    seen = {v}
    queue = deque([v])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if blocked and {x, y} == set(blocked):
                continue
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return sorted(seen)


def remove_edge(g: Graph, u: int, v: int) -> Union[tuple[Graph, Graph], Graph]:
    """Delete edge {u, v}.

    Returns the two components (the one holding ``u`` first) if that
    disconnects ``g``, otherwise the single modified graph.
    """
    if not g.has_edge(u, v):
        raise NoSuchEdge(f"no edge {u}-{v}")
    side_u = component(g, u, blocked=(u, v))
    if v in set(side_u):
        adj = [list(nb) for nb in g.adjacency]
        adj[u].remove(v)
        adj[v].remove(u)
        return Graph(g.labels, adj)
    side_v = component(g, v, blocked=(u, v))
    if len(side_u) + len(side_v) != len(g):
        # g itself was disconnected; keep every vertex on one side or the other
        rest = set(range(len(g))) - set(side_u) - set(side_v)
        side_v = sorted(set(side_v) | rest)
    return induced_subgraph(g, side_u)[0], induced_subgraph(g, side_v)[0]


def split_at_estar(g: Graph) -> tuple[Graph, Graph]:
    """The halves (G-, G+) of a truncated tree after removing the privileged edge."""
    parts = remove_edge(g, *estar(g))
    if isinstance(parts, Graph):
        raise ValueError("removing the privileged edge did not disconnect the graph")
    return parts


def distance(g: Graph, u: int, v: int) -> int:
    if u == v:
        return 0
    dist = {u: 0}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for y in g.adjacency[x]:
            if y not in dist:
                if y == v:
                    return dist[x] + 1
                dist[y] = dist[x] + 1
                queue.append(y)
    raise Unreachable(f"{v} is not reachable from {u}")


def ball(g: Graph, x: int, r: int) -> set[int]:
    seen = {x}
    frontier = [x]
    for _ in range(r):
        nxt = []
        for y in frontier:
            for z in g.adjacency[y]:
                if z not in seen:
                    seen.add(z)
                    nxt.append(z)
        frontier = nxt
    return seen


def is_tree(g: Graph) -> bool:
    return len(g) > 0 and g.edge_count == len(g) - 1 and len(component(g, 0)) == len(g)


def region_of_lines(g: Graph, zs: Iterable[int]) -> frozenset[int]:
    return frozenset(g.vertex_of(Line(z)) for z in zs)


# -- plain-text edge list ---------------------------------------------------


def format_edgelist(g: Graph) -> str:
    lines = [f"# vertices={len(g)}"]
    for v, lab in enumerate(g.labels):
        if isinstance(lab, Line):
            lines.append(f"L {v} line {lab.z}")
        else:
            lines.append(f"L {v} leaf {lab.i} {lab.j}")
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def parse_edgelist(text: str) -> Graph:
    rows = text.splitlines()
    if not rows or not rows[0].startswith("# vertices="):
        raise ValueError("missing '# vertices=N' header")
    n = int(rows[0].split("=", 1)[1])
    labels: list[VertexLabel | None] = [None] * n
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        parts = row.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "L":
            v = int(parts[1])
            if parts[2] == "line" and len(parts) == 4:
                labels[v] = Line(int(parts[3]))
            elif parts[2] == "leaf" and len(parts) == 5:
                labels[v] = Leaf(int(parts[3]), int(parts[4]))
            else:
                raise ValueError(f"line {lineno}: bad label record {row!r}")
        elif len(parts) == 2:
            edges.append((int(parts[0]), int(parts[1])))
        else:
            raise ValueError(f"line {lineno}: cannot parse {row!r}")
    missing = [v for v, lab in enumerate(labels) if lab is None]
    if missing:
        raise ValueError(f"vertices without labels: {missing[:5]}")
    return Graph.from_edges(labels, edges)  # type: ignore[arg-type]


def star_hypothesis_degree(lam: float) -> float:
    """Hub degree above which a star is in the long-survival regime, 64 e^2 / lambda^2."""
    return 64 * math.e**2 / lam**2
