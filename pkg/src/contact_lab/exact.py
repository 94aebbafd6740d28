"""Exact analytics for small systems.

The full chain lives on subsets of V encoded as bitmasks (bit v set iff v is
infected); state 0 is the absorbing all-healthy configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.stats import poisson

from contact_lab.errors import InvalidRate, StateSpaceTooLarge
from contact_lab.graphs import Graph

DEFAULT_CAP = 12
TAIL_EPS = 1e-12


def rw_escape_probability(lam: float) -> float:
    """Probability that a walk stepping +1 at rate ``lam`` and -1 at rate 1 ever
    rises above its start.

    Gambler's ruin for the embedded chain: with up-probability p = lam/(1+lam)
    and down-probability q = 1/(1+lam), the chance of ever climbing one level
    is p/q.
    """
    if not 0 <= lam < 1:
        raise InvalidRate(f"need 0 <= lambda < 1, got {lam}")
    p = lam / (1 + lam)
    q = 1 / (1 + lam)
    return p / q


@dataclass(frozen=True)
class SurvivalCurve:
    times: tuple[float, ...]
    probabilities: tuple[float, ...]


def _mask(vertices: Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise StateSpaceTooLarge(2**n, cap)


def generator_matrix(g: Graph, lam: float, cap: int = DEFAULT_CAP) -> sp.csr_matrix:
    """Sparse generator Q of the full chain, rows indexed by the departure state."""
    n = len(g)
    _check_cap(n, cap)
    rows, cols, vals = [], [], []
    adj = g.adjacency
    for s in range(1, 1 << n):
        out = 0.0
        for v in range(n):
            if s >> v & 1:
                rows.append(s)
                cols.append(s & ~(1 << v))
                vals.append(1.0)
                out += 1.0
                if lam > 0:
                    for w in adj[v]:
                        if not s >> w & 1:
                            rows.append(s)
                            cols.append(s | 1 << w)
                            vals.append(lam)
                            out += lam
        rows.append(s)
        cols.append(s)
        vals.append(-out)
    size = 1 << n
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def ctmc_survival(
    g: Graph,
    lam: float,
    init: Iterable[int],
    times: Sequence[float],
    cap: int = DEFAULT_CAP,
) -> SurvivalCurve:
    """P(infection alive at t) for each t, by uniformization.

    Uses the rate bound |V| + lam * sum(deg) for the uniformization constant
    and truncates the Poisson sum once its tail drops below 1e-12.
    """
    if lam < 0:
        raise InvalidRate("lambda must be non-negative")
    n = len(g)
    _check_cap(n, cap)
    times = tuple(float(t) for t in times)
    if any(t < 0 for t in times):
        raise ValueError("times must be non-negative")
    start = _mask(init)
    if start == 0 or not times:
        return SurvivalCurve(times, tuple(0.0 if start == 0 else 1.0 for _ in times))
    rate = n + lam * sum(g.degree(v) for v in range(n))
    Q = generator_matrix(g, lam, cap)
    P = (sp.identity(Q.shape[0], format="csr") + Q / rate).T.tocsr()
    mus = [rate * t for t in times]
    k_max = [int(poisson.isf(TAIL_EPS, mu)) + 1 if mu > 0 else 0 for mu in mus]
    weights = [poisson.pmf(np.arange(k + 1), mu) if mu > 0 else np.array([1.0]) for k, mu in zip(k_max, mus)]
    acc = [0.0] * len(times)
    p = np.zeros(Q.shape[0])
    p[start] = 1.0
    for k in range(max(k_max) + 1):
        alive = 1.0 - p[0]
        for idx, kk in enumerate(k_max):
            if k <= kk:
                acc[idx] += weights[idx][k] * alive
        p = P @ p
    probs = tuple(min(max(a, 0.0), 1.0) for a in acc)
    return SurvivalCurve(times, probs)


def _absorption_probability(Q: sp.csr_matrix, start: int, success: np.ndarray, failure: np.ndarray) -> float:
    """Probability of hitting ``success`` states before ``failure`` states."""
    size = Q.shape[0]
    absorbing = success | failure
    transient = np.flatnonzero(~absorbing)
    if success[start]:
        return 1.0
    if failure[start]:
        return 0.0
    index = -np.ones(size, dtype=int)
    index[transient] = np.arange(len(transient))
    Qtt = Q[transient][:, transient]
    rhs = -np.asarray(Q[transient][:, np.flatnonzero(success)].sum(axis=1)).ravel()
    h = spla.spsolve(Qtt.tocsc(), rhs)
    return float(np.atleast_1d(h)[index[start]])


def ctmc_hit_probability(
    g: Graph,
    lam: float,
    source: int,
    target: int,
    window: float = 0.0,
    cap: int = DEFAULT_CAP,
) -> float:
    """P(target ever infected) starting from {source} at time 0.

    This is the event for a path leaving the source at time 0, so it is a
    lower bound for paths allowed to leave at any time in ``[0, window]``;
    ``window`` does not enter the computation.
    """
    if source == target:
        return 1.0
    if lam == 0:
        return 0.0
    n = len(g)
    _check_cap(n, cap)
    Q = generator_matrix(g, lam, cap)
    states = np.arange(1 << n)
    success = (states >> target & 1).astype(bool)
    failure = states == 0
    return _absorption_probability(Q, 1 << source, success, failure)


def ctmc_confinement_probability(
    g: Graph,
    region: Iterable[int],
    lam: float,
    init: Iterable[int],
    cap: int = DEFAULT_CAP,
) -> float:
    """P(extinction before any vertex outside ``region`` is infected).

    Only the region's vertices are tracked; an arrow into the complement is
    absorption in the escape state, so the size cap applies to the region.
    """
    region = sorted(set(region))
    _check_cap(len(region), cap)
    local = {v: k for k, v in enumerate(region)}
    m = len(region)
    esc = 1 << m
    start = _mask(local[v] for v in init)
    rows, cols, vals = [], [], []
    for s in range(1, esc):
        out = 0.0
        for v in region:
            k = local[v]
            if not s >> k & 1:
                continue
            rows.append(s)
            cols.append(s & ~(1 << k))
            vals.append(1.0)
            out += 1.0
            for w in g.adjacency[v]:
                lw = local.get(w)
                if lw is None:
                    rows.append(s)
                    cols.append(esc)
                    vals.append(lam)
                    out += lam
                elif not s >> lw & 1:
                    rows.append(s)
                    cols.append(s | 1 << lw)
                    vals.append(lam)
                    out += lam
        rows.append(s)
        cols.append(s)
        vals.append(-out)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(esc + 1, esc + 1))
    states = np.arange(esc + 1)
    success = states == 0
    failure = states == esc
    return _absorption_probability(Q, start, success, failure)


def ctmc_mean_extinction_time(g: Graph, lam: float, init: Iterable[int], cap: int = DEFAULT_CAP) -> float:
    """Expected time to extinction from ``init`` on the full chain."""
    n = len(g)
    _check_cap(n, cap)
    start = _mask(init)
    if start == 0:
        return 0.0
    Q = generator_matrix(g, lam, cap)
    Qtt = Q[1:, 1:].tocsc()
    m = spla.spsolve(Qtt, -np.ones(Qtt.shape[0]))
    return float(m[start - 1])


def star_mean_extinction_time(n: int, lam: float, hub_infected: bool, leaves_infected: int, dps: int = 80):
    """Expected extinction time on a star with ``n`` vertices, exactly, in high precision.

    By symmetry the process lumps to (hub state, number of infected leaves),
    a chain whose generator is banded once states are ordered leaf count
    first. Elimination without pivoting is stable here since the negated
    generator restricted to live states is diagonally dominant.
    Returns an ``mpmath.mpf``.
    """
    import mpmath

    if n < 2:
        raise ValueError("a star needs at least 2 vertices")
    m = n - 1
    if not 0 <= leaves_infected <= m:
        raise ValueError("leaf count out of range")
    with mpmath.workdps(dps):
        lam_ = mpmath.mpf(lam)
        size = 2 * (m + 1)

        def idx(h, k):
            return 2 * k + h

        # banded rows: offsets -2..2 relative to the diagonal
        band = [[mpmath.mpf(0)] * 5 for _ in range(size)]
        rhs = [mpmath.mpf(-1)] * size
        for k in range(m + 1):
            for h in (0, 1):
                i = idx(h, k)
                if h == 0 and k == 0:
                    band[i][2] = mpmath.mpf(1)
                    rhs[i] = mpmath.mpf(0)
                    continue
                moves = []
                if h == 1:
                    moves.append((idx(0, k), mpmath.mpf(1)))
                    if k < m:
                        moves.append((idx(1, k + 1), lam_ * (m - k)))
                elif k > 0:
                    moves.append((idx(1, k), lam_ * k))
                if k > 0:
                    moves.append((idx(h, k - 1), mpmath.mpf(k)))
                out = mpmath.mpf(0)
                for j, r in moves:
                    if r == 0:
                        continue
                    out += r
                    if j != idx(0, 0):
                        band[i][j - i + 2] += r
                band[i][2] -= out
        # forward elimination on the banded system
        for i in range(size):
            piv = band[i][2]
            for r in (1, 2):
                row = i + r
                if row >= size:
                    break
                f = band[row][2 - r]
                if f == 0:
                    continue
                f = f / piv
                for c in range(1, 3):
                    if 2 + c - r <= 4:
                        band[row][2 + c - r] -= f * band[i][2 + c]
                band[row][2 - r] = 0
                rhs[row] -= f * rhs[i]
        sol = [mpmath.mpf(0)] * size
        for i in range(size - 1, -1, -1):
            acc = rhs[i]
            for c in (1, 2):
                if i + c < size:
                    acc -= band[i][2 + c] * sol[i + c]
            sol[i] = acc / band[i][2]
        return +sol[idx(1 if hub_infected else 0, leaves_infected)]
