"""Monte Carlo estimators and checks of the quantitative bounds.

Replica ``i`` of an experiment always uses ``replica_seed(base_seed, i)``,
and replicas are aggregated in index order, so results do not depend on how
many worker processes ran them.
"""

from __future__ import annotations

import math
import random
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from contact_lab import exact
from contact_lab.errors import HypothesisViolated, InvalidRate
from contact_lab.graphs import (
    BuildBudget,
    Graph,
    Leaf,
    Line,
    ball,
    build_interval,
    build_star,
    build_sv_tree,
    compute_sequences,
    estar,
    is_tree,
    split_at_estar,
)
from contact_lab.randomness import EventLog, RestrictedLog, reachable, replica_seed
from contact_lab.simulate import OCCUPATION, StopRule, confinement_trial, run_direct, run_from_log

# -- estimates and verdicts ------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    p_hat: float
    ci_low: float
    ci_high: float
    n_runs: int
    n_success: int
    seed: int
    method: str = "wilson"


def binomial_interval(k: int, n: int, confidence: float = 0.95, method: str = "wilson") -> tuple[float, float]:
    """Two-sided interval for a binomial proportion; ``method`` is ``wilson`` or ``clopper-pearson``."""
    scipy_method = {"wilson": "wilson", "clopper-pearson": "exact"}[method]
    ci = binomtest(k, n).proportion_ci(confidence_level=confidence, method=scipy_method)
    p = k / n
    return min(max(ci.low, 0.0), p), max(min(ci.high, 1.0), p)


def make_estimate(n_success: int, n_runs: int, seed: int, method: str = "wilson") -> Estimate:
    lo, hi = binomial_interval(n_success, n_runs, method=method)
    return Estimate(n_success / n_runs, lo, hi, n_runs, n_success, seed, method)


class VerdictKind(str, Enum):
    CONSISTENT = "Consistent"
    INCONCLUSIVE = "Inconclusive"
    VIOLATED = "Violated"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    bound_value: float
    estimate: Estimate
    direction: str
    oracle: Optional[float] = None
    params: dict = field(default_factory=dict)


def judge(est: Estimate, bound: float, direction: str) -> VerdictKind:
    """Three-way comparison of a confidence interval with a bound.

    For a lower bound: Consistent if the whole interval is at or above it,
    Violated if the whole interval is strictly below it. Mirrored for upper.
    """
    if direction == "lower":
        if est.ci_low >= bound:
            return VerdictKind.CONSISTENT
        if est.ci_high < bound:
            return VerdictKind.VIOLATED
    elif direction == "upper":
        if est.ci_high <= bound:
            return VerdictKind.CONSISTENT
        if est.ci_low > bound:
            return VerdictKind.VIOLATED
    else:
        raise ValueError(f"direction must be 'lower' or 'upper', not {direction!r}")
    return VerdictKind.INCONCLUSIVE


# -- replica runner --------------------------------------------------------


def _run_chunk(trial: Callable[[int], Any], base_seed: int, start: int, stop: int) -> list:
    return [trial(replica_seed(base_seed, i)) for i in range(start, stop)]


def run_trials(trial: Callable[[int], Any], n_runs: int, base_seed: int, parallelism: int = 1) -> list:
    """Results of ``trial(seed_i)`` for replicas ``0..n_runs-1``, in replica order."""
    if parallelism <= 1 or n_runs < 2:
        return _run_chunk(trial, base_seed, 0, n_runs)
    n_chunks = min(n_runs, 4 * parallelism)
    bounds = [n_runs * k // n_chunks for k in range(n_chunks + 1)]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(_run_chunk, trial, base_seed, a, b) for a, b in zip(bounds, bounds[1:])]
        out: list = []
        for fut in futures:
            out.extend(fut.result())
    return out


def estimate_event(
    trial: Callable[[int], bool],
    n_runs: int,
    base_seed: int,
    parallelism: int = 1,
    method: str = "wilson",
) -> Estimate:
    if n_runs < 100:
        raise ValueError("estimate_event needs at least 100 runs")
    hits = sum(1 for ok in run_trials(trial, n_runs, base_seed, parallelism) if ok)
    return make_estimate(hits, n_runs, base_seed, method)


# -- trials ----------------------------------------------------------------


@dataclass(frozen=True)
class SurvivalTrial:
    """Infection still present at ``horizon``."""

    graph: Graph
    lam: float
    init: tuple[int, ...]
    horizon: float

    def __call__(self, seed: int) -> bool:
        return not run_direct(self.graph, self.lam, self.init, StopRule(horizon=self.horizon), seed).extinct


@dataclass(frozen=True)
class ExtinctionTimeTrial:
    """Extinction time, or ``inf`` if still alive at ``horizon``."""

    graph: Graph
    lam: float
    init: tuple[int, ...]
    horizon: float

    def __call__(self, seed: int) -> float:
        out = run_direct(self.graph, self.lam, self.init, StopRule(horizon=self.horizon), seed)
        return out.stop_time if out.extinct else math.inf


@dataclass(frozen=True)
class ConfinementTrial:
    graph: Graph
    region: frozenset
    lam: float
    init: tuple[int, ...]

    def __call__(self, seed: int) -> bool:
        return confinement_trial(self.graph, self.region, self.lam, self.init, seed).confined


@dataclass(frozen=True)
class BiasedWalkTrial:
    """Walk that steps up w.p. lam/(1+lam); True if it never rises above its start.

    Stops as confined once ``depth`` below the start, where the chance of
    ever coming back up is lam**(depth+1).
    """

    lam: float
    depth: int

    def __call__(self, seed: int) -> bool:
        rng = random.Random(seed)
        up = self.lam / (1 + self.lam)
        x = 0
        while x > -self.depth:
            if rng.random() < up:
                x += 1
                if x > 0:
                    return False
            else:
                x -= 1
        return True


@dataclass(frozen=True)
class PathTransmissionTrial:
    """Some path leaves ``source`` during ``[0, t]`` and ever reaches ``target``."""

    graph: Graph
    lam: float
    source: int
    target: int
    t: float

    def __call__(self, seed: int) -> bool:
        if self.lam == 0:
            return self.source == self.target
        log = EventLog(self.graph, self.lam, max(self.t, 1.0), seed)
        src = (self.source, (0.0, self.t)) if self.t > 0 else (self.source, 0.0)
        return reachable(log, self.lam, [src], [self.target], (0.0, math.inf))


# -- lemma checks ----------------------------------------------------------


def confinement_pad(lam: float, residual: float = 1e-9) -> int:
    """Smallest m >= 1 with lam**(m+1) < residual."""
    if lam >= 1:
        raise InvalidRate("padding is only defined for lambda < 1")
    m = 1
    while lam ** (m + 1) >= residual:
        m += 1
    return m


def verify_rw_interval(
    n: int,
    lam: float,
    n_runs: int,
    seed: int,
    parallelism: int = 1,
    pad: Optional[int] = None,
    method: str = "wilson",
) -> Verdict:
    """Confinement of the process started from all of {1..n} inside {1..n}, against 1/2."""
    if lam > 0.25:
        warnings.warn(f"lambda={lam} > 1/4: the interval bound's hypothesis does not hold", stacklevel=2)
    pad = confinement_pad(lam) if pad is None else pad
    g = build_interval(n, pad)
    region = frozenset(g.vertex_of(Line(z)) for z in range(1, n + 1))
    init = tuple(sorted(region))
    est = estimate_event(ConfinementTrial(g, region, lam, init), n_runs, seed, parallelism, method)
    oracle = None
    if n <= exact.DEFAULT_CAP:
        oracle = exact.ctmc_confinement_probability(g, region, lam, init)
    return Verdict(judge(est, 0.5, "lower"), 0.5, est, "lower", oracle, {"n": n, "lambda": lam, "pad": pad})


def verify_biased_walk(lam: float, n_runs: int, seed: int, parallelism: int = 1) -> Verdict:
    """Monte Carlo of the comparison walk never exceeding its start, against 1 - lam."""
    depth = confinement_pad(lam)
    est = estimate_event(BiasedWalkTrial(lam, depth), n_runs, seed, parallelism)
    value = 1 - exact.rw_escape_probability(lam)
    return Verdict(judge(est, value, "lower"), value, est, "lower", value, {"lambda": lam, "depth": depth})


def star_extinction_bound(n: int, lam: float) -> float:
    return 0.25 * math.exp(-16 * lam**2 * n)


def verify_star_extinction(
    n: int, lam: float, n_runs: int, seed: int, parallelism: int = 1, method: str = "wilson"
) -> Verdict:
    """Extinction of the fully infected star by time 3 log(1/lam), against 1/4 exp(-16 lam^2 n)."""
    if not 0 < lam <= 0.25:
        raise HypothesisViolated(f"star extinction bound needs 0 < lambda < 1/4, got {lam}")
    if lam == 0.25:
        warnings.warn("lambda = 1/4 sits on the boundary of the star bound's hypothesis", stacklevel=2)
    g = build_star(n)
    t1 = 3 * math.log(1 / lam)
    init = tuple(range(n))
    hits = sum(1 for alive in run_trials(SurvivalTrial(g, lam, init, t1), n_runs, seed, parallelism) if not alive)
    est = make_estimate(hits, n_runs, seed, method)
    bound = star_extinction_bound(n, lam)
    oracle = None
    if n <= exact.DEFAULT_CAP:
        oracle = 1.0 - exact.ctmc_survival(g, lam, init, [t1]).probabilities[0]
    return Verdict(judge(est, bound, "lower"), bound, est, "lower", oracle, {"n": n, "lambda": lam, "t1": t1})


def tree_extinction_bound(size: int, t: float) -> float:
    return size**2 * math.exp(-t / 4)


def _check_tree_hypothesis(g: Graph, lam: float) -> None:
    if not is_tree(g):
        raise HypothesisViolated("graph is not a tree")
    if not 0 <= lam < 0.5:
        raise HypothesisViolated(f"tree bounds need lambda < 1/2, got {lam}")
    if lam > 0 and g.max_degree() > 1 / (8 * lam**2):
        raise HypothesisViolated(f"max degree {g.max_degree()} exceeds 1/(8 lambda^2) = {1 / (8 * lam**2):g}")


def verify_tree_extinction(
    g: Graph,
    lam: float,
    times: Sequence[float],
    n_runs: int,
    seed: int,
    parallelism: int = 1,
    method: str = "wilson",
) -> list[Verdict]:
    """Survival of the fully infected tree at each ``t``, against |T|^2 exp(-t/4).

    One batch of extinction times serves every ``t``, so the per-run
    indicators are monotone in ``t``.
    """
    _check_tree_hypothesis(g, lam)
    init = tuple(range(len(g)))
    horizon = max(times) if times else 0.0
    ext = run_trials(ExtinctionTimeTrial(g, lam, init, horizon), n_runs, seed, parallelism) if horizon > 0 else [0.0] * n_runs
    curve = None
    if len(g) <= exact.DEFAULT_CAP:
        curve = exact.ctmc_survival(g, lam, init, times)
    out = []
    for k, t in enumerate(times):
        alive = sum(1 for x in ext if x > t) if t > 0 else n_runs
        est = make_estimate(alive, n_runs, seed, method)
        bound = tree_extinction_bound(len(g), t)
        oracle = curve.probabilities[k] if curve else None
        out.append(Verdict(judge(est, bound, "upper"), bound, est, "upper", oracle, {"size": len(g), "lambda": lam, "t": t}))
    return out


def path_transmission_bound(length: int, lam: float, t: float) -> float:
    return (t + 1) * (2 * lam) ** length


def verify_path_transmission(
    length: int, lam: float, t: float, n_runs: int, seed: int, parallelism: int = 1, method: str = "wilson"
) -> Verdict:
    """Paths from one end of a path graph, leaving during [0, t], reaching the other end.

    The bound is (t+1)(2 lam)^length. The attached oracle is the exact
    probability for paths leaving at time 0 only, a lower bound for the event.
    """
    g = build_interval(length + 1)
    _check_tree_hypothesis(g, lam)
    x, y = 0, length
    est = estimate_event(PathTransmissionTrial(g, lam, x, y, t), n_runs, seed, parallelism, method)
    bound = path_transmission_bound(length, lam, t)
    oracle = exact.ctmc_hit_probability(g, lam, x, y, t) if len(g) <= exact.DEFAULT_CAP else None
    return Verdict(judge(est, bound, "upper"), bound, est, "upper", oracle, {"length": length, "lambda": lam, "t": t})


# -- star survival scaling -------------------------------------------------


@dataclass(frozen=True)
class ScalingCell:
    lam: float
    size: int
    hub_infected: bool
    n_initial_leaves: int
    x: float
    regime: str
    median_time: float
    censored_fraction: float
    exact_mean_time: Optional[float] = None


@dataclass(frozen=True)
class ScalingReport:
    cells: tuple[ScalingCell, ...]
    slope: Optional[float]
    increasing_in_size: dict

    @property
    def all_increasing(self) -> bool:
        return bool(self.increasing_in_size) and all(self.increasing_in_size.values())


def star_initial_leaves(size: int, lam: float) -> int:
    """Fewest leaves, plus one, with count above lam * deg / (16 e)."""
    return math.ceil(lam * (size - 1) / (16 * math.e)) + 1


def star_survival_scaling(
    lambdas: Sequence[float],
    sizes: Sequence[int],
    n_runs: int,
    seed: int,
    horizon: float,
    include_hub: bool = True,
    parallelism: int = 1,
    exact_means: bool = False,
) -> ScalingReport:
    """Median extinction time of stars across (lam, size), with a log-linear fit.

    Runs alive at ``horizon`` are censored; a median that falls among them is
    ``inf`` and the cell drops out of the fit. ``exact_means`` adds the
    exact expected extinction time from the lumped star chain.
    """
    cells = []
    for c, lam in enumerate(lambdas):
        for s, size in enumerate(sizes):
            g = build_star(size)
            deg = size - 1
            k = min(star_initial_leaves(size, lam), deg)
            init = ((0,) if include_hub else ()) + tuple(range(1, k + 1))
            times = run_trials(
                ExtinctionTimeTrial(g, lam, init, horizon), n_runs, replica_seed(seed, 1000 * c + s), parallelism
            )
            median = statistics.median(times)
            censored = sum(1 for x in times if math.isinf(x)) / n_runs
            x = lam**2 * deg
            lemma = lam < 1 and deg > 64 * math.e**2 / lam**2
            mean = None
            if exact_means:
                mean = float(exact.star_mean_extinction_time(size, lam, include_hub, k))
            cells.append(
                ScalingCell(lam, size, include_hub, k, x, "lemma" if lemma else "exploratory", median, censored, mean)
            )
    usable = [c for c in cells if math.isfinite(c.median_time) and c.median_time > 0]
    slope = None
    if len({c.x for c in usable}) >= 2:
        slope = float(np.polyfit([c.x for c in usable], [math.log(c.median_time) for c in usable], 1)[0])
    increasing = {}
    for lam in lambdas:
        row = sorted((c for c in cells if c.lam == lam), key=lambda c: c.size)
        increasing[lam] = all(
            math.isfinite(b.median_time) and b.median_time > a.median_time for a, b in zip(row, row[1:])
        )
    return ScalingReport(tuple(cells), slope, increasing)


# -- relay between consecutive hubs ---------------------------------------


def realized_hubs(g: Graph) -> list[int]:
    """Indices i whose hub and leaves are present in ``g``."""
    hubs = sorted({lab.i for lab in g.labels if isinstance(lab, Leaf)})
    if not hubs:
        return []
    table = compute_sequences(max(max(hubs), 2))
    return [i for i in hubs if Line(table.o[i]) in g]


def occupation_threshold(lam: float, ball_size: int) -> float:
    return lam * ball_size / (16 * math.e)


@dataclass(frozen=True)
class RelayTrial:
    """Start with the ball around one hub infected; succeed once the next
    hub's ball holds more than ``threshold`` infected vertices."""

    graph: Graph
    lams: tuple[float, ...]
    lambda_max: float
    start: frozenset
    target: frozenset
    threshold: float
    horizon: float

    def __call__(self, seed: int) -> tuple[bool, ...]:
        log = EventLog(self.graph, self.lambda_max, self.horizon, seed)
        stop = StopRule(horizon=self.horizon, occupation=(self.target, self.threshold))
        return tuple(
            run_from_log(self.graph, log, lam, self.start, stop).stop_reason == OCCUPATION for lam in self.lams
        )


def relay_trial(g: Graph, hop: int, lams: Sequence[float], horizon: float, threshold_lambda: Optional[float] = None) -> RelayTrial:
    hubs = realized_hubs(g)
    if hop < 1 or hop >= len(hubs):
        raise ValueError(f"hop {hop} needs hubs {hop} and {hop + 1} in the graph")
    table = compute_sequences(max(hubs))
    a = g.vertex_of(Line(table.o[hubs[hop - 1]]))
    b = g.vertex_of(Line(table.o[hubs[hop]]))
    target = frozenset(ball(g, b, 1))
    ref = max(lams) if threshold_lambda is None else threshold_lambda
    lam_max = max(lams) or 1.0
    return RelayTrial(g, tuple(lams), lam_max, frozenset(ball(g, a, 1)), target,
                      occupation_threshold(ref, len(target)), horizon)


def relay_experiment(
    g: Graph,
    lam: float,
    hops: int,
    n_runs: int,
    seed: int,
    horizon: float = 200.0,
    parallelism: int = 1,
) -> list[Estimate]:
    """Per hop j, P(infection started on the ball of hub j fills the ball of hub j+1)."""
    out = []
    for hop in range(1, hops + 1):
        trial = relay_trial(g, hop, [lam], horizon)
        hits = sum(1 for r in run_trials(trial, n_runs, replica_seed(seed, hop), parallelism) if r[0])
        out.append(make_estimate(hits, n_runs, seed))
    return out


# -- edge removal ----------------------------------------------------------


@dataclass(frozen=True)
class EdgeRemovalTrial:
    """One shared log; the run on G+ reads the restriction of G's log."""

    graph: Graph
    plus: Graph
    lam: float
    horizon: float

    def __call__(self, seed: int) -> tuple[bool, float, int, bool, float]:
        lam_max = self.lam if self.lam > 0 else 1.0
        log = EventLog(self.graph, lam_max, self.horizon, seed)
        sub = RestrictedLog.by_labels(log, self.plus)
        stop = StopRule(horizon=self.horizon)
        full = run_from_log(self.graph, log, self.lam, [self.graph.vertex_of(Line(1))], stop,
                            designated_edge=estar(self.graph))
        half = run_from_log(self.plus, sub, self.lam, [self.plus.vertex_of(Line(1))], stop)
        return (not full.extinct, full.stop_time, full.estar_crossings, not half.extinct, half.stop_time)


@dataclass(frozen=True)
class EdgeRemovalReport:
    i_max: int
    lam: float
    horizon: float
    survival_full: Estimate
    survival_plus: Estimate
    time_quantiles_full: tuple[float, ...]
    time_quantiles_plus: tuple[float, ...]
    coupling_violations: int
    crossings_among_survivors: tuple[int, ...]

    @property
    def median_crossings(self) -> Optional[float]:
        if not self.crossings_among_survivors:
            return None
        return float(statistics.median(self.crossings_among_survivors))


QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


def edge_removal_experiment(
    i_max: int,
    lam: float,
    horizon: float,
    n_runs: int,
    seed: int,
    budget: BuildBudget = BuildBudget(),
    parallelism: int = 1,
) -> EdgeRemovalReport:
    """Matched runs on the truncated tree G and its half G+, both started at line position 1.

    Times are reported censored at ``horizon``. A coupling violation is a
    run where G+ outlives G, impossible under the shared log.
    """
    g = build_sv_tree(i_max, budget)
    _, plus = split_at_estar(g)
    rows = run_trials(EdgeRemovalTrial(g, plus, lam, horizon), n_runs, seed, parallelism)
    violations = sum(1 for r in rows if (r[3] and not r[0]) or r[4] > r[1])
    crossings = tuple(r[2] for r in rows if r[0])
    return EdgeRemovalReport(
        i_max,
        lam,
        horizon,
        make_estimate(sum(r[0] for r in rows), n_runs, seed),
        make_estimate(sum(r[3] for r in rows), n_runs, seed),
        tuple(float(q) for q in np.quantile([r[1] for r in rows], QUANTILES)),
        tuple(float(q) for q in np.quantile([r[4] for r in rows], QUANTILES)),
        violations,
        crossings,
    )


# -- proof schedule ----------------------------------------------------------


@dataclass(frozen=True)
class ProofSchedule:
    i: int
    lam: float
    even_leaf_sum: int
    log_tau: int
    t1: float
    L: float
    hub_gap: int


def compute_proof_schedule(i: int, lam: float) -> ProofSchedule:
    """Time scales of the extinction argument on the half-line, for display.

    ``log_tau`` is exact: (i/2)(d_2 + d_4 + ... + d_i). ``L`` uses
    i log(i (d_2 + ... + d_i)); ``hub_gap`` is the actual distance from
    hub i to hub i+2, which is (i+1) times that sum.
    """
    if i < 2 or i % 2:
        raise ValueError("i must be an even integer >= 2")
    if not 0 < lam < 1:
        raise InvalidRate("need 0 < lambda < 1")
    table = compute_sequences(i + 1)
    s = sum(table.d[j] for j in range(2, i + 1, 2))
    return ProofSchedule(
        i=i,
        lam=lam,
        even_leaf_sum=s,
        log_tau=(i // 2) * s,
        t1=3 * math.log(1 / lam),
        L=i * math.log(i * s),
        hub_gap=abs(table.o[i + 2] - table.o[i]),
    )
