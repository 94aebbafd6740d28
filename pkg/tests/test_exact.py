import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from contact_lab.errors import InvalidRate, StateSpaceTooLarge
from contact_lab.exact import (
    ctmc_confinement_probability,
    ctmc_hit_probability,
    ctmc_mean_extinction_time,
    ctmc_survival,
    generator_matrix,
    rw_escape_probability,
    star_mean_extinction_time,
)
from contact_lab.graphs import Line, build_interval, build_star

# 2-vertex edge, lambda = 1/4, start from one end; solved by hand from
# s' = -(1 + lam) s + 2 c, c' = lam s - 2 c  (s: one infected, c: both)
HAND_TWO_VERTEX = {0.5: 0.62216085123883482434, 1.0: 0.40006230937101942015, 2.0: 0.17199851669051643068}


def test_two_vertex_hand_solution():
    g = build_interval(2)
    curve = ctmc_survival(g, 0.25, [0], sorted(HAND_TWO_VERTEX))
    for t, p in zip(curve.times, curve.probabilities):
        assert abs(p - HAND_TWO_VERTEX[t]) < 1e-10


def test_rw_escape():
    assert rw_escape_probability(0.25) == 0.25
    assert rw_escape_probability(0.0) == 0.0
    with pytest.raises(InvalidRate):
        rw_escape_probability(1.0)


def test_generator_rows_sum_to_zero():
    Q = generator_matrix(build_star(5), 0.7)
    assert np.allclose(np.asarray(Q.sum(axis=1)).ravel(), 0.0)


@pytest.mark.parametrize("lam", [0.1, 0.25, 1.3])
def test_uniformization_matches_matrix_exponential(lam):
    g = build_star(5)
    Q = generator_matrix(g, lam).toarray()
    start = 0b00011
    times = [0.3, 2.0, 7.5]
    curve = ctmc_survival(g, lam, [0, 1], times)
    for t, p in zip(times, curve.probabilities):
        row = expm(Q * t)[start]
        assert abs(p - (1 - row[0])) < 1e-9


@given(st.floats(0.0, 2.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_survival_monotone_in_time(lam, t1, t2):
    g = build_interval(4)
    a, b = sorted((t1, t2))
    pa, pb = ctmc_survival(g, lam, [1], [a, b]).probabilities
    assert pb <= pa + 1e-12


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_survival_monotone_in_rate(l1, l2):
    g = build_star(4)
    lo, hi = sorted((l1, l2))
    p_lo = ctmc_survival(g, lo, [0], [3.0]).probabilities[0]
    p_hi = ctmc_survival(g, hi, [0], [3.0]).probabilities[0]
    assert p_lo <= p_hi + 1e-12


def test_empty_start_and_zero_time():
    g = build_interval(3)
    assert ctmc_survival(g, 0.5, [], [1.0]).probabilities == (0.0,)
    assert ctmc_survival(g, 0.5, [1], [0.0]).probabilities[0] == pytest.approx(1.0)


def test_hit_probability_two_vertices():
    g = build_interval(2)
    for lam in (0.1, 0.5, 2.0):
        assert ctmc_hit_probability(g, lam, 0, 1) == pytest.approx(lam / (1 + lam))
    assert ctmc_hit_probability(g, 0.5, 1, 1) == 1.0
    assert ctmc_hit_probability(g, 0.0, 0, 1) == 0.0


def test_confinement_single_vertex():
    g = build_interval(1, 2)
    v = g.vertex_of(Line(1))
    for lam in (0.1, 0.25):
        assert ctmc_confinement_probability(g, [v], lam, [v]) == pytest.approx(1 / (1 + 2 * lam))


def test_state_space_cap():
    with pytest.raises(StateSpaceTooLarge):
        ctmc_survival(build_interval(13), 0.1, [0], [1.0])


def test_lumped_star_mean_matches_full_chain():
    for n, lam in ((4, 0.3), (6, 0.8)):
        g = build_star(n)
        full = ctmc_mean_extinction_time(g, lam, [0, 1])
        lumped = float(star_mean_extinction_time(n, lam, True, 1))
        assert lumped == pytest.approx(full, rel=1e-9)
        full = ctmc_mean_extinction_time(g, lam, [1, 2])
        assert float(star_mean_extinction_time(n, lam, False, 2)) == pytest.approx(full, rel=1e-9)


def test_single_vertex_mean():
    assert float(star_mean_extinction_time(2, 0.0, True, 0)) == pytest.approx(1.0)
    assert ctmc_mean_extinction_time(build_interval(1), 3.0, [0]) == pytest.approx(1.0)


def test_two_vertex_mean_closed_form():
    lam = 0.5
    full = ctmc_mean_extinction_time(build_interval(2), lam, [0])
    # first-step analysis: m1 = 1/(1+lam) + lam/(1+lam) m2, m2 = 1/2 + m1
    m1 = (1 / (1 + lam) + lam / (2 * (1 + lam))) / (1 - lam / (1 + lam))
    assert full == pytest.approx(m1)
    assert math.isfinite(full)
