"""Offspring and resistance laws, and the expansion constants.

Reference values are recomputed here with exact rational arithmetic, which
is independent of the floating-point code under test.
"""

import math
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gw_electric import (
    build_offspring_law,
    deterministic,
    dubuc_condition,
    expansion_constants,
    factorial_moment,
    lognormal,
    point_mass,
    two_point,
    uniform,
    w_second_moment,
)
from gw_electric.errors import (
    InvalidPmf,
    InvalidResistanceLaw,
    MissingMoment,
    SubcriticalOrCritical,
    ZeroOffspring,
)
from gw_electric.laws import ResistanceLaw, offspring_from_dict, resistance_from_dict


def exact_constants(support, probs, b1, b2):
    """Expansion constants in exact arithmetic from the defining formulas."""
    p = [F(x) for x in probs]
    m = sum(k * q for k, q in zip(support, p))
    fm2 = sum(k * (k - 1) * q for k, q in zip(support, p))
    fm3 = sum(k * (k - 1) * (k - 2) * q for k, q in zip(support, p) if k >= 2)
    a1 = fm2 / m**2
    a2 = fm3 / m**3
    c1 = a1 * b1 / (1 - 1 / m)
    c2 = (3 * a1**2 / (m - 1) + a2) / (1 - 1 / m**2)
    c3 = 2 * a1 * c1 / (m - 1) - 2 * b1 * c2 / m
    c4 = b1 / (1 - 1 / m) * (c3 / c1 + a1) - b2 * c2 / c1
    return dict(a1=a1, a2=a2, c1=c1, c2=c2, c3=c3, c4=c4)


# --- offspring laws --------------------------------------------------------


def test_factorial_moment_examples():
    assert factorial_moment(deterministic(2), 2) == 2
    assert factorial_moment(build_offspring_law([1, 2], [0.5, 0.5]), 2) == 1
    assert factorial_moment(deterministic(2), 3) == 0


def test_w_second_moment_examples():
    assert w_second_moment(deterministic(3)) == 1
    assert w_second_moment(build_offspring_law([1, 2], [0.5, 0.5])) == pytest.approx(4 / 3, rel=1e-15)
    assert w_second_moment(build_offspring_law([1, 3], [0.5, 0.5])) == pytest.approx(1.5, rel=1e-15)


def test_dubuc_examples():
    assert dubuc_condition(deterministic(2))
    assert dubuc_condition(build_offspring_law([1, 2], [0.5, 0.5]))
    assert not dubuc_condition(build_offspring_law([1, 5], [0.8, 0.2]))


@pytest.mark.parametrize(
    "support, probs, err",
    [
        ([], [], InvalidPmf),
        ([1, 2], [0.5], InvalidPmf),
        ([1, 2], [0.5, 0.6], InvalidPmf),
        ([1, 2], [-0.5, 1.5], InvalidPmf),
        ([1.5, 2], [0.5, 0.5], InvalidPmf),
        ([0, 3], [0.5, 0.5], ZeroOffspring),
        ([1], [1.0], SubcriticalOrCritical),
        ([1, 2], [1.0, 0.0], SubcriticalOrCritical),
    ],
)
def test_offspring_validation(support, probs, err):
    with pytest.raises(err):
        build_offspring_law(support, probs)


def test_pmf_is_not_renormalised():
    with pytest.raises(InvalidPmf):
        build_offspring_law([1, 2], [0.5, 0.5 + 1e-9])
    build_offspring_law([1, 2], [0.5, 0.5 + 1e-13])


def test_offspring_dict_round_trip():
    law = build_offspring_law([3, 1, 2], [0.2, 0.5, 0.3])
    assert law.support == (1, 2, 3)
    assert offspring_from_dict(law.to_dict()) == law
    assert offspring_from_dict({"deterministic": 2}) == deterministic(2)


# --- resistance laws -------------------------------------------------------


def test_resistance_moments():
    u = uniform(0.5, 1.5)
    assert u.b1 == pytest.approx(1.0)
    assert u.variance == pytest.approx(1 / 12)
    assert u.inv_mean == pytest.approx(math.log(3))
    t = two_point(0.5, 0.5, 1.5)
    assert (t.b1, t.b2) == (1.0, 1.25)
    assert t.inv_mean == pytest.approx(0.5 * 2 + 0.5 / 1.5)
    ln = lognormal(0.0, 0.5)
    assert ln.b2 == pytest.approx(math.exp(0.5))
    assert ln.inv_mean == pytest.approx(math.exp(0.125))


@pytest.mark.parametrize(
    "build", [lambda: point_mass(0), lambda: uniform(1, 1), lambda: two_point(-1, 0.5, 1), lambda: lognormal(0, 0)]
)
def test_resistance_validation(build):
    with pytest.raises(InvalidResistanceLaw):
        build()


@pytest.mark.parametrize("law", [point_mass(2.0), uniform(0.5, 1.5), two_point(0.5, 0.3, 2.0), lognormal(0.1, 0.4)])
def test_resistance_sampler_matches_moments(law):
    import numpy as np

    x = law.sample(np.random.default_rng(1), 200_000)
    se = math.sqrt(max(law.variance, 1e-30) / x.size)
    assert abs(x.mean() - law.b1) <= 5 * se + 1e-15
    assert resistance_from_dict(law.to_dict()) == law


# --- expansion constants ---------------------------------------------------


def test_constants_det_binary_uniform():
    # deterministic offspring: c2 = 1, c3 = 0, c4 = -Var[xi]/E[xi] = -1/12
    c = expansion_constants(deterministic(2), uniform(0.5, 1.5))
    assert c.c1 == pytest.approx(1.0, abs=1e-15)
    assert c.c2 == pytest.approx(1.0, abs=1e-15)
    assert c.c3 == pytest.approx(0.0, abs=1e-15)
    assert c.c4 == pytest.approx(-1 / 12, abs=1e-15)
    assert c.log_slope == pytest.approx(1 / 12, abs=1e-15)


def test_constants_det_binary_unit():
    c = expansion_constants(deterministic(2), point_mass(1.0))
    assert (c.a1, c.c1, c.c4) == (0.5, 1.0, 0.0)


def test_constants_one_two_unit():
    c = expansion_constants(build_offspring_law([1, 2], [0.5, 0.5]), point_mass(1.0))
    ref = exact_constants([1, 2], [F(1, 2), F(1, 2)], 1, 1)
    assert ref["a1"] == F(4, 9) and ref["a2"] == 0
    assert ref["c1"] == F(4, 3) and ref["c2"] == F(32, 15)
    assert float(ref["c3"]) == pytest.approx(-0.4741, abs=1e-4)
    assert ref["c4"] == F(-4, 3)
    for k, v in ref.items():
        assert getattr(c, k) == pytest.approx(float(v), rel=1e-13, abs=1e-15)
    # log-correction slope -c4/c1^2 = (4/3)/(16/9) = 3/4
    assert c.log_slope == pytest.approx(0.75, rel=1e-13)


def test_missing_moment():
    bad = ResistanceLaw("lognormal", (0.0, 1.0), 1.0, math.inf, math.inf, 1.0)
    with pytest.raises(MissingMoment):
        expansion_constants(deterministic(2), bad)


offspring_laws = st.lists(
    st.tuples(st.integers(1, 6), st.integers(1, 20)), min_size=1, max_size=4
).map(lambda pairs: (tuple(k for k, _ in pairs), tuple(w for _, w in pairs)))


def _law(pairs):
    support, weights = pairs
    total = sum(weights)
    probs = [F(w, total) for w in weights]
    return support, probs


resistance_laws = st.one_of(
    st.floats(0.1, 5).map(point_mass),
    st.tuples(st.floats(0.1, 2), st.floats(0.1, 2)).map(lambda t: uniform(t[0], t[0] + t[1])),
    st.tuples(st.floats(0.1, 3), st.floats(0, 1), st.floats(0.1, 3)).map(lambda t: two_point(*t)),
    st.tuples(st.floats(-1, 1), st.floats(0.05, 1)).map(lambda t: lognormal(*t)),
)


@given(offspring_laws, resistance_laws)
def test_constants_match_exact_arithmetic(pairs, res):
    support, probs = _law(pairs)
    if sum(k * p for k, p in zip(support, probs)) <= 1:
        return
    off = build_offspring_law(support, [float(p) for p in probs])
    c = expansion_constants(off, res)
    ref = exact_constants(support, probs, F(res.b1), F(res.b2))
    for k, v in ref.items():
        assert getattr(c, k) == pytest.approx(float(v), rel=1e-9, abs=1e-12)


@given(offspring_laws, resistance_laws)
def test_c1_is_mean_xi_times_w_second_moment(pairs, res):
    support, probs = _law(pairs)
    if sum(k * p for k, p in zip(support, probs)) <= 1:
        return
    off = build_offspring_law(support, [float(p) for p in probs])
    c = expansion_constants(off, res)
    assert c.c1 == pytest.approx(res.b1 * w_second_moment(off), rel=1e-12)
    assert w_second_moment(off) >= 1 - 1e-12


@given(st.integers(2, 8), resistance_laws)
def test_deterministic_specialisation(k, res):
    c = expansion_constants(deterministic(k), res)
    assert c.c2 == pytest.approx(1.0, abs=1e-12)
    assert c.c3 == pytest.approx(0.0, abs=1e-12)
    assert c.c4 == pytest.approx(res.b1 - res.b2 / res.b1, rel=1e-12, abs=1e-12)


@given(offspring_laws, resistance_laws, st.randoms(use_true_random=False))
def test_constants_invariant_under_split_support(pairs, res, rnd):
    # writing one support point twice with split mass is the same law
    support, probs = _law(pairs)
    if sum(k * p for k, p in zip(support, probs)) <= 1:
        return
    i = rnd.randrange(len(support))
    split = list(support) + [support[i]]
    p = [float(x) for x in probs]
    p = p[:i] + [p[i] / 2] + p[i + 1 :] + [p[i] / 2]
    a = expansion_constants(build_offspring_law(support, [float(x) for x in probs]), res)
    b = expansion_constants(build_offspring_law(split, p), res)
    for k in ("a1", "a2", "c1", "c2", "c3", "c4"):
        assert getattr(b, k) == pytest.approx(getattr(a, k), rel=1e-12, abs=1e-14)
