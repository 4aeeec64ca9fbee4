"""Counter-based random numbers: compiled and pure-Python paths agree."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numba import njit
from scipy import stats

from gw_electric import build_offspring_law
from gw_electric.rng import GOLDEN, MASK64, derive, derive_py, draw_offspring, mix64, mix64_py, uniform01

u64 = st.integers(0, MASK64)


@njit
def _mix(z):
    return mix64(z)


@njit
def _derive(key, part):
    return derive(key, part)


@njit
def _uniforms(key, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = uniform01(key, i)
    return out


@njit
def _offspring(key, n, support, cdf):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = draw_offspring(derive(key, i), support, cdf)
    return out


@given(u64)
def test_mix64_compiled_matches_python(z):
    assert int(_mix(np.uint64(z))) == mix64_py(z)


@given(u64, st.integers(0, 2**40))
def test_derive_compiled_matches_python(key, part):
    expect = mix64_py(key + part * GOLDEN + 1)
    assert int(_derive(np.uint64(key), np.int64(part))) == expect


def test_derive_py_is_order_sensitive():
    assert derive_py(1, 2) != derive_py(2, 1)
    assert derive_py(1, 2) == derive_py(1, 2)


def test_uniforms_open_interval_and_uniform():
    u = _uniforms(np.uint64(12345), 200_000)
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-4


def test_offspring_frequencies():
    law = build_offspring_law([1, 2, 4], [0.2, 0.5, 0.3])
    n = 200_000
    k = _offspring(np.uint64(99), n, law.support_array(), law.cdf_array())
    counts = np.array([(k == s).sum() for s in law.support])
    assert counts.sum() == n
    assert stats.chisquare(counts, n * np.array(law.probs)).pvalue > 1e-4


@pytest.mark.parametrize("slot", [0, 1, 7])
def test_slots_are_decorrelated(slot):
    keys = np.array([derive_py(5, i) for i in range(20_000)], dtype=np.uint64)
    a = np.array([_uniforms(k, slot + 2)[slot] for k in keys[:5000]])
    b = np.array([_uniforms(k, slot + 2)[slot + 1] for k in keys[:5000]])
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.06
