"""Counter-based random numbers.

Every random quantity is a pure function of a 64-bit key and a slot number,
built from the SplitMix64 finaliser. Keys are derived hierarchically:

* tree vertices: ``child_key(parent_key, i)``, so the realisation of a vertex
  does not depend on traversal order, thread schedule or the target depth
  (trees of depth ``n`` and ``n + 1`` grown from one seed are nested);
* pool particles: ``derive(seed, replicate, step, index)``.

The same arithmetic is available in pure Python (``*_py``) for seed
derivation outside compiled code.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_SLOT = 0xD1B54A32D192ED03

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_U_SLOT = np.uint64(_SLOT)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO53 = 1.0 / 9007199254740992.0


def mix64_py(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_py(*parts: int) -> int:
    """Fold integers into one 64-bit key (used for per-replica seeds)."""
    key = mix64_py(GOLDEN)
    for p in parts:
        key = mix64_py(key + (int(p) & MASK64) * GOLDEN + 1)
    return key


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def derive(key, part):
    return mix64(key + uint64(part) * _U_GOLDEN + uint64(1))


@njit(cache=True, inline="always")
def child_key(key, i):
    return derive(key, i)


@njit(cache=True, inline="always")
def uniform01(key, slot):
    """Uniform on the open interval (0, 1)."""
    bits = mix64(key ^ (uint64(slot + 1) * _U_SLOT))
    return ((bits >> _S11) + 0.5) * _TWO53


@njit(cache=True, inline="always")
def draw_offspring(key, support, cdf):
    if support.shape[0] == 1:
        return support[0]
    u = uniform01(key, 0)
    for j in range(cdf.shape[0]):
        if u < cdf[j]:
            return support[j]
    return support[support.shape[0] - 1]


@njit(cache=True, inline="always")
def draw_xi(key, family, params, slot):
    """Resistance factor for the edge keyed by ``key``; uses slots ``slot`` and ``slot + 1``."""
    if family == 0:
        return params[0]
    u = uniform01(key, slot)
    if family == 1:
        return params[0] + (params[1] - params[0]) * u
    if family == 2:
        return params[0] if u < params[1] else params[2]
    v = uniform01(key, slot + 1)
    g = math.sqrt(-2.0 * math.log(u)) * math.cos(2.0 * math.pi * v)
    return math.exp(params[0] + params[1] * g)


@njit(cache=True, inline="always")
def xi_inverse(xi, family, params):
    """``1 / xi`` using the reciprocals cached in ``params[3:5]`` for discrete families."""
    if family == 0:
        return params[3]
    if family == 2:
        return params[3] if xi == params[0] else params[4]
    return 1.0 / xi


def tree_key(seed: int) -> np.uint64:
    """Root key of the tree grown from ``seed``."""
    return np.uint64(derive_py(0x7EE, seed))
