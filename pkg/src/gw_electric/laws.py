"""Offspring and resistance laws, and the constants derived from them.

The offspring law of the Galton--Watson tree has finite support on the
positive integers (no leaves before the target depth) and mean ``m > 1``.
Edge resistances are ``m**d * xi`` for an edge at depth ``d`` with ``xi``
drawn i.i.d. from a :class:`ResistanceLaw`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    InvalidPmf,
    InvalidResistanceLaw,
    MissingMoment,
    SubcriticalOrCritical,
    ZeroOffspring,
)

PMF_TOL = 1e-12

# integer codes shared with the compiled kernels
FAMILY_CODES = {"point-mass": 0, "uniform": 1, "two-point": 2, "lognormal": 3}


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support offspring distribution with ``p0 = 0``.

    Build instances with :func:`build_offspring_law`, which validates the
    pmf and canonicalises the representation (sorted, merged, no zero-mass
    points).
    """

    support: tuple[int, ...]
    probs: tuple[float, ...]

    @property
    def m(self) -> float:
        return float(sum(k * p for k, p in zip(self.support, self.probs)))

    @property
    def p1(self) -> float:
        return float(sum(p for k, p in zip(self.support, self.probs) if k == 1))

    @property
    def max_support(self) -> int:
        return max(self.support)

    @property
    def min_support(self) -> int:
        return min(self.support)

    @property
    def is_deterministic(self) -> bool:
        return len(self.support) == 1

    def cdf_array(self) -> np.ndarray:
        cdf = np.cumsum(np.asarray(self.probs, dtype=np.float64))
        cdf[-1] = 1.0
        return cdf

    def support_array(self) -> np.ndarray:
        return np.asarray(self.support, dtype=np.int64)

    def to_dict(self) -> dict:
        return {"support": list(self.support), "probs": list(self.probs)}


def build_offspring_law(support: Sequence[int], probs: Sequence[float]) -> OffspringLaw:
    """Validate an offspring pmf and return the canonical :class:`OffspringLaw`.

    Raises
    ------
    ZeroOffspring
        If 0 appears in the support.
    InvalidPmf
        If the lists are empty or of unequal length, a probability is
        negative, or the probabilities do not sum to 1 within ``1e-12``.
        The pmf is never renormalised.
    SubcriticalOrCritical
        If the mean is at most 1.
    """
    support = list(support)
    probs = [float(p) for p in probs]
    if not support or len(support) != len(probs):
        raise InvalidPmf("support and probs must be nonempty and of equal length")
    for k in support:
        if int(k) != k:
            raise InvalidPmf(f"support point {k!r} is not an integer")
        if k < 0:
            raise InvalidPmf(f"support point {k!r} is negative")
    if any(k == 0 for k in support):
        raise ZeroOffspring("0 is in the offspring support (p0 must be 0)")
    if any(not math.isfinite(p) or p < 0 for p in probs):
        raise InvalidPmf("probabilities must be finite and nonnegative")
    total = math.fsum(probs)
    if abs(total - 1.0) > PMF_TOL:
        raise InvalidPmf(f"probabilities sum to {total!r}, not 1")

    merged: dict[int, float] = {}
    for k, p in zip(support, probs):
        merged[int(k)] = merged.get(int(k), 0.0) + p
    pairs = sorted((k, p) for k, p in merged.items() if p > 0)
    law = OffspringLaw(tuple(k for k, _ in pairs), tuple(p for _, p in pairs))
    if law.m <= 1.0:
        raise SubcriticalOrCritical(f"mean offspring m = {law.m!r} must exceed 1")
    return law


def deterministic(k: int) -> OffspringLaw:
    return build_offspring_law([k], [1.0])


def factorial_moment(law: OffspringLaw, k: int) -> float:
    """Return ``E[nu (nu-1) ... (nu-k+1)]`` as an exact finite sum."""
    if k not in (1, 2, 3, 4):
        raise ValueError("k must be in 1..4")
    total = 0.0
    for j, p in zip(law.support, law.probs):
        term = 1
        for i in range(k):
            term *= j - i
        total += p * term
    return total


def w_second_moment(law: OffspringLaw) -> float:
    """Second moment of the martingale limit ``W = lim m**-n #T_n``."""
    m = law.m
    s2 = sum(k * k * p for k, p in zip(law.support, law.probs))
    return (s2 - m) / (m * (m - 1.0))


def dubuc_condition(law: OffspringLaw) -> bool:
    """True iff ``p1 * m < 1``, i.e. ``E[1/W]`` is finite."""
    return law.p1 * law.m < 1.0


@dataclass(frozen=True)
class ResistanceLaw:
    """Law of the positive edge factor ``xi``.

    ``params`` are family specific: ``(v,)`` for point-mass, ``(a, b)`` for
    uniform, ``(v1, q, v2)`` for two-point with ``P(xi = v1) = q``, and
    ``(mu, sigma)`` for lognormal. Moments are stored so that a law with an
    infinite moment can be represented (``math.inf``).
    """

    family: str
    params: tuple[float, ...]
    b1: float
    b2: float
    b3: float
    inv_mean: float

    @property
    def variance(self) -> float:
        return self.b2 - self.b1**2

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.family]

    def params_array(self) -> np.ndarray:
        """Parameters padded for the compiled samplers, with cached reciprocals."""
        out = np.zeros(5, dtype=np.float64)
        out[: len(self.params)] = self.params
        if self.family == "point-mass":
            out[3] = 1.0 / self.params[0]
        elif self.family == "two-point":
            out[3] = 1.0 / self.params[0]
            out[4] = 1.0 / self.params[2]
        return out

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Draw with a numpy generator (used for moment checks and oracles)."""
        p = self.params
        if self.family == "point-mass":
            return np.full(size, p[0])
        if self.family == "uniform":
            return rng.uniform(p[0], p[1], size)
        if self.family == "two-point":
            return np.where(rng.random(size) < p[1], p[0], p[2])
        return rng.lognormal(p[0], p[1], size)

    def to_dict(self) -> dict:
        names = {
            "point-mass": ("value",),
            "uniform": ("a", "b"),
            "two-point": ("v1", "q", "v2"),
            "lognormal": ("mu", "sigma"),
        }[self.family]
        return {"family": self.family, **dict(zip(names, self.params))}


def point_mass(value: float = 1.0) -> ResistanceLaw:
    if not value > 0 or not math.isfinite(value):
        raise InvalidResistanceLaw("point mass must be positive and finite")
    v = float(value)
    return ResistanceLaw("point-mass", (v,), v, v * v, v**3, 1.0 / v)


def uniform(a: float, b: float) -> ResistanceLaw:
    a, b = float(a), float(b)
    if not (0 < a < b < math.inf):
        raise InvalidResistanceLaw("uniform(a, b) needs 0 < a < b < inf")

    def mom(k):
        return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))

    return ResistanceLaw("uniform", (a, b), mom(1), mom(2), mom(3), math.log(b / a) / (b - a))


def two_point(v1: float, q: float, v2: float) -> ResistanceLaw:
    v1, q, v2 = float(v1), float(q), float(v2)
    if not (v1 > 0 and v2 > 0 and 0 <= q <= 1):
        raise InvalidResistanceLaw("two-point needs positive values and 0 <= q <= 1")

    def mom(k):
        return q * v1**k + (1 - q) * v2**k

    return ResistanceLaw("two-point", (v1, q, v2), mom(1), mom(2), mom(3), mom(-1))


def lognormal(mu: float, sigma: float) -> ResistanceLaw:
    mu, sigma = float(mu), float(sigma)
    if not sigma > 0:
        raise InvalidResistanceLaw("lognormal sigma must be positive")

    def mom(k):
        return math.exp(k * mu + 0.5 * k * k * sigma * sigma)

    return ResistanceLaw("lognormal", (mu, sigma), mom(1), mom(2), mom(3), mom(-1))


@dataclass(frozen=True)
class ExpansionConstants:
    a1: float
    a2: float
    b1: float
    b2: float
    c1: float
    c2: float
    c3: float
    c4: float

    @property
    def log_slope(self) -> float:
        """``-c4/c1**2``, the coefficient of ``log n / n**2`` in ``E[C_n] - 1/(c1 n)``."""
        return -self.c4 / self.c1**2

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def expansion_constants(off: OffspringLaw, res: ResistanceLaw) -> ExpansionConstants:
    """Compute ``a1, a2, b1, b2, c1, ..., c4`` for a law pair.

    Raises :class:`MissingMoment` when ``E[xi]`` or ``E[xi**2]`` is infinite.
    """
    if not (math.isfinite(res.b1) and math.isfinite(res.b2)):
        raise MissingMoment("expansion constants need finite E[xi] and E[xi^2]")
    m = off.m
    b1, b2 = res.b1, res.b2
    a1 = factorial_moment(off, 2) / m**2
    # nu(nu-1)(nu-2) vanishes for nu < 2, so the indicator is automatic
    a2 = factorial_moment(off, 3) / m**3
    c1 = a1 * b1 / (1.0 - 1.0 / m)
    c2 = (3.0 * a1**2 / (m - 1.0) + a2) / (1.0 - m**-2)
    c3 = 2.0 * a1 * c1 / (m - 1.0) - 2.0 * b1 * c2 / m
    c4 = b1 / (1.0 - 1.0 / m) * (c3 / c1 + a1) - b2 * c2 / c1
    return ExpansionConstants(a1, a2, b1, b2, c1, c2, c3, c4)


def offspring_from_dict(spec: Mapping) -> OffspringLaw:
    if "deterministic" in spec:
        return deterministic(int(spec["deterministic"]))
    try:
        return build_offspring_law(spec["support"], spec["probs"])
    except KeyError as exc:
        raise InvalidPmf(f"offspring spec is missing field {exc.args[0]!r}") from None


def resistance_from_dict(spec: Mapping) -> ResistanceLaw:
    family = spec.get("family")
    try:
        if family == "point-mass":
            return point_mass(spec.get("value", 1.0))
        if family == "uniform":
            return uniform(spec["a"], spec["b"])
        if family == "two-point":
            return two_point(spec["v1"], spec["q"], spec["v2"])
        if family == "lognormal":
            return lognormal(spec["mu"], spec["sigma"])
    except KeyError as exc:
        raise InvalidResistanceLaw(
            f"resistance family {family!r} is missing field {exc.args[0]!r}"
        ) from None
    raise InvalidResistanceLaw(f"unknown resistance family {family!r}")
