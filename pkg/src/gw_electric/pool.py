"""Population dynamics for the law of ``C_n``.

A pool of ``N`` particles approximates the law of ``C_n``. One step builds
every new particle from a fresh offspring count ``nu``, fresh edge factors
``xi_i`` and ``nu`` particles resampled uniformly from the previous pool:

    C' = lam**-1 * sum_i C_i / (1 + xi_i * C_i).

``lam = m`` is the critical weighting; ``lam > m`` gives the geometrically
decaying regime. Particle ``j`` at step ``n`` of replicate ``r`` draws all of
its randomness from the key ``hash(seed, r, n, j)``, so pools do not depend
on how particles are scheduled across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy import stats

from .errors import BudgetExceeded, InvalidOption, MissingInverseMoment, PoolTooSmall
from .laws import ExpansionConstants, OffspringLaw, ResistanceLaw
from .rng import derive, derive_py, draw_offspring, draw_xi, uniform01

MIN_POOL = 1000
DEFAULT_BUDGET = 1e11
EULER_GAMMA = 0.5772156649015329
_BLOCKS = 1024


@njit(cache=True, parallel=True)
def _init_kernel(out, key, support, cdf, family, params, lam_inv):
    for j in prange(out.shape[0]):
        pk = derive(key, j)
        k = draw_offspring(pk, support, cdf)
        acc = 0.0
        for i in range(k):
            acc += 1.0 / draw_xi(pk, family, params, 1 + 3 * i)
        out[j] = acc * lam_inv


@njit(cache=True, parallel=True)
def _step_kernel(old, out, key, support, cdf, family, params, lam_inv):
    size = old.shape[0]
    for j in prange(out.shape[0]):
        pk = derive(key, j)
        k = draw_offspring(pk, support, cdf)
        acc = 0.0
        for i in range(k):
            xi = draw_xi(pk, family, params, 1 + 3 * i)
            idx = int(uniform01(pk, 3 + 3 * i) * size)
            if idx >= size:
                idx = size - 1
            c = old[idx]
            acc += c / (1.0 + xi * c)
        out[j] = acc * lam_inv


@njit(cache=True, parallel=True)
def _moments_kernel(p):
    """Sums of p, p**2, p**3 over fixed blocks, folded in block order."""
    size = p.shape[0]
    nb = min(_BLOCKS, size)
    part = np.zeros((nb, 3))
    for b in prange(nb):
        lo = b * size // nb
        hi = (b + 1) * size // nb
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        for j in range(lo, hi):
            v = p[j]
            s1 += v
            s2 += v * v
            s3 += v * v * v
        part[b, 0] = s1
        part[b, 1] = s2
        part[b, 2] = s3
    tot = np.zeros(3)
    for b in range(nb):
        for q in range(3):
            tot[q] += part[b, q]
    return tot / size


def _step_key(seed: int, replicate: int, step: int) -> np.uint64:
    return np.uint64(derive_py(0x9001, seed, replicate, step))


@dataclass
class PoolState:
    """Particle approximation of the law of ``C_n`` (``C_n(lam)`` if ``lam > m``)."""

    step: int
    particles: np.ndarray
    lam: float
    seed: int
    replicate: int
    off: OffspringLaw = field(repr=False)
    res: ResistanceLaw = field(repr=False)

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    def moments(self) -> np.ndarray:
        """``(E[C], E[C^2], E[C^3])`` over the pool."""
        return _moments_kernel(self.particles)


def _laws(off, res):
    return off.support_array(), off.cdf_array(), res.code, res.params_array()


def init_pool(
    off: OffspringLaw,
    res: ResistanceLaw,
    size: int,
    lam: float | None = None,
    seed: int = 0,
    replicate: int = 0,
) -> PoolState:
    """Pool of ``size`` i.i.d. draws of ``C_1 = lam**-1 * sum_{i<=nu} 1/xi_i``."""
    if size < MIN_POOL:
        raise PoolTooSmall(f"pool size {size} is below {MIN_POOL}")
    lam = off.m if lam is None else float(lam)
    if lam < off.m:
        raise InvalidOption(f"lambda={lam} must be at least m={off.m}")
    out = np.empty(int(size))
    _init_kernel(out, _step_key(seed, replicate, 1), *_laws(off, res), 1.0 / lam)
    return PoolState(1, out, lam, int(seed), int(replicate), off, res)


def _advance(state: PoolState, out: np.ndarray) -> None:
    key = _step_key(state.seed, state.replicate, state.step + 1)
    _step_kernel(state.particles, out, key, *_laws(state.off, state.res), 1.0 / state.lam)


def step_pool(state: PoolState) -> PoolState:
    """Return the pool at ``step + 1``; the input pool is left untouched."""
    out = np.empty_like(state.particles)
    _advance(state, out)
    return PoolState(state.step + 1, out, state.lam, state.seed, state.replicate, state.off, state.res)


@dataclass(frozen=True)
class MomentTrajectory:
    """Per-replicate pool moments for steps ``1..n_max``.

    Arrays ``x_rep``, ``y_rep``, ``z_rep`` have shape ``(R, n_max)``; column
    ``n - 1`` holds step ``n``.
    """

    off: OffspringLaw
    res: ResistanceLaw
    size: int
    lam: float
    seed: int
    x_rep: np.ndarray
    y_rep: np.ndarray
    z_rep: np.ndarray

    @property
    def replicates(self) -> int:
        return self.x_rep.shape[0]

    @property
    def n_max(self) -> int:
        return self.x_rep.shape[1]

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.n_max + 1)

    def _mean_se(self, arr):
        mean = arr.mean(axis=0)
        se = arr.std(axis=0, ddof=1) / math.sqrt(arr.shape[0])
        return mean, se

    @property
    def x(self) -> np.ndarray:
        return self.x_rep.mean(axis=0)

    @property
    def y(self) -> np.ndarray:
        return self.y_rep.mean(axis=0)

    @property
    def z(self) -> np.ndarray:
        return self.z_rep.mean(axis=0)

    @property
    def x_se(self) -> np.ndarray:
        return self._mean_se(self.x_rep)[1]

    @property
    def y_se(self) -> np.ndarray:
        return self._mean_se(self.y_rep)[1]

    @property
    def z_se(self) -> np.ndarray:
        return self._mean_se(self.z_rep)[1]

    def eps(self, c1: float) -> tuple[np.ndarray, np.ndarray]:
        """``eps_n = 1/x_{n+1} - 1/x_n - c1`` for ``n = 1..n_max-1`` with delta-method SE.

        The SE uses the replicate covariance of ``(x_n, x_{n+1})``.
        """
        x = self.x
        inv = 1.0 / x
        eps = inv[1:] - inv[:-1] - c1
        r = self.replicates
        dx = self.x_rep - x
        var = (dx**2).sum(axis=0) / (r - 1) / r
        cov = (dx[:, 1:] * dx[:, :-1]).sum(axis=0) / (r - 1) / r
        g1 = -1.0 / x[1:] ** 2
        g0 = 1.0 / x[:-1] ** 2
        v = g1**2 * var[1:] + g0**2 * var[:-1] + 2 * g1 * g0 * cov
        return eps, np.sqrt(np.maximum(v, 0.0))


def moment_trajectory(
    off: OffspringLaw,
    res: ResistanceLaw,
    size: int,
    replicates: int,
    n_max: int,
    lam: float | None = None,
    seed: int = 0,
    budget: float = DEFAULT_BUDGET,
) -> MomentTrajectory:
    """Run ``replicates`` independent pools to step ``n_max`` and record moments."""
    if replicates < 4:
        raise InvalidOption("at least 4 replicates are needed for standard errors")
    if n_max < 1:
        raise InvalidOption("n_max must be positive")
    work = float(n_max) * size * off.m * replicates
    if work > budget:
        raise BudgetExceeded(f"{work:.3g} particle draws exceed the budget {budget:.3g}")
    lam = off.m if lam is None else float(lam)
    xs = np.empty((replicates, n_max))
    ys = np.empty((replicates, n_max))
    zs = np.empty((replicates, n_max))
    for r in range(replicates):
        state = init_pool(off, res, size, lam, seed, r)
        spare = np.empty_like(state.particles)
        for n in range(1, n_max + 1):
            if n > 1:
                _advance(state, spare)
                state.particles, spare = spare, state.particles
                state.step = n
            xs[r, n - 1], ys[r, n - 1], zs[r, n - 1] = state.moments()
    return MomentTrajectory(off, res, int(size), lam, int(seed), xs, ys, zs)


@dataclass(frozen=True)
class C0Estimate:
    value: float
    se: float
    cutoff: int
    per_replicate: np.ndarray


def estimate_c0(traj: MomentTrajectory, consts: ExpansionConstants, cutoff: int) -> C0Estimate:
    """Truncated series ``-c1 + 1/E[1/xi] + sum_{i<=I} (eps_i - c4/i)``.

    The sum telescopes to ``1/x_{I+1} - 1/x_1 - c1*I - c4*H_I``; it is
    evaluated per replicate and the error bar is the replicate spread.
    """
    inv_mean = traj.res.inv_mean
    if not math.isfinite(inv_mean):
        raise MissingInverseMoment("c0 needs a finite E[1/xi]")
    if cutoff < 1 or cutoff + 1 > traj.n_max:
        raise InvalidOption(f"cutoff {cutoff} needs a trajectory through step {cutoff + 1}")
    if traj.lam != traj.off.m:
        raise InvalidOption("c0 is defined for the critical weighting lam = m")
    harmonic = math.fsum(1.0 / i for i in range(1, cutoff + 1))
    x1 = traj.x_rep[:, 0]
    xi1 = traj.x_rep[:, cutoff]
    per = -consts.c1 + 1.0 / inv_mean + 1.0 / xi1 - 1.0 / x1 - consts.c1 * cutoff - consts.c4 * harmonic
    se = float(per.std(ddof=1) / math.sqrt(per.size))
    return C0Estimate(float(per.mean()), se, int(cutoff), per)


def expansion_offset(c0: C0Estimate | float, consts: ExpansionConstants) -> float:
    """Constant term ``K`` in ``1/E[C_n] = c1 n + c4 log n + K + o(1)``.

    The partial sums of ``c4/i`` grow like ``log n + gamma``, so
    ``K = c0 + c4 * gamma`` with Euler's constant ``gamma``.
    """
    value = c0.value if isinstance(c0, C0Estimate) else float(c0)
    return value + consts.c4 * EULER_GAMMA


def c0_consistency(
    traj: MomentTrajectory, consts: ExpansionConstants, c0: C0Estimate, n_lo: int, n_hi: int
) -> dict:
    """Residuals ``1/x_n - c1 n - c4 log n - K`` over ``n_lo..n_hi`` with error bars."""
    n = np.arange(n_lo, n_hi + 1)
    x = traj.x[n - 1]
    inv_se = traj.x_se[n - 1] / x**2
    resid = 1.0 / x - consts.c1 * n - consts.c4 * np.log(n) - expansion_offset(c0, consts)
    bar = np.sqrt(inv_se**2 + c0.se**2)
    return {"n": n, "residual": resid, "error_bar": bar, "max_ratio": float(np.max(np.abs(resid) / bar))}


@dataclass(frozen=True)
class LogCorrectionFit:
    slope: float
    intercept: float
    slope_se: float
    slope_ci: tuple[float, float]
    n_lo: int
    n_hi: int
    noise_dominates: bool
    chi2_dof: float
    replicate_slopes: np.ndarray


def _wls(x, y, w):
    design = np.stack([x, np.ones_like(x)], axis=1)
    a = design.T @ (design * w[:, None])
    beta = np.linalg.solve(a, design.T @ (w * y))
    return beta, np.linalg.inv(a), design


def fit_log_correction(
    traj: MomentTrajectory, consts: ExpansionConstants, n_lo: int, n_hi: int, level: float = 0.95
) -> LogCorrectionFit:
    """Weighted least squares of ``n**2 (x_n - 1/(c1 n))`` against ``log n``.

    Weights are ``1/SE**2`` with the replicate standard error, floored at the
    rounding error of ``n**2 x_n`` (relative size ``n * eps``, since rounding
    accumulates over the recursion). Pool steps are correlated, so the slope
    uncertainty is the larger of the model SE and the spread of
    per-replicate slopes fitted with the same weights.
    """
    if not (1 <= n_lo < n_hi <= traj.n_max):
        raise InvalidOption(f"fit range [{n_lo}, {n_hi}] is outside 1..{traj.n_max}")
    n = np.arange(n_lo, n_hi + 1, dtype=np.float64)
    idx = np.arange(n_lo - 1, n_hi)
    x = traj.x[idx]
    y = n**2 * (x - 1.0 / (consts.c1 * n))
    # rounding in x_n accumulates over n recursion steps
    fp = 4.0 * np.finfo(float).eps * n * n**2 * x
    se = np.sqrt((n**2 * traj.x_se[idx]) ** 2 + fp**2)
    w = 1.0 / se**2
    logn = np.log(n)
    beta, cov, design = _wls(logn, y, w)
    resid = y - design @ beta
    chi2 = float(np.sum(w * resid**2) / max(1, n.size - 2))

    rep = []
    for r in range(traj.replicates):
        yr = n**2 * (traj.x_rep[r, idx] - 1.0 / (consts.c1 * n))
        rep.append(_wls(logn, yr, w)[0][0])
    rep = np.array(rep)
    rep_se = rep.std(ddof=1) / math.sqrt(rep.size)
    slope_se = float(max(math.sqrt(cov[0, 0]), rep_se))
    q = stats.t.ppf(0.5 + level / 2, df=rep.size - 1)
    slope = float(beta[0])
    signal = abs(slope) * (logn[-1] - logn[0])
    noise = float(np.median(n**2 * traj.x_se[idx]))
    return LogCorrectionFit(
        slope=slope,
        intercept=float(beta[1]),
        slope_se=slope_se,
        slope_ci=(slope - q * slope_se, slope + q * slope_se),
        n_lo=int(n_lo),
        n_hi=int(n_hi),
        noise_dominates=bool(noise > 0.5 * signal),
        chi2_dof=chi2,
        replicate_slopes=rep,
    )


@dataclass(frozen=True)
class LambdaRescaled:
    n: np.ndarray
    values: np.ndarray
    se: np.ndarray
    ratio_deviation: float
    monotone: bool

    @property
    def limit(self) -> float:
        return float(self.values[-1])


def lambda_rescaled_trajectory(traj: MomentTrajectory) -> LambdaRescaled:
    """``(lam/m)**n * x_n`` with a convergence diagnostic.

    ``ratio_deviation`` is the largest ``|v_{n+1}/v_n - 1|`` over the last
    quarter of steps; ``monotone`` is False if some step increases by more
    than 5 combined standard errors.
    """
    m = traj.off.m
    if not traj.lam > m:
        raise InvalidOption(f"lambda={traj.lam} must exceed m={m}")
    n = traj.steps
    scale = (traj.lam / m) ** n.astype(np.float64)
    values = scale * traj.x
    se = scale * traj.x_se
    start = max(0, n.size - max(2, n.size // 4))
    tail = values[start:]
    dev = float(np.max(np.abs(tail[1:] / tail[:-1] - 1.0)))
    rises = np.diff(values) - 5.0 * np.sqrt(se[1:] ** 2 + se[:-1] ** 2)
    # rounding in x_n accumulates over n recursion steps
    fp = 4.0 * np.finfo(float).eps * n[1:] * values[1:]
    return LambdaRescaled(n, values, se, dev, bool(np.all(rises <= fp)))


def n_doubling_bias(
    off: OffspringLaw,
    res: ResistanceLaw,
    size: int,
    replicates: int,
    n_max: int,
    lam: float | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Standardised gap ``(x_n(N) - x_n(2N)) / SE`` used to gauge resampling bias."""
    a = moment_trajectory(off, res, size, replicates, n_max, lam, seed)
    b = moment_trajectory(off, res, 2 * size, replicates, n_max, lam, derive_py(seed, 2))
    return (a.x - b.x) / np.sqrt(a.x_se**2 + b.x_se**2 + 1e-300)
