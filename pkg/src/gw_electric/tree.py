"""Streaming Galton--Watson tree engine.

A tree of depth ``n`` is grown and reduced in one iterative depth-first pass.
Only the current root-to-vertex path is held in memory (one frame per
depth), so a tree with billions of vertices needs ``O(n)`` storage.

For a vertex ``x`` at depth ``d`` the pass maintains the normalised
conductance ``C^(x) = m**d * C(x <-> T_n[x])``, which obeys

    C^(x) = m**-1 * sum_children C^(y) / (1 + xi_y * C^(y)),

with a child at depth ``n`` contributing ``1 / xi_y``. Alongside it the pass
collects the level-``n`` subtree counts ``#T_n[x]``, the per-level sums for
the Nash-Williams bound, the energy of the uniform unit flow
``Theta(x) = #T_n[x] / #T_n`` and, optionally, the truncated fluctuation
series built from ``W^(x) ~ m**(|x|-n) #T_n[x]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .errors import DepthOverflow, InvalidOption, TruncationTooDeep
from .laws import OffspringLaw, ResistanceLaw
from .rng import child_key, derive_py, draw_offspring, draw_xi, tree_key, uniform01, xi_inverse

DEFAULT_NODE_BUDGET = 2**32


@dataclass(frozen=True)
class TreeObservables:
    depth: int
    c_n: float
    w_hat: float
    pop_n: int
    thomson_upper: float
    nash_williams_lower: float
    fluct_series: float | None
    seed: int

    @property
    def r_n(self) -> float:
        return 1.0 / self.c_n


@dataclass(frozen=True)
class TreeBatch:
    """Observables of many independent trees at one depth, as arrays."""

    depth: int
    m: float
    seeds: np.ndarray
    c_n: np.ndarray
    pop_n: np.ndarray
    thomson_upper: np.ndarray
    nash_williams_lower: np.ndarray
    fluct_series: np.ndarray | None

    @property
    def w_hat(self) -> np.ndarray:
        return self.pop_n / self.m**self.depth

    @property
    def r_n(self) -> np.ndarray:
        return 1.0 / self.c_n

    def __len__(self) -> int:
        return self.c_n.shape[0]

    def observables(self, i: int) -> TreeObservables:
        return TreeObservables(
            depth=self.depth,
            c_n=float(self.c_n[i]),
            w_hat=float(self.w_hat[i]),
            pop_n=int(self.pop_n[i]),
            thomson_upper=float(self.thomson_upper[i]),
            nash_williams_lower=float(self.nash_williams_lower[i]),
            fluct_series=None if self.fluct_series is None else float(self.fluct_series[i]),
            seed=int(self.seeds[i]),
        )


@njit(cache=True, inline="always")
def _kahan_add(total, comp, k, value):
    t = total[k] + value
    if abs(total[k]) >= abs(value):
        comp[k] += (total[k] - t) + value
    else:
        comp[k] += (value - t) + total[k]
    total[k] = t


@njit(cache=True)
def _traverse(key0, support, cdf, family, params, n, m, trunc, c1):
    """One tree: returns (C_n, #T_n, flow energy, series, Nash-Williams bound).

    Frame ``d`` of the explicit stack holds the open vertex at depth ``d``.
    A frame at depth ``n - 2`` reduces all of its children and grandchildren
    in one loop, which keeps frame traffic off the most numerous vertices.
    Energies are summed per subtree so rounding grows with depth, not with
    tree size.
    """
    mpow = np.empty(n + 1)
    minv = np.empty(n + 1)
    for d in range(n + 1):
        mpow[d] = m**d
        minv[d] = m ** (-d)
    keys = np.empty(n + 1, dtype=np.uint64)
    nchild = np.empty(n + 1, dtype=np.int64)
    nxt = np.empty(n + 1, dtype=np.int64)
    csum = np.zeros(n + 1)
    cnt = np.zeros(n + 1, dtype=np.int64)
    en = np.zeros(n + 1)
    xis = np.zeros(n + 1)
    level = np.zeros(n + 1)
    comp = np.zeros(n + 1)
    nsup = support.shape[0]
    inv_m = 1.0 / m

    series = 0.0
    d = 0
    keys[0] = key0
    nchild[0] = draw_offspring(key0, support, cdf)
    nxt[0] = 0
    while True:
        if d == n - 2 and nxt[d] < nchild[d]:
            # every child of this frame sits at depth n - 1: reduce them and
            # their leaves in one pass with scalar accumulators
            cd = n - 1
            acc_c = 0.0
            acc_e = 0.0
            acc_k = 0
            lv1 = 0.0
            lv2 = 0.0
            ser = 0.0
            for ci in range(nchild[d]):
                ck = child_key(keys[d], ci)
                xi = draw_xi(ck, family, params, 1)
                lv1 += xi_inverse(xi, family, params)
                k = support[0]
                if nsup > 1:
                    u = uniform01(ck, 0)
                    k = support[nsup - 1]
                    for j in range(nsup):
                        if u < cdf[j]:
                            k = support[j]
                            break
                s = 0.0
                e = 0.0
                if family == 0:
                    # point mass: leaf edges need no key
                    for i in range(k):
                        s += params[3]
                        e += params[0]
                else:
                    for i in range(k):
                        lx = draw_xi(child_key(ck, i), family, params, 1)
                        s += xi_inverse(lx, family, params)
                        e += lx
                lv2 += s
                c = s * inv_m
                fk = float(k)
                acc_e += e * mpow[n] + mpow[cd] * xi * fk * fk
                if cd <= trunc:
                    w = fk * minv[1]
                    ser += minv[cd] * w * (1.0 - xi * w / c1)
                acc_c += c / (1.0 + xi * c)
                acc_k += k
            _kahan_add(level, comp, cd, lv1)
            _kahan_add(level, comp, n, lv2)
            csum[d] += acc_c
            en[d] += acc_e
            cnt[d] += acc_k
            series += ser
            nxt[d] = nchild[d]
        elif nxt[d] < nchild[d]:
            ck = child_key(keys[d], nxt[d])
            nxt[d] += 1
            xi = draw_xi(ck, family, params, 1)
            eta = xi_inverse(xi, family, params)
            cd = d + 1
            _kahan_add(level, comp, cd, eta)
            if cd == n:
                csum[d] += eta
                cnt[d] += 1
                en[d] += mpow[n] * xi
            else:
                d = cd
                keys[d] = ck
                xis[d] = xi
                nchild[d] = draw_offspring(ck, support, cdf)
                nxt[d] = 0
                csum[d] = 0.0
                cnt[d] = 0
                en[d] = 0.0
        else:
            if d == 0:
                break
            c = csum[d] * inv_m
            xi = xis[d]
            k = cnt[d]
            fk = float(k)
            en[d - 1] += en[d] + mpow[d] * xi * fk * fk
            if d <= trunc:
                w = fk * minv[n - d]
                series += minv[d] * w * (1.0 - xi * w / c1)
            csum[d - 1] += c / (1.0 + xi * c)
            cnt[d - 1] += k
            d -= 1

    pop = cnt[0]
    nw = 0.0
    for k in range(1, n + 1):
        nw += 1.0 / ((level[k] + comp[k]) * minv[k])
    return csum[0] / m, pop, en[0] / (float(pop) * float(pop)), series, nw


@njit(cache=True, parallel=True)
def _traverse_many(keys, support, cdf, family, params, n, m, trunc, c1):
    t = keys.shape[0]
    c_out = np.empty(t)
    pop_out = np.empty(t, dtype=np.int64)
    th_out = np.empty(t)
    fl_out = np.empty(t)
    nw_out = np.empty(t)
    for i in prange(t):
        c, pop, th, fl, nw = _traverse(keys[i], support, cdf, family, params, n, m, trunc, c1)
        c_out[i] = c
        pop_out[i] = pop
        th_out[i] = th
        fl_out[i] = fl
        nw_out[i] = nw
    return c_out, pop_out, th_out, fl_out, nw_out


@njit(cache=True)
def _traverse_nested(key0, support, cdf, family, params, n, m):
    """All of C_1..C_n and #T_1..#T_n on a single tree.

    ``acc[d, k]`` accumulates, for the open vertex at depth ``d``, the sum over
    its children of the series-reduced term towards target level ``k``.
    As in :func:`_traverse`, a frame at depth ``n - 2`` reduces its children
    and their leaves in one loop.
    """
    keys = np.empty(n, dtype=np.uint64)
    nchild = np.empty(n, dtype=np.int64)
    nxt = np.empty(n, dtype=np.int64)
    xis = np.empty(n)
    acc = np.zeros((n, n + 1))
    pops = np.zeros(n + 1, dtype=np.int64)
    nsup = support.shape[0]
    inv_m = 1.0 / m
    d = 0
    keys[0] = key0
    nchild[0] = draw_offspring(key0, support, cdf)
    nxt[0] = 0
    while True:
        if d == n - 2 and nxt[d] < nchild[d]:
            acc_1 = 0.0
            acc_c = 0.0
            leaves = 0
            for ci in range(nchild[d]):
                ck = child_key(keys[d], ci)
                xi = draw_xi(ck, family, params, 1)
                acc_1 += xi_inverse(xi, family, params)
                k = support[0]
                if nsup > 1:
                    u = uniform01(ck, 0)
                    k = support[nsup - 1]
                    for j in range(nsup):
                        if u < cdf[j]:
                            k = support[j]
                            break
                s = 0.0
                if family == 0:
                    for i in range(k):
                        s += params[3]
                else:
                    for i in range(k):
                        s += xi_inverse(draw_xi(child_key(ck, i), family, params, 1), family, params)
                c = s * inv_m
                acc_c += c / (1.0 + xi * c)
                leaves += k
            acc[d, n - 1] += acc_1
            acc[d, n] += acc_c
            pops[n - 1] += nchild[d]
            pops[n] += leaves
            nxt[d] = nchild[d]
        elif nxt[d] < nchild[d]:
            ck = child_key(keys[d], nxt[d])
            nxt[d] += 1
            xi = draw_xi(ck, family, params, 1)
            pops[d + 1] += 1
            acc[d, d + 1] += xi_inverse(xi, family, params)
            if d + 1 < n:
                d += 1
                keys[d] = ck
                xis[d] = xi
                nchild[d] = draw_offspring(ck, support, cdf)
                nxt[d] = 0
                for k in range(d + 1, n + 1):
                    acc[d, k] = 0.0
        else:
            if d == 0:
                break
            xi = xis[d]
            for k in range(d + 1, n + 1):
                c = acc[d, k] * inv_m
                acc[d - 1, k] += c / (1.0 + xi * c)
            d -= 1
    out = np.empty(n + 1)
    out[0] = np.inf
    for k in range(1, n + 1):
        out[k] = acc[0, k] * inv_m
    return out, pops


def _law_arrays(off: OffspringLaw, res: ResistanceLaw):
    return off.support_array(), off.cdf_array(), res.code, res.params_array()


def projected_nodes(off: OffspringLaw, n: int) -> float:
    """Expected number of vertices of a depth-``n`` tree."""
    m = off.m
    return (m ** (n + 1) - 1.0) / (m - 1.0)


def _check_options(off, n, fluct_truncation, c1, node_budget):
    if int(n) != n or n < 1:
        raise InvalidOption(f"depth must be a positive integer, got {n!r}")
    if fluct_truncation is not None:
        if fluct_truncation < 1:
            raise InvalidOption("fluctuation truncation must be at least 1")
        if fluct_truncation >= n:
            raise TruncationTooDeep(f"truncation L={fluct_truncation} must be below depth n={n}")
        if c1 is None or not c1 > 0:
            raise InvalidOption("the fluctuation series needs c1 > 0")
    nodes = projected_nodes(off, n)
    if nodes > node_budget:
        raise DepthOverflow(
            f"depth {n} projects {nodes:.3g} vertices per tree, over the budget {node_budget:.3g}"
        )


def tree_seeds(master_seed: int, count: int, start: int = 0) -> np.ndarray:
    """Per-tree seeds ``hash(master_seed, i)`` for ``i`` in ``start..start+count-1``."""
    return np.array([derive_py(master_seed, i) for i in range(start, start + count)], dtype=np.uint64)


def sample_tree_observables(
    off: OffspringLaw,
    res: ResistanceLaw,
    n: int,
    seed: int,
    fluct_truncation: int | None = None,
    c1: float | None = None,
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> TreeObservables:
    """Grow one tree of depth ``n`` from ``seed`` and reduce it."""
    batch = sample_batch(off, res, n, np.array([seed], dtype=np.uint64), fluct_truncation, c1, node_budget)
    return batch.observables(0)


def sample_batch(
    off: OffspringLaw,
    res: ResistanceLaw,
    n: int,
    seeds,
    fluct_truncation: int | None = None,
    c1: float | None = None,
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> TreeBatch:
    """Reduce one tree per seed; trees are processed in parallel.

    Each tree is a pure function of its seed, so results do not depend on the
    number of threads.
    """
    _check_options(off, n, fluct_truncation, c1, node_budget)
    seeds = np.asarray(seeds, dtype=np.uint64)
    keys = np.array([tree_key(int(s)) for s in seeds], dtype=np.uint64)
    support, cdf, fam, params = _law_arrays(off, res)
    trunc = 0 if fluct_truncation is None else int(fluct_truncation)
    c, pop, th, fl, nw = _traverse_many(
        keys, support, cdf, fam, params, int(n), float(off.m), trunc, float(c1 or 1.0)
    )
    return TreeBatch(
        depth=int(n),
        m=off.m,
        seeds=seeds,
        c_n=c,
        pop_n=pop,
        thomson_upper=th,
        nash_williams_lower=nw,
        fluct_series=fl if fluct_truncation is not None else None,
    )


def nested_conductances(
    off: OffspringLaw,
    res: ResistanceLaw,
    n: int,
    seed: int,
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(C_k, #T_k)`` for ``k = 0..n`` on one tree (``C_0 = inf``, ``#T_0 = 1``)."""
    _check_options(off, n, None, None, node_budget)
    support, cdf, fam, params = _law_arrays(off, res)
    c, pops = _traverse_nested(tree_key(int(seed)), support, cdf, fam, params, int(n), float(off.m))
    pops[0] = 1
    return c, pops


def nash_williams(level_sums) -> float:
    """Cutset lower bound ``sum_k 1 / level_sum_k`` on the resistance.

    ``level_sums[k-1]`` is ``sum_{|x|=k} m**-k / xi_x``, the total conductance
    of the edges at depth ``k``.
    """
    s = np.asarray(level_sums, dtype=np.float64)
    return float(np.sum(1.0 / s))


def thomson_upper(counts, xis, depths, m: float) -> float:
    """Energy of the uniform unit flow ``#T_n[x] / #T_n`` over the edges into ``x``.

    ``counts``, ``xis`` and ``depths`` describe every non-root vertex. Any unit
    flow bounds the effective resistance from above.
    """
    counts = np.asarray(counts, dtype=np.float64)
    depths = np.asarray(depths)
    total = counts[depths == 1].sum()
    theta = counts / total
    return float(np.sum(m ** depths.astype(np.float64) * np.asarray(xis) * theta**2))


def fluct_series(counts, xis, depths, m: float, n: int, truncation: int, c1: float) -> float:
    """Truncated fluctuation series with ``W^(x)`` estimated by ``m**(|x|-n) #T_n[x]``."""
    if truncation >= n:
        raise TruncationTooDeep(f"truncation L={truncation} must be below depth n={n}")
    depths = np.asarray(depths)
    sel = (depths >= 1) & (depths <= truncation)
    d = depths[sel].astype(np.float64)
    w = np.asarray(counts, dtype=np.float64)[sel] * m ** (d - n)
    xi = np.asarray(xis, dtype=np.float64)[sel]
    return float(np.sum(m**-d * w * (1.0 - xi * w / c1)))


@dataclass(frozen=True)
class TreeRealization:
    """Explicit small tree: vertex 0 is the root; arrays are indexed by vertex."""

    n: int
    m: float
    parent: np.ndarray
    depth: np.ndarray
    xi: np.ndarray
    counts: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.parent.shape[0]

    def resistances(self) -> np.ndarray:
        """Resistance ``m**d * xi`` of the edge into each non-root vertex."""
        return self.m ** self.depth[1:].astype(np.float64) * self.xi[1:]

    def to_network(self):
        from .oracles import ExplicitNetwork

        v = np.arange(1, self.n_vertices)
        edges = np.stack([self.parent[1:], v], axis=1)
        sinks = tuple(int(i) for i in np.flatnonzero(self.depth == self.n))
        return ExplicitNetwork(self.n_vertices, edges, self.resistances(), 0, sinks)


def export_tree(
    off: OffspringLaw, res: ResistanceLaw, n: int, seed: int, max_vertices: int = 200_000
) -> TreeRealization:
    """Materialise the tree that :func:`sample_tree_observables` streams for ``seed``."""
    if projected_nodes(off, n) > max_vertices:
        raise DepthOverflow("tree too large to materialise")
    support, cdf, fam, params = _law_arrays(off, res)
    parent = [-1]
    depth = [0]
    xis = [math.nan]
    keys = [tree_key(int(seed))]
    frontier = [0]
    for d in range(1, n + 1):
        nxt = []
        for v in frontier:
            for i in range(int(draw_offspring(keys[v], support, cdf))):
                ck = np.uint64(child_key(keys[v], np.int64(i)))
                parent.append(v)
                depth.append(d)
                xis.append(float(draw_xi(ck, fam, params, 1)))
                keys.append(ck)
                nxt.append(len(parent) - 1)
                if len(parent) > max_vertices:
                    raise DepthOverflow("tree too large to materialise")
        frontier = nxt
    parent_a = np.array(parent, dtype=np.int64)
    depth_a = np.array(depth, dtype=np.int64)
    counts = (depth_a == n).astype(np.int64)
    for v in range(len(parent) - 1, 0, -1):
        counts[parent_a[v]] += counts[v]
    return TreeRealization(n, off.m, parent_a, depth_a, np.array(xis), counts)
