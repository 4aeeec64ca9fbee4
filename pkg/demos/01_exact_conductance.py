"""
Exact conductance of a branching network
========================================

A Galton-Watson tree whose depth-d edges carry resistance m**d * xi is
reduced to its root-to-level conductance C_n in one streaming pass. Small
trees are cross-checked against a Kirchhoff solve, series-parallel
reduction and a random walk.
"""

import numpy as np

from gw_electric import build_offspring_law, deterministic, point_mass, two_point
from gw_electric.oracles import effective_resistance_laplacian, random_walk_conductance, series_parallel_reduce
from gw_electric.tree import export_tree, nested_conductances, sample_tree_observables

# the symmetric binary tree with unit factors: each level adds one unit of
# resistance in series, so C_n = 1/n
for n in (1, 5, 20):
    obs = sample_tree_observables(deterministic(2), point_mass(1.0), n, seed=0)
    print(f"binary n={n:2d}  C_n={obs.c_n:.15f}  1/n={1 / n:.15f}")

# a random tree: one child or two with equal odds, xi = 0.5 or 1.5
off, res = build_offspring_law([1, 2], [0.5, 0.5]), two_point(0.5, 0.5, 1.5)
seed, n = 2024, 5
obs = sample_tree_observables(off, res, n, seed)
net = export_tree(off, res, n, seed).to_network()
print(f"\nrandom tree, n={n}, {net.n_vertices} vertices, {obs.pop_n} leaves")
print(f"  recursion        R_n = {obs.r_n:.12f}")
print(f"  Kirchhoff solve  R_n = {effective_resistance_laplacian(net):.12f}")
print(f"  series-parallel  R_n = {series_parallel_reduce(net):.12f}")
walk = random_walk_conductance(net, 200_000, seed=1)
print(f"  random walk      C_n = {walk.conductance:.5f} +- {walk.se:.5f} (exact {obs.c_n:.5f})")

# flows and cutsets bracket the resistance on every realisation
print(f"  Nash-Williams {obs.nash_williams_lower:.5f} <= R_n {obs.r_n:.5f} <= Thomson {obs.thomson_upper:.5f}")

# growing the same tree deeper only adds resistance
c, pops = nested_conductances(off, res, 15, seed)
print("\nC_k on one tree, k = 1..15:")
print(np.array2string(c[1:], precision=4, max_line_width=78))
assert np.all(np.diff(c[1:]) <= 0)
