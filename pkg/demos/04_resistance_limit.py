"""
Resistance per level and the tail of 1/W
========================================

When p1 * m < 1, E[R_n]/n tends to c1 E[1/W]. For one or two children with
equal odds, P(W < e) decays like e**1.71, so 1/W has infinite variance and
sample means of R_n/n over a hundred trees scatter widely.
"""

import math

import numpy as np

from gw_electric import build_offspring_law, expansion_constants, point_mass
from gw_electric.harness import estimate_inverse_w
from gw_electric.tree import sample_batch, tree_seeds

off, res = build_offspring_law([1, 2], [0.5, 0.5]), point_mass(1.0)
c1 = expansion_constants(off, res).c1
alpha = math.log(1 / off.p1) / math.log(off.m)
print(f"p1 m = {off.p1 * off.m:.2f}, tail index of 1/W = {alpha:.3f}")

inv_w = estimate_inverse_w(off, depth=25, trees=20_000, seed=3)
print(f"E[1/W] estimate {inv_w.value:.4f} +- {inv_w.se:.4f} ({inv_w.note})")

# per tree, R_n/n approaches c1 / W_n
b = sample_batch(off, res, 30, tree_seeds(808, 100))
ratio = b.r_n / 30 * b.w_hat / c1
print(f"\nmedian of (R_n/n) W_n / c1 over 100 trees at n=30: {np.median(ratio):.3f}")
print(f"mean R_n/n = {np.mean(b.r_n / 30):.4f}, c1 mean(1/W_n) = {c1 * np.mean(1 / b.w_hat):.4f}")

# the spread of 100-tree means of 1/W_n from independent generation sizes
rng = np.random.default_rng(0)
means = []
for _ in range(400):
    z = np.ones(100, dtype=np.int64)
    for _ in range(25):
        z = z + rng.binomial(z, 0.5)
    means.append(np.mean(off.m**25 / z))
q = np.quantile(means, [0.05, 0.5, 0.95])
print(f"100-tree means of 1/W_25: 5% {q[0]:.3f}, median {q[1]:.3f}, 95% {q[2]:.3f}")
