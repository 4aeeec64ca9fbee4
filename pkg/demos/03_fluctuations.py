"""
Conductance and the martingale limit
====================================

Normalised by its mean, the conductance of a single tree tracks the
martingale W_n = #T_n / m**n. The deviation shrinks like log n / n, and
n times the deviation is compared with a truncated fluctuation series.
"""

from gw_electric import build_offspring_law, expansion_constants, two_point
from gw_electric.harness import theorem1_diagnostic, theorem4_variance_check
from gw_electric.tree import sample_batch, tree_seeds

off, res = build_offspring_law([1, 3], [0.5, 0.5]), two_point(0.5, 0.5, 1.5)
c1 = expansion_constants(off, res).c1
seeds = tree_seeds(7, 500)

batches = [sample_batch(off, res, n, seeds) for n in (4, 8, 12, 16)]
for d in theorem1_diagnostic(batches):
    print(f"n={d['n']:2d}  mean|{{C_n}} - W_n| = {d['mad']:.4f}   corr = {d['corr']:.4f}")

b = sample_batch(off, res, 18, seeds, fluct_truncation=12, c1=c1)
t = theorem4_variance_check(b)
print(f"\nn=18, L=12: mean n Y_n = {t['mean']:.3f} +- {t['se']:.3f}")
print(f"var(n Y_n) / var(series) = {t['ratio']:.3f}, correlation {t['corr']:.3f}")
