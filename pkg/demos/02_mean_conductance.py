"""
Mean conductance at large depth
===============================

Tree enumeration costs m**n, so the law of C_n is followed with a particle
pool instead. The mean x_n behaves like 1/(c1 n), and the second-order term
is a log n / n**2 correction with slope -c4/c1**2.
"""

import numpy as np

from gw_electric import build_offspring_law, deterministic, expansion_constants, point_mass, uniform
from gw_electric.pool import fit_log_correction, moment_trajectory

for off, res, label in (
    (deterministic(2), uniform(0.5, 1.5), "binary, xi ~ U(0.5, 1.5)"),
    (build_offspring_law([1, 2], [0.5, 0.5]), point_mass(1.0), "one or two children, xi = 1"),
):
    c = expansion_constants(off, res)
    traj = moment_trajectory(off, res, size=100_000, replicates=4, n_max=200, seed=1)
    n = traj.steps
    print(f"\n{label}: c1 = {c.c1:.6f}, 1/c1 = {1 / c.c1:.6f}, -c4/c1^2 = {c.log_slope:.6f}")
    for k in (10, 50, 100, 200):
        print(f"  n={k:3d}  n x_n = {k * traj.x[k - 1]:.5f} +- {k * traj.x_se[k - 1]:.5f}")

    # n^2 (x_n - 1/(c1 n)) grows like -c4/c1^2 * log n
    fit = fit_log_correction(traj, c, 30, 200)
    lo, hi = fit.slope_ci
    print(f"  fitted slope {fit.slope:.4f}, 95% CI [{lo:.4f}, {hi:.4f}], reference {c.log_slope:.4f}")

    # the normalised second and third moments settle on E[W^2] and c2
    print(f"  y_n/x_n^2 = {traj.y[-1] / traj.x[-1] ** 2:.4f} (limit {c.a1 / (1 - 1 / off.m):.4f})")
    print(f"  z_n/x_n^3 = {traj.z[-1] / traj.x[-1] ** 3:.4f} (limit {c.c2:.4f})")
    assert np.all(n * traj.x > 0)
