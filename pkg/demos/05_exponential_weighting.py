"""
Exponentially weighted resistances
==================================

With resistance lam**d * xi and lam > m the network stops being critical:
x_n decays like (m/lam)**n and the rescaled sequence (lam/m)**n x_n has a
positive limit below E[1/xi]. For binary trees with xi = 1 the limit is
1 - 2/lam.
"""

from gw_electric import build_offspring_law, deterministic, point_mass
from gw_electric.pool import lambda_rescaled_trajectory, moment_trajectory

for lam in (3.0, 4.0, 8.0):
    t = moment_trajectory(deterministic(2), point_mass(1.0), 1000, 4, 60, lam=lam)
    r = lambda_rescaled_trajectory(t)
    print(f"binary, lam={lam:g}: limit {r.limit:.6f}, closed form {1 - 2 / lam:.6f}")

off = build_offspring_law([1, 2], [0.5, 0.5])
t = moment_trajectory(off, point_mass(1.0), 100_000, 4, 60, lam=2.0, seed=1)
r = lambda_rescaled_trajectory(t)
print(f"one or two children, lam=2: limit {r.limit:.5f}, last-quarter ratio deviation {r.ratio_deviation:.1e}")
