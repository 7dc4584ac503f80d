"""
Classical power control against a brute-force grid
===================================================

Bisection for max-min fairness and projected gradient ascent for the
sum-rate and product objectives, checked against exhaustive search on a
two-user instance.
"""

import numpy as np

from cfpower import SystemParams, brute_force, generate_scenario, solve_maxmin, solve_weighted
from cfpower.metrics import coefficients_from_beta, sinr

params = SystemParams(num_ues=2, num_aps=5)
s = generate_scenario(params, seed=11)
c = coefficients_from_beta(s.beta, s.pilot_xcorr, params)

r = solve_maxmin(c)
g = brute_force(c, "maxmin", grid_step=0.01)
print(f"max-min  bisection t={r.objective_value:.5f} eta={np.round(r.eta, 4)} ({r.iterations} steps)")
print(f"         grid      t={g.objective_value:.5f} eta={g.eta}")
print("         SINRs at the bisection point are balanced:", np.round(sinr(c, r.eta), 5))

for kind in ("sum_rate", "product"):
    r = solve_weighted(c, kind)
    g = brute_force(c, kind, grid_step=0.01)
    print(f"{kind:>8} ascent {r.objective_value:.5f} eta={np.round(r.eta, 4)}  "
          f"grid {g.objective_value:.5f} eta={g.eta}  kkt {r.info['kkt_residual']:.1e}")

# Larger instances are out of reach for the grid but not for the solvers.
params = SystemParams(num_ues=20, num_aps=50)
s = generate_scenario(params, seed=12)
c = coefficients_from_beta(s.beta, s.pilot_xcorr, params)
for kind in ("sum_rate", "product"):
    r = solve_weighted(c, kind)
    print(f"K=20 {kind}: objective {r.objective_value:.3f} in {r.wall_time:.2f} s, "
          f"{np.sum(r.eta > 0.99)} users at full power")
