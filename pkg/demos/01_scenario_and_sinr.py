"""
A cell-free network and its uplink SINR
=======================================

Drop access points and users on a wrap-around square, look at the
large-scale fading they see, and evaluate the closed-form uplink SINR
for a few power settings.
"""

import numpy as np

from cfpower import SystemParams, channel_stats, generate_scenario, se, sinr, sinr_coefficients

# Default system: 20 APs, 8 users on a 1 km square, orthogonal pilots.
params = SystemParams()
s = generate_scenario(params, seed=3)
print(f"K={s.K} users, L={s.L} APs, pilots {s.pilot_index.tolist()}")

# Large-scale fading in dB; each user is close to only a handful of APs.
beta_db = 10 * np.log10(s.beta)
print("strongest AP per user (dB):", np.round(beta_db.max(axis=1), 1))
print("median beta (dB):", round(float(np.median(beta_db)), 1))

# Channel-estimate quality: gamma is the variance of the LMMSE estimate.
stats = channel_stats(s, params)
print("estimate/true variance, best link per user:",
      np.round((stats.gamma / s.beta).max(axis=1), 3))

# SINR is a rational function of the power coefficients eta.
c = sinr_coefficients(stats, s, params.rho)
for label, eta in [("full power", np.ones(s.K)),
                   ("half power", np.full(s.K, 0.5)),
                   ("user 0 silent", np.r_[0.0, np.ones(s.K - 1)])]:
    sv = sinr(c, eta)
    print(f"{label:>14}: min SINR {sv.min():.3f}, sum SE {se(sv, params.tau_p, params.tau_c).sum():.2f} bit/s/Hz")
