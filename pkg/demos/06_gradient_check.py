"""
Checking backpropagation through the SINR
=========================================

Compare the hand-written gradients of every loss with central finite
differences, end to end from network parameters to loss.
"""

import numpy as np

from cfpower import LossSpec, SystemParams, aggregate_lsf, generate_scenario, init_mlp
from cfpower.gradcheck import end_to_end_check
from cfpower.metrics import coefficients_from_beta

params = SystemParams(num_ues=4, num_aps=10)
s = generate_scenario(params, seed=8)
c = coefficients_from_beta(s.beta, s.pilot_xcorr, params)
B = aggregate_lsf(s.beta)

# Centre the features on the mean over users. Using each user's own value
# would feed exact zeros, putting every ReLU on its kink.
logB = np.log10(B)
m = init_mlp((4, 12, 8, 4), seed=1)
m = m.with_norm_stats(np.full(4, logB.mean()), np.full(4, logB.std()))
for kind in ("maxmin", "maxmin_prior", "sum_rate", "product"):
    err = end_to_end_check(m, LossSpec(kind), B, c)
    print(f"{kind:>12}: relative error {err:.1e} over {m.n_params} parameters")
