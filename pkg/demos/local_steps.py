"""
What local steps buy
====================

Predicted communication rounds for each method, then a small experiment on
a noise-dominated problem where more local steps reach the same accuracy in
fewer rounds.
"""

import numpy as np

from kgt import HyperParams, NoiseModel, RateInputs, all_rates, build_complete, make_quadratic, run
from kgt.runner import rounds_to_threshold

# predicted rounds (unit constants, so only ratios are meaningful); at this
# small eps the noise term leads and K-GT's count falls roughly as 1/K
for K in (1, 4, 16):
    rates = all_rates(RateInputs(sigma=1.0, n=10, K=K, p=0.24, eps=1e-7))
    print(f"K={K:>2}: " + "  ".join(f"{v}={r:.3g}" for v, r in rates.items()))

# zero heterogeneity, unit noise, exact averaging: the noise term dominates
problem = make_quadratic(n=10, d=10, zeta_bar=0.0)
W = build_complete(10)
x0 = np.ones(10)
eps = 3e-4
for K in (4, 16):
    recs = run(problem, NoiseModel(1.0, 0), HyperParams("kgt", K, 1e-3, 1.0, 1500), W, x0)
    print(f"K={K:>2}: first round with grad_norm_sq <= {eps}: "
          f"{rounds_to_threshold(recs, 'grad_norm_sq', eps)}")
