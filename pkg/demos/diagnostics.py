"""
Looking inside a run
====================

Consensus distance, client drift and correction quality along a K-GT run,
and the per-step drift inside one round.
"""

import numpy as np

from kgt import HyperParams, NoiseModel, build_ring, make_quadratic, run

problem = make_quadratic(n=10, d=10, zeta_bar=10.0, seed=0)
W = build_ring(10)
hp = HyperParams("kgt", K=10, eta_c=1e-3, eta_s=1.0, T=100)

recs = run(problem, NoiseModel(1.0, 0), hp, W, x0=np.ones(10), collect_local=True)

print("round  grad_norm_sq  consensus   drift       gamma       potential")
for r in recs[:-1:20]:
    print(f"{r.round:>5}  {r.grad_norm_sq:.3e}     {r.consensus:.3e}   {r.client_drift:.3e}   "
          f"{r.gamma:.3e}   {r.potential:.3e}")

# drift grows with every local step, then gossip pulls the nodes back together
print("per-step drift in round 50:", " ".join(f"{e:.2e}" for e in recs[50].drift_steps))
