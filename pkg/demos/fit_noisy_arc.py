"""Fit a curve to noisy samples of a half circle and inspect the result.

Shows the basic loop: build a weighted cloud, pick the penalties, minimize,
then check the fit against the a priori regularity and size bounds.
"""

import numpy as np

from elastic_avgdist import EnergyParams, FitConfig, WeightedPointCloud, minimize
from elastic_avgdist.analysis import bounds_check, node_masses, regularity_check

rng = np.random.default_rng(0)
t = rng.uniform(0, np.pi, 400)
points = np.c_[np.cos(t), np.sin(t)] + rng.normal(scale=0.05, size=(400, 2))
cloud = WeightedPointCloud(points, np.full(400, 1 / 400))

for eps in (1e-2, 1e-3):
    params = EnergyParams(lam=0.02, eps=eps, p=2.0)
    fit = minimize(cloud, params, FitConfig(n_nodes=64))
    reg = regularity_check(fit, cloud, params)
    bounds = bounds_check(fit, cloud, params)
    print(f"eps={eps:g}: converged={fit.converged} ({fit.stop_reason}, {fit.iterations} iterations)")
    print(f"  energy terms: {fit.breakdown.as_dict()}")
    print(f"  tangent Lipschitz {reg.discrete_lipschitz:.3f} vs bound Y {reg.Y:.1f}")
    print(f"  length {bounds.length:.3f} (bound {bounds.length_bound:.1f})")
    print(f"  largest mass on a single node: {node_masses(fit.curve, cloud).max():.4f}")
