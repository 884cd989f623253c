"""Dilating the data by r and rescaling the penalties dilates the minimizer by r.

With lam -> lam * r**(p-1) and eps -> eps * r**(p+1) every energy term picks
up the same factor r**p, so a refit started from the dilated curve stays put.
"""

import numpy as np

from elastic_avgdist import EnergyParams, FitConfig, WeightedPointCloud, curve_metric, minimize, total_energy
from elastic_avgdist.analysis import scaling_transform

cloud = WeightedPointCloud(np.random.default_rng(1).normal(size=(60, 2)) * [2.0, 0.6])
params = EnergyParams(lam=1.0, eps=0.2, p=1.5)
fit = minimize(cloud, params, FitConfig(n_nodes=48))

for r in (0.5, 2.0, 10.0):
    scaled_cloud, scaled_params = scaling_transform(cloud, params, r)
    e = total_energy(scaled_cloud, fit.curve.scaled(r), scaled_params).total
    refit = minimize(scaled_cloud, scaled_params, FitConfig(n_nodes=48), init=fit.curve.scaled(r))
    gap = curve_metric(refit.curve, fit.curve.scaled(r)) / (r * cloud.diameter)
    print(f"r={r:5}: energy ratio / r**p = {e / fit.breakdown.total / r ** params.p:.15f}, "
          f"Y ratio = {scaled_params.Y(scaled_cloud.diameter) / params.Y(cloud.diameter):.15f}, refit gap {gap:.1e}")
