"""Watch a corner form as the bending penalty goes to zero.

Three heavy atoms sit on a right angle. Without a bending cost the best curve
is the broken line through them; with a cost the corner is rounded, and the
peak curvature grows roughly like eps**(-1/2).
"""

import numpy as np

from elastic_avgdist import FitConfig, epsilon_sweep
from elastic_avgdist.datasets import corner

epsilons = np.logspace(-1, -4, 8)
sweep = epsilon_sweep(corner(weight=10.0), lam=2.0, p=1.0, epsilons=epsilons, config=FitConfig(n_nodes=1024))

print(f"{'eps':>10} {'max|kappa|':>12} {'energy':>10} {'w/o bending':>12}")
for pt in sweep:
    print(f"{pt.epsilon:10.2e} {pt.max_curvature:12.4f} {pt.total_energy:10.5f} {pt.energy_without_bending:12.5f}")

kappa = [pt.max_curvature for pt in sweep]
slope = np.polyfit(np.log(epsilons), np.log(kappa), 1)[0]
print(f"log-log slope of max|kappa| against eps: {slope:.3f} (regularity bound predicts -0.5)")
