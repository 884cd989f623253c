"""When is a circle of data better described by a loop than by a diameter?

Compares the energy of the inscribed loop with that of a diameter for data
spread evenly on a circle of radius r, and locates the radius where the loop
starts to win.
"""

import numpy as np

from elastic_avgdist.analysis import circle_vs_segment, crossover_radius

lam, eps = 0.1, 1e-3
print(f"{'r':>8} {'loop':>10} {'diameter':>10}   cheaper")
for r in np.geomspace(0.02, 2.0, 9):
    rep = circle_vs_segment(r, lam, eps)
    best = "loop" if rep.E_circle < rep.E_segment else "diameter"
    print(f"{r:8.3f} {rep.E_circle:10.5f} {rep.E_segment:10.5f}   {best}")

for norm, label in (("hausdorff", "data mass 2 pi r"), ("probability", "unit data mass")):
    r0 = crossover_radius(lam, eps, norm)
    r4 = crossover_radius(lam, 4 * eps, norm)
    print(f"{label}: crossover at r={r0:.4f}; quadrupling eps moves it by a factor {r4 / r0:.3f}")
