"""Equilibrium of a particle on a substrate, without any evolution.

Solves Young's condition for the tilted four-fold anisotropy and builds the
equal-area Winterbottom shape.  The polygon is written to a CSV that can be
plotted over the simulated interface of the particle-on-substrate preset.
"""

import csv
import os
from pathlib import Path

from anithresh.anisotropy import CosineSeries, polygon_area, solve_young, winterbottom_shape

out = Path(os.environ.get("ANITHRESH_OUTPUT_ROOT", "anithresh-runs")) / "demo-winterbottom"
out.mkdir(parents=True, exist_ok=True)

tilted = CosineSeries(((0.05, 4, 8.0),))
left, right = solve_young(tilted, 1.0, 1.1).degrees
print(f"tilted four-fold, gamma_SP=1, gamma_SV=1.1: contact angles {left:.2f} / {right:.2f} deg")

four = CosineSeries(((0.05, 4, 0.0),))
left, right = solve_young(four, 1.5, 1.0).degrees
poly = winterbottom_shape(four, 1.5, 1.0, 6.25)
print(f"four-fold, gamma_SP=1.5, gamma_SV=1: contact angles {left:.2f} / {right:.2f} deg")
print(f"Winterbottom polygon: {len(poly)} vertices, area {polygon_area(poly):.6f}")
with (out / "winterbottom.csv").open("w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["x", "y"])
    w.writerows(poly.tolist())
print(f"written to {out / 'winterbottom.csv'}")
