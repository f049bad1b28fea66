"""A small self-similar convergence study.

The ellipse x^2 + (y/2)^2 = 1 shrinks self-similarly under the elliptic
anisotropy, so the exact interface is known at every time.  The error first
falls with dt, then rises again once dt is too small for the grid to resolve
the motion of one step (the interface gets pinned).  Raise n to move the
optimum to smaller dt.
"""

import math

from anithresh.twophase import optimal_row, run_convergence

rows = run_convergence("bbc", [256], [2.0**-k for k in range(2, 9)], t_end=0.25)
print(f"{'dt':>10} {'steps':>6} {'error':>10} {'order':>7}")
for r in rows:
    print(f"{r.dt:10.6f} {r.steps:6d} {r.error:10.5f} {r.order:7.3f}")
best = optimal_row(rows)
print(f"optimal dt = 2^{math.log2(best.dt):.0f} with error {best.error:.5f}")
