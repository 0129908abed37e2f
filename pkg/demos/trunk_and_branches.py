"""Trunk of the beam equation and the branches it meets.

Traces the trunk at N = 2 (M = 4) from small amplitude up to omega = 3.5,
lists every place where the curve reaches a rescaled trunk, and compares
those frequencies with the closed-form two-mode windows.

Run with ``python demos/trunk_and_branches.py``.
"""
import math

from wavebeam import branch_segments, branch_window, structure_census, sweep_trunk
from wavebeam.reducible import ModePair

N, NU = 2, 2

# %% trace the trunk, restarting past closed loops
pieces = sweep_trunk(N * N, N, NU, 3.5)
print(f"{len(pieces)} traced pieces, {sum(len(p) for p in pieces)} points")

# %% connections: the fundamental vanishes, u is a rescaled trunk
print("\n omega        energy      mode  two-mode window (omega)")
for om, e, kind, (m, n) in structure_census(pieces):
    lo, hi = branch_window(ModePair(m, n, NU))
    print(f"{om:9.6f} {e:12.4f}  ({m},{n})  [{math.sqrt(lo):.6f}, {math.sqrt(hi):.6f}]  {kind}")

# %% each branch as its own dataset
for seg in branch_segments(pieces):
    folds = seg.event_indices("fold")
    end = seg.points[-1]
    print(f"\n{seg.provenance}: {len(seg)} points, folds at omega "
          f"{[round(seg.points[i].omega, 4) for i in folds]}, "
          f"ends at omega = {end.omega:.6f} with u00 = {end.fundamental:.1e}")
