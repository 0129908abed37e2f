"""Closed-form solutions of the reducible two-mode systems.

For a pair (m, n) with 2m + 1 < (2n + 1)**nu, the amplitudes of the
fundamental and of cos((2m+1)t) sin((2n+1)x) are explicit on an interval
of omega**2.  At its lower end the fundamental vanishes, at the upper end
the second mode does and the family meets the trunk.

Run with ``python demos/reducible_tree.py``.
"""
import math

from wavebeam import branch_window, two_mode_branch
from wavebeam.reducible import admissible_pairs

for nu in (1, 2):
    print(f"\nnu = {nu}")
    for pair in admissible_pairs(3, nu, m_max=3):
        lo, hi = branch_window(pair, exact=True)
        mid = math.sqrt((float(lo) + float(hi)) / 2)
        A, B = two_mode_branch(pair, mid).amplitudes
        print(f"  ({pair.m},{pair.n})  omega^2 in ({lo}, {hi})   "
              f"mid omega {mid:.4f}: A = {A:.4f}, B = {B:.4f}")
