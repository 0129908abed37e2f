"""Linear stability along the beam trunk at N = 2.

The trunk is stable at small amplitude.  Near omega = 2.3 a short stretch
loses stability; the scan below brackets it.

Run with ``python demos/trunk_stability.py``.
"""
import numpy as np

from wavebeam import classify_point, trunk_seed

for om in np.arange(2.20, 2.46, 0.02):
    p = trunk_seed(4, 2, 2, float(om))
    res = classify_point(p)
    print(f"omega {om:5.2f}  E {p.energy:7.3f}  {res.verdict:9s} max | |lambda| - 1 | = "
          f"{res.max_deviation:.1e}")
