"""
State census of random protocols
================================

Random total protocols started from a common state. For each run find the
longest stretch of interactions during which every state is held by at
least alpha * n nodes.
"""

import numpy as np

from netcons import random_protocol, run
from netcons.harness import census_window

n, alpha, length = 300, 0.1, 40
for k in (4, 5, 6):
    windows = []
    for s in range(10):
        r = run(random_protocol(k, s), n, detector="none", max_steps=length * n,
                seed=s, record_census=True)
        windows.append(census_window(r.census_trace, alpha, n).normalized)
    print(f"|Q|={k}: mean W/n = {np.mean(windows):.1f} over {len(windows)} protocols")
