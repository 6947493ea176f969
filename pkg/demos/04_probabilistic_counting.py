"""
Counting the population with a unique leader
============================================

The leader races two counters; it halts the first time the second catches
up with the first. How large is the first counter at that moment?
"""

import math

import numpy as np

from netcons.harness import ExperimentSpec, counting_success_rate, run_batch

n = 200
for b in (0, 1, 2, 4):
    spec = ExperimentSpec(protocol="counting-upper-bound", sizes=[n], reps=200, b=b, seed=11)
    results = run_batch(spec)
    r0 = np.array([r.leader_counters[0] for r in results])
    t = np.mean([r.total_interactions for r in results]) / (n * n * math.log(n))
    half = counting_success_rate(results, 0.5)
    most = counting_success_rate(results, 0.9)
    print(f"b={b}: median r0/n={np.median(r0) / n:.2f}  "
          f"P(r0>=n/2)={half.rate:.3f}  P(r0>=0.9n)={most.rate:.3f}  T/(n^2 ln n)={t:.2f}")
