"""
How the scheduler changes running time
======================================

The same protocol under the four schedulers. ``connection`` prefers
already-linked partners, the history schedulers prefer (or mostly ignore)
recent partners.
"""

from netcons.harness import ExperimentSpec, estimate_coefficient, run_batch

schedulers = ["random", "history", "reverse-history", "connection"]
for protocol, complexity in (("global-star", "n^2 log n"), ("cycle-cover", "n^2")):
    spec = ExperimentSpec(protocol=protocol, schedulers=schedulers, sizes=[150], reps=10, seed=3)
    report = estimate_coefficient(run_batch(spec), complexity)
    print(f"\n{protocol} at n=150, T/f(n):")
    for cell in sorted(report.cells, key=lambda c: c.coefficient):
        print(f"  {cell.scheduler:>16}  {cell.coefficient:.3f}")
