"""
Hidden coefficients of the construction protocols
=================================================

Measure mean interaction counts over a few population sizes, divide by the
asymptotic rate and fit the exponent of the growth.
"""

from netcons.harness import ExperimentSpec, estimate_coefficient, run_batch

cases = [
    ("faster-global-line", "n^3", [40, 60, 80, 100]),
    ("global-star", "n^2 log n", [50, 100, 200]),
    ("cycle-cover", "n^2", [100, 200, 300]),
]

for protocol, complexity, sizes in cases:
    spec = ExperimentSpec(protocol=protocol, sizes=sizes, reps=10, seed=7)
    report = estimate_coefficient(run_batch(spec), complexity)
    print(f"\n{protocol}  f(n) = {complexity}")
    for cell in report.cells:
        print(f"  n={cell.n:<4} mean T={cell.mean:>12.0f}  T/f(n)={cell.coefficient:.3f}")
    fit = report.fits["random"]
    print(f"  fitted exponent {fit.alpha:.2f} (r^2 = {fit.r2:.3f})")
