"""
Drive the benchmark suite end to end and leave CSV/JSON results behind.

Writes to ./results: an estimator comparison on the aircraft model and the
mass-spring scaling table.  Point the companion plotting tool at the outputs:

    lqrplots render --panel f_gap --in results/aircraft_compare_seed0_*.csv --out fgap.png
    lqrplots render --panel relative_error --in results/scaling.csv --out scaling.png
"""

from pathlib import Path

from lqrkit.bench import BenchmarkSpec, compare_estimators, scaling_experiment


def main() -> None:
    out = Path("results")
    spec = BenchmarkSpec(family="aircraft", seed=0, max_iters=3000, theta=0.1)
    payload = compare_estimators(spec, out, baseline_factor=3)
    print("aircraft comparison:")
    for name in ("robust", "two_point"):
        summary = payload[name]
        print(
            f"  {name:>9}: {summary['iterations']:5d} iterations, "
            f"final gap {summary['final_f_gap']:.2e}, evals {summary['evaluations']}"
        )
    print("  gap-threshold crossings (iteration):")
    for threshold, crossing in payload["threshold_crossings"].items():
        print(f"    {float(threshold):.0e}: robust {crossing['robust']}, two_point {crossing['two_point']}")

    print("\nmass-spring scaling (fixed 300-iteration budget):")
    rows = scaling_experiment((1, 2, 3, 4), out / "scaling.csv", iteration_budget=300, seed=0)
    for row in rows:
        print(
            f"  g = {row['g']} (n = {row['dim']}): {row['estimator']:>9} "
            f"relative gap = {row['rel_f_gap']:.3e}"
        )
    print(f"\nresults written under {out.resolve()}")


if __name__ == "__main__":
    main()
