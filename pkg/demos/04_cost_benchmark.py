"""Desk-scale Monte Carlo comparison of the controller variants.

Runs a small seeded benchmark (10 trials) on the triple-mass-spring plant
with noisy data, prints the realized-cost table, and emits the trajectory
overlay.  The full 100-trial study behind the acceptance gate runs through
the same command:

    deepckit-bench benchmark --trials 100 --seed 12421 --out bench-out

Run:  python3 demos/04_cost_benchmark.py
"""

from deepckit import bench

cfg = bench.ExperimentConfig(
    trials=10,
    seed=12421,
    noise_var=0.01,
    lambda1=30.0,
    lambda2=30.0,
    lambda_y=100.0,
    out_dir="demos_out_benchmark",
)
path, rows = bench.cmd_benchmark(cfg)

print(f"{'variant':>14s} {'mean cost':>10s} {'vs model-based':>14s} {'failures':>9s}")
for row in rows:
    rate = "--" if row.variant == "ground-truth" else f"+{row.increase_rate_pct:.1f}%"
    print(f"{row.variant:>14s} {row.mean_cost:10.2f} {rate:>14s} {row.failures:9d}")
print(f"\nresults written next to {path}")
print("(the trajectory overlay and solve timings are in the same directory)")
