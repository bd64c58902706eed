"""The full benchmark grid: rankers x history sizes x budgets.

Run:  python demos/04_benchmark_grid.py          (about a minute)
"""

from pathlib import Path

from testprio import RankerKind, SyntheticSpec, generate_synthetic
from testprio.bench import GridSpec, emit_report, run_grid, select_best_history
from testprio.rankers import (
    AnnParams,
    GbdtParams,
    LrnParams,
    RandomParams,
    RocketParams,
    SvmParams,
)

history = generate_synthetic(
    SyntheticSpec(n_tests=20, n_cycles=60, base_failure_prob=0.3,
                  persistence=0.9, flip_prob=0.03),
    seed=11,
)

# Reduced training effort keeps the demo quick; drop the overrides for a
# full-fidelity run.
spec = GridSpec(rankers=(
    (RankerKind.RANDOM, RandomParams()),
    (RankerKind.ROCKET, RocketParams()),
    (RankerKind.SVM, SvmParams(epochs=10)),
    (RankerKind.ANN, AnnParams(epochs=10, restarts=3)),
    (RankerKind.GBDT, GbdtParams(n_estimators=25)),
    (RankerKind.LRN, LrnParams(epochs=10, restarts=3)),
))

result = run_grid(history, spec, workers=2)
print(f"computed {len(result.cells)} cells "
      f"({len(result.ranker_names)} rankers x 5 history sizes x 5 budgets)")

print("\nmean APFD at the full budget, by history fraction:")
header = "ranker   " + "".join(f"   H{i+1}" for i in range(5))
print(header)
for ranker in result.ranker_names:
    row = [result.cell(ranker, h, 4).mean_apfd for h in range(5)]
    cells = "".join(f"  {v:.2f}" if v is not None else "     -" for v in row)
    best = select_best_history(result, ranker)
    print(f"{ranker:8s}{cells}   (best: H{best + 1})")

out_dir = Path("demo-grid-report")
paths = emit_report(result, out_dir)
print("\nreports written:")
for name in sorted(paths):
    print(" ", paths[name])
