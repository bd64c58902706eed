"""Walk-forward replay: per-cycle retraining, budget cuts, and metrics.

Run:  python demos/03_walk_forward_replay.py
"""

from testprio import (
    RankerKind,
    ReplayConfig,
    SyntheticSpec,
    aggregate,
    average_suite_duration,
    generate_synthetic,
    walk_forward,
    walk_forward_budgets,
)

spec = SyntheticSpec(n_tests=25, n_cycles=80, base_failure_prob=0.3,
                     persistence=0.9, flip_prob=0.03)
history = generate_synthetic(spec, seed=3)
b5 = average_suite_duration(history)
print(f"average full-suite duration (B5): {b5:.1f}s")

# Replay the last 20% of cycles with the recency-weighted heuristic at a
# 40% budget: train on the window before each cycle, rank, cut, replay.
cfg = ReplayConfig(ranker=RankerKind.ROCKET, budget_s=0.4 * b5,
                   history_fraction=0.6)
outcomes = walk_forward(history, cfg)
for o in outcomes[:5]:
    m = o.metrics
    apfd = "-" if m.apfd is None else f"{m.apfd:.2f}"
    print(f"cycle {o.cycle_id}: executed {o.executed}/{len(o.ranking)} tests, "
          f"detected {o.faults_detected}/{o.faults_present} faults, APFD {apfd}")

summary = aggregate(outcomes)
print(f"\nmean APFD {summary.mean_apfd:.3f} over {summary.apfd_defined} fault cycles; "
      f"mean NAPFD {summary.mean_napfd:.3f}")

# The budget axis shares each cycle's ranking, so detected faults nest as
# the budget grows.
budgets = [0.2 * b5, 0.6 * b5, b5]
per_budget = walk_forward_budgets(history, cfg, budgets)
for budget, outs in zip(budgets, per_budget):
    s = aggregate(outs)
    print(f"budget {budget:6.1f}s: mean NAPFD {s.mean_napfd:.3f}, "
          f"mean TDFF {s.mean_tdff_pct and round(s.mean_tdff_pct, 1)}% of budget")
