"""Walk-forward CI replay.

For each evaluation cycle: slice the most recent fraction of the *prior*
cycles into a training window, fit the configured ranker (when it trains),
rank the cycle's tests, cut the ranking at the time budget, and replay the
recorded verdicts of that cycle against the executed prefix.

Leakage rules: training windows, feature inputs, tie-break durations and
budget-cut durations are all derived exclusively from cycles before the
evaluated one.  The evaluated cycle contributes only its replayed verdicts
(and its test list).  A test never seen before is ranked with zero history
features and the prior mean duration as its duration estimate.

Timing: ``train_seconds`` / ``rank_seconds`` are a deterministic work-based
cost model (counted arithmetic operations divided by a nominal op rate), so
replays and grid reports are bit-reproducible across runs, worker counts
and machines.  Wall-clock measurements are captured alongside in
``wall_train_seconds`` / ``wall_rank_seconds``; they are informational and
excluded from outcome comparison and report serialization.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .domain import Cycle, HistoryWindow, TestHistory, slice_recent
from .errors import (
    HistoryTooShort,
    NonPositiveBudget,
    NoPriorHistory,
    NoRankableGroup,
    WindowTooSmall,
)
from .features import FeatureConfig, TrainingSet, build_training_set, feature_matrix
from .metrics import CycleMetrics, apfd, napfd, tdff, tdlf
from .rankers import (
    FITTERS,
    Model,
    PARAM_TYPES,
    RankedSuite,
    RankerKind,
    RankerParams,
    constant_model,
    default_params,
    random_rank,
    rank_cycle,
    rocket_rank,
    with_seed,
)
from .seeding import mix_seed

DEFAULT_SEED = 1729  # fixed default so unseeded runs are reproducible

# Deterministic cost model: counted multiply-accumulates per nominal second.
NOMINAL_OPS_PER_SECOND = 5.0e7


@dataclass(frozen=True)
class ReplayConfig:
    ranker: RankerKind
    budget_s: float
    history_fraction: float = 0.6
    eval_fraction: float = 0.2
    base_seed: int = DEFAULT_SEED
    params: RankerParams | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self) -> None:
        if not (0.0 < self.history_fraction <= 1.0):
            raise ValueError(f"history_fraction must be in (0, 1], got {self.history_fraction}")
        if not (0.0 < self.eval_fraction < 1.0):
            raise ValueError(f"eval_fraction must be in (0, 1), got {self.eval_fraction}")
        if not (self.budget_s > 0 and math.isfinite(self.budget_s)):
            raise NonPositiveBudget(f"budget_s must be positive, got {self.budget_s}")
        if self.params is None:
            object.__setattr__(self, "params", default_params(self.ranker))
        elif not isinstance(self.params, PARAM_TYPES[self.ranker]):
            raise ValueError(
                f"params {type(self.params).__name__} do not match ranker "
                f"{self.ranker.value}"
            )


@dataclass(frozen=True)
class CycleOutcome:
    cycle_id: int
    ranking: RankedSuite
    executed: int                      # prefix length run within budget
    elapsed_s: float
    detected_positions: tuple[int, ...]  # 1-based, within the executed prefix
    faults_present: int
    metrics: CycleMetrics
    train_seconds: float               # deterministic cost model
    rank_seconds: float
    degenerate: bool
    wall_train_seconds: float = field(compare=False, default=0.0)
    wall_rank_seconds: float = field(compare=False, default=0.0)

    @property
    def faults_detected(self) -> int:
        return len(self.detected_positions)


def cut_by_budget(ranking: RankedSuite, budget_s: float) -> tuple[int, float]:
    """Longest prefix whose cumulative duration fits the budget; a test that
    would overflow is not started."""
    if not (budget_s > 0 and math.isfinite(budget_s)):
        raise NonPositiveBudget(f"budget must be positive, got {budget_s}")
    elapsed = 0.0
    executed = 0
    for entry in ranking.entries:
        if elapsed + entry.duration_s > budget_s:
            break
        elapsed += entry.duration_s
        executed += 1
    return executed, elapsed


# --- deterministic cost model ---------------------------------------------------

def _mlp_flops(d: int, h1: int, h2: int) -> int:
    return d * h1 + h1 * h2 + h2


def _train_units(kind: RankerKind, params: RankerParams, ts: TrainingSet | None,
                 degenerate: bool) -> int:
    if ts is None:
        return 0
    n, d = ts.n_examples, ts.dimension
    build = 2 * n * d
    if degenerate:
        return build + n
    if kind is RankerKind.SVM:
        return build + params.epochs * n * d
    if kind is RankerKind.ANN:
        return build + 3 * params.restarts * params.epochs * n * _mlp_flops(
            d, params.hidden1, params.hidden2)
    if kind is RankerKind.GBDT:
        return build + params.n_estimators * n * d * params.max_depth
    if kind is RankerKind.LRN:
        pair_work = 0
        y = ts.y
        for sl in ts.group_slices():
            pos = int((y[sl] > 0.5).sum())
            neg = (sl.stop - sl.start) - pos
            if pos and neg:
                pair_work += (sl.stop - sl.start) * _mlp_flops(
                    d, params.hidden1, params.hidden2) * 3 + 3 * pos * neg
        return build + params.restarts * params.epochs * pair_work
    return build


def _rank_units(kind: RankerKind, params: RankerParams, n_tests: int,
                window_cycles: int, d: int) -> int:
    sort_cost = max(1, n_tests * max(1, int(math.log2(max(2, n_tests)))))
    if kind is RankerKind.RANDOM:
        return n_tests + sort_cost
    if kind is RankerKind.ROCKET:
        return n_tests * window_cycles + sort_cost
    features = n_tests * d + n_tests * window_cycles
    if kind is RankerKind.SVM:
        return features + n_tests * d + sort_cost
    if kind is RankerKind.GBDT:
        return features + n_tests * params.n_estimators * params.max_depth + sort_cost
    # ann / lrn forward pass
    return features + n_tests * _mlp_flops(d, params.hidden1, params.hidden2) + sort_cost


# --- replay ---------------------------------------------------------------------

def _prior_registry(cycles: tuple[Cycle, ...]) -> dict[str, float]:
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for cyc in cycles:
        for tid, dur in zip(cyc.test_ids, cyc.duration_s):
            totals[tid] = totals.get(tid, 0.0) + float(dur)
            counts[tid] = counts.get(tid, 0) + 1
    return {tid: totals[tid] / counts[tid] for tid in totals}


def _train_for_cycle(kind: RankerKind, params: RankerParams, window: HistoryWindow,
                     features: FeatureConfig, seed: int):
    """Fit a model on the window; degraded fits yield a flagged constant model
    instead of aborting the replay."""
    ts = None
    try:
        ts = build_training_set(window, features)
        model = FITTERS[kind](ts, with_seed(params, seed))
    except (WindowTooSmall, NoRankableGroup):
        model = constant_model(kind, features)
    return model, ts


def _replay_at(prior: TestHistory, cycle: Cycle, cfg: ReplayConfig,
               budgets: list[float]) -> list[CycleOutcome]:
    window = slice_recent(prior, cfg.history_fraction)
    kind = cfg.ranker
    params = cfg.params

    fit_seed = mix_seed(cfg.base_seed, "fit", cycle.cycle_id)
    rank_seed = mix_seed(cfg.base_seed, "rank", cycle.cycle_id)

    model: Model | None = None
    ts = None
    wall_train = 0.0
    if kind.trains:
        t0 = time.perf_counter()
        model, ts = _train_for_cycle(kind, params, window, cfg.features, fit_seed)
        wall_train = time.perf_counter() - t0
    degenerate = bool(model is not None and model.degenerate)
    train_units = _train_units(kind, params, ts, degenerate) if kind.trains else 0

    registry = prior.registry
    mean_duration = float(np.mean(list(registry.values())))
    durations = {
        tid: registry.get(tid, mean_duration) for tid in cycle.test_ids
    }

    t0 = time.perf_counter()
    if kind is RankerKind.RANDOM:
        ranking = random_rank(list(cycle.test_ids), durations, rank_seed)
    elif kind is RankerKind.ROCKET:
        ranking = rocket_rank(window, durations, params)
    else:
        max_dur = max(registry.values())
        rows = feature_matrix(window, list(cycle.test_ids), cfg.features,
                              fallback_norm_duration=mean_duration / max_dur)
        ranking = rank_cycle(model, list(cycle.test_ids), durations, rows)
    wall_rank = time.perf_counter() - t0

    rank_units = _rank_units(kind, params, len(cycle.test_ids), window.n_cycles,
                             cfg.features.dimension)
    train_s = train_units / NOMINAL_OPS_PER_SECOND
    rank_s = rank_units / NOMINAL_OPS_PER_SECOND

    failed_at_c = {tid: bool(f) for tid, f in zip(cycle.test_ids, cycle.failed)}
    fault_positions = [
        i + 1 for i, e in enumerate(ranking.entries) if failed_at_c[e.test_id]
    ]
    m = len(fault_positions)
    n = len(ranking)

    outcomes = []
    for budget in budgets:
        executed, elapsed = cut_by_budget(ranking, budget)
        detected = tuple(p for p in fault_positions if p <= executed)
        executed_entries = [
            (e.duration_s, failed_at_c[e.test_id])
            for e in ranking.entries[:executed]
        ]
        metrics = CycleMetrics(
            apfd=apfd(fault_positions, n) if m else None,
            napfd=napfd(detected, executed, m) if m else None,
            tdff_pct=tdff(executed_entries, budget),
            tdlf_pct=tdlf(executed_entries, budget),
            faults_present=m,
            faults_detected=len(detected),
        )
        outcomes.append(CycleOutcome(
            cycle_id=cycle.cycle_id,
            ranking=ranking,
            executed=executed,
            elapsed_s=elapsed,
            detected_positions=detected,
            faults_present=m,
            metrics=metrics,
            train_seconds=train_s,
            rank_seconds=rank_s,
            degenerate=degenerate,
            wall_train_seconds=wall_train,
            wall_rank_seconds=wall_rank,
        ))
    return outcomes


def replay_cycle(h: TestHistory, c: int, cfg: ReplayConfig) -> CycleOutcome:
    """Replay the cycle at position ``c`` of ``h.cycles`` (training only on
    cycles before it)."""
    if not (0 <= c < h.n_cycles):
        raise IndexError(f"cycle position {c} out of range")
    if c == 0:
        raise NoPriorHistory("cycle has no preceding history to train on")
    prior_cycles = h.cycles[:c]
    prior = TestHistory(cycles=prior_cycles, registry=_prior_registry(prior_cycles))
    return _replay_at(prior, h.cycles[c], cfg, [cfg.budget_s])[0]


def walk_forward_budgets(h: TestHistory, cfg: ReplayConfig,
                         budgets: list[float]) -> list[list[CycleOutcome]]:
    """Replay the evaluation cycles once per budget, sharing each cycle's
    trained model and ranking across budgets (training is budget-independent,
    which also makes detected-fault sets nested across growing budgets).

    Returns one chronological outcome list per budget.
    """
    n = h.n_cycles
    if n < 5:
        raise HistoryTooShort(f"need >= 5 cycles, history has {n}")
    n_eval = min(int(math.ceil(cfg.eval_fraction * n)), n - 1)
    first_eval = n - n_eval

    per_budget: list[list[CycleOutcome]] = [[] for _ in budgets]
    totals: dict[str, float] = {}
    counts: dict[str, int] = {}
    for pos, cyc in enumerate(h.cycles):
        if pos >= first_eval:
            registry = {tid: totals[tid] / counts[tid] for tid in totals}
            prior = TestHistory(cycles=h.cycles[:pos], registry=registry)
            for b_idx, outcome in enumerate(_replay_at(prior, cyc, cfg, budgets)):
                per_budget[b_idx].append(outcome)
        for tid, dur in zip(cyc.test_ids, cyc.duration_s):
            totals[tid] = totals.get(tid, 0.0) + float(dur)
            counts[tid] = counts.get(tid, 0) + 1
    return per_budget


def walk_forward(h: TestHistory, cfg: ReplayConfig) -> list[CycleOutcome]:
    """One outcome per evaluation cycle (the last ``eval_fraction`` of the
    history, capped so at least one prior cycle always exists)."""
    return walk_forward_budgets(h, cfg, [cfg.budget_s])[0]
