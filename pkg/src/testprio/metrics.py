"""Per-cycle and aggregate prioritization metrics.

APFD rewards orderings that place failing tests early; NAPFD extends it to
budget-cut prefixes by scaling with the fraction of faults actually
detected.  TDFF/TDLF report the simulated time to the first/last detected
fault as a percentage of the cycle's budget.  Each failing test counts as
one unique fault (the histories carry no fault-to-test mapping).

Metrics that are undefined for a cycle (no faults present, no fault
detected) are reported as ``None`` and excluded from aggregation, never
imputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyOutcomeList,
    NoFaults,
    NonPositiveBudget,
    PositionOutOfRange,
)


@dataclass(frozen=True)
class CycleMetrics:
    apfd: float | None
    napfd: float | None
    tdff_pct: float | None
    tdlf_pct: float | None
    faults_present: int
    faults_detected: int


def apfd(fail_positions: Sequence[int], n: int) -> float:
    """APFD = 1 - sum(TF_i) / (n*m) + 1/(2n) for 1-based fault positions."""
    m = len(fail_positions)
    if m == 0:
        raise NoFaults("APFD undefined with no failing tests")
    if len(set(fail_positions)) != m:
        raise PositionOutOfRange("fault positions must be distinct")
    for p in fail_positions:
        if not (1 <= p <= n):
            raise PositionOutOfRange(f"position {p} outside [1, {n}]")
    return 1.0 - sum(fail_positions) / (n * m) + 1.0 / (2 * n)


def napfd(detected_positions: Sequence[int], n_executed: int, total_faults: int) -> float:
    """Budget-aware APFD over the executed prefix.

    p = detected/m scales the formula so undetected faults cost the full
    area; an empty prefix scores 0 by definition.
    """
    if total_faults <= 0:
        raise NoFaults("NAPFD undefined with no faults present")
    if n_executed == 0:
        return 0.0
    d = len(detected_positions)
    if len(set(detected_positions)) != d:
        raise PositionOutOfRange("detected positions must be distinct")
    for p in detected_positions:
        if not (1 <= p <= n_executed):
            raise PositionOutOfRange(f"position {p} outside [1, {n_executed}]")
    p = d / total_faults
    return p - sum(detected_positions) / (n_executed * total_faults) + p / (2 * n_executed)


def tdff(executed: Sequence[tuple[float, bool]], budget: float) -> float | None:
    """Time (as % of budget) to reach the first executed failure.

    ``executed`` lists (duration_s, failed) in execution order; returns
    ``None`` when no executed test failed.
    """
    return _time_to_fault(executed, budget, last=False)


def tdlf(executed: Sequence[tuple[float, bool]], budget: float) -> float | None:
    """Time (as % of budget) to reach the last executed failure."""
    return _time_to_fault(executed, budget, last=True)


def _time_to_fault(executed: Sequence[tuple[float, bool]], budget: float,
                   last: bool) -> float | None:
    if not (budget > 0 and math.isfinite(budget)):
        raise NonPositiveBudget(f"budget must be positive, got {budget}")
    elapsed = 0.0
    hit: float | None = None
    for duration, failed in executed:
        elapsed += duration
        if failed:
            hit = elapsed
            if not last:
                break
    return None if hit is None else 100.0 * hit / budget


@dataclass(frozen=True)
class AggregateSummary:
    """Means/stds over cycles where each metric is defined."""

    cycles: int
    mean_apfd: float | None
    std_apfd: float | None          # sample std; None when < 2 defined values
    apfd_defined: int
    mean_napfd: float | None
    napfd_defined: int
    mean_tdff_pct: float | None
    tdff_defined: int
    mean_tdlf_pct: float | None
    tdlf_defined: int
    mean_train_s: float
    mean_rank_s: float
    degenerate_count: int


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if len(values) > 1 else None
    return mean, std


def aggregate(outcomes: Iterable) -> AggregateSummary:
    """Aggregate a list of replay cycle outcomes (see ``replay.CycleOutcome``)."""
    outcomes = list(outcomes)
    if not outcomes:
        raise EmptyOutcomeList("nothing to aggregate")

    apfds = [o.metrics.apfd for o in outcomes if o.metrics.apfd is not None]
    napfds = [o.metrics.napfd for o in outcomes if o.metrics.napfd is not None]
    tdffs = [o.metrics.tdff_pct for o in outcomes if o.metrics.tdff_pct is not None]
    tdlfs = [o.metrics.tdlf_pct for o in outcomes if o.metrics.tdlf_pct is not None]

    mean_apfd, std_apfd = _mean_std(apfds)
    mean_napfd, _ = _mean_std(napfds)
    mean_tdff, _ = _mean_std(tdffs)
    mean_tdlf, _ = _mean_std(tdlfs)
    return AggregateSummary(
        cycles=len(outcomes),
        mean_apfd=mean_apfd,
        std_apfd=std_apfd,
        apfd_defined=len(apfds),
        mean_napfd=mean_napfd,
        napfd_defined=len(napfds),
        mean_tdff_pct=mean_tdff,
        tdff_defined=len(tdffs),
        mean_tdlf_pct=mean_tdlf,
        tdlf_defined=len(tdlfs),
        mean_train_s=float(np.mean([o.train_seconds for o in outcomes])),
        mean_rank_s=float(np.mean([o.rank_seconds for o in outcomes])),
        degenerate_count=sum(1 for o in outcomes if o.degenerate),
    )
