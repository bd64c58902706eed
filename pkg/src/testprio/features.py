"""Feature engineering: from a history window to per-test vectors and
cycle-grouped training sets.

The feature layout for verdict window ``F`` (dimension ``d = F + 4``)::

    [ v_1 .. v_F,  presence_fraction,  failure_rate,  recency_score,  norm_duration ]

``v_j`` is 1.0 when the test failed in the j-th most recent cycle before the
reference cycle (pass or missing execution both give 0).  ``presence`` and
``failure_rate`` are computed over the cycles before the reference cycle
inside the window; the recency score is an exponentially decayed failure sum
over the same cycles (most recent weighted highest); ``norm_duration`` is the
test's registry mean duration divided by the registry maximum.

Features for a reference cycle are computed only from strictly earlier
cycles, so labels never leak into their own features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config as cfgmod
from .domain import HistoryWindow, Verdict
from .errors import (
    AlphaOutOfRange,
    DimensionMismatch,
    UnknownTest,
    WindowTooSmall,
)


@dataclass(frozen=True)
class FeatureConfig:
    verdict_window: int = 4        # F most recent verdicts kept as slots
    decay: float = 0.8             # recency weight alpha
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.verdict_window <= 0:
            raise ValueError("verdict_window must be positive")
        if not (0.0 < self.decay < 1.0):
            raise AlphaOutOfRange(f"decay must be in (0, 1), got {self.decay}")

    @property
    def dimension(self) -> int:
        return self.verdict_window + 4

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "FeatureConfig":
        return cls(
            verdict_window=cfgmod.get_int(cfg, "verdict_window", 4),
            decay=cfgmod.get_float(cfg, "decay", 0.8),
            standardize=cfgmod.get_bool(cfg, "standardize", True),
        )


@dataclass(frozen=True, eq=False)
class FeatureVector:
    test_id: str
    values: np.ndarray  # float64, shape (d,)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return self.test_id == other.test_id and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class StandardizationStats:
    mean: np.ndarray  # (d,)
    std: np.ndarray   # (d,), zero-variance dimensions recorded as 1.0

    @property
    def dimension(self) -> int:
        return len(self.mean)


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Cycle-grouped labeled examples.

    ``X`` holds raw (unstandardized) feature rows; ``y`` the 0/1 labels
    (1 = failed in the labeled cycle); ``group_cycle_ids`` the labeled
    cycle id per example.  Examples of one group are contiguous and groups
    appear in chronological order.
    """

    X: np.ndarray                # (n, d) float64
    y: np.ndarray                # (n,) float64 in {0, 1}
    group_cycle_ids: np.ndarray  # (n,) int64
    test_ids: tuple[str, ...]    # per example
    stats: StandardizationStats
    config: FeatureConfig

    @property
    def n_examples(self) -> int:
        return len(self.y)

    @property
    def dimension(self) -> int:
        return self.X.shape[1]

    @property
    def single_class(self) -> bool:
        return len(np.unique(self.y)) < 2

    def standardized(self) -> np.ndarray:
        return (self.X - self.stats.mean) / self.stats.std

    def group_slices(self) -> list[slice]:
        ids = self.group_cycle_ids
        starts = np.flatnonzero(np.diff(ids)) + 1
        bounds = np.concatenate(([0], starts, [len(ids)]))
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def recency_failure_score(verdicts_most_recent_first: list[Verdict], alpha: float) -> float:
    """Sum of alpha**j over failing verdicts, j = 0 for the most recent."""
    if not (0.0 < alpha < 1.0):
        raise AlphaOutOfRange(f"alpha must be in (0, 1), got {alpha}")
    return float(
        sum(alpha ** j for j, v in enumerate(verdicts_most_recent_first) if v is Verdict.FAIL)
    )


class _WindowArrays:
    """Presence/failure matrices for one window, rows = window cycles."""

    def __init__(self, window: HistoryWindow):
        self.window = window
        cols: dict[str, int] = {}
        for cyc in window.cycles:
            for tid in cyc.test_ids:
                if tid not in cols:
                    cols[tid] = len(cols)
        self.col_of = cols
        k, n = window.n_cycles, len(cols)
        self.present = np.zeros((k, n), dtype=bool)
        self.failed = np.zeros((k, n), dtype=bool)
        for j, cyc in enumerate(window.cycles):
            idx = np.fromiter((cols[t] for t in cyc.test_ids), dtype=np.int64,
                              count=len(cyc.test_ids))
            self.present[j, idx] = True
            self.failed[j, idx] = cyc.failed

        # prefix[j] = count over rows < j; recency obeys s_{j+1} = a*s_j + f_j
        self.cum_present = np.vstack(
            [np.zeros(n), np.cumsum(self.present, axis=0)]).astype(np.float64)
        self.cum_failed = np.vstack(
            [np.zeros(n), np.cumsum(self.failed, axis=0)]).astype(np.float64)

        registry = window.source.registry
        self.max_duration = max(registry.values())
        self.norm_duration = np.fromiter(
            (registry[t] / self.max_duration for t in cols), dtype=np.float64, count=n
        )

    def recency_scores(self, alpha: float) -> np.ndarray:
        """(k+1, n): row j = decayed failure score as of window offset j."""
        k, n = self.failed.shape
        scores = np.zeros((k + 1, n))
        for j in range(k):
            scores[j + 1] = alpha * scores[j] + self.failed[j]
        return scores

    def features_as_of(self, offset: int, cfg: FeatureConfig,
                       recency: np.ndarray) -> np.ndarray:
        """(n, d) raw feature matrix as of window offset ``offset`` (features
        use rows < offset only)."""
        F = cfg.verdict_window
        k, n = self.failed.shape
        out = np.zeros((n, cfg.dimension))
        for s in range(F):
            row = offset - 1 - s
            if row >= 0:
                out[:, s] = self.failed[row]
        if offset > 0:
            pres = self.cum_present[offset]
            fails = self.cum_failed[offset]
            out[:, F] = pres / offset
            out[:, F + 1] = np.divide(fails, pres, out=np.zeros(n), where=pres > 0)
            out[:, F + 2] = recency[offset]
        out[:, F + 3] = self.norm_duration
        return out


def build_feature_vector(window: HistoryWindow, test_id: str, cfg: FeatureConfig,
                         as_of_cycle: int) -> FeatureVector:
    """Features of one test as of position ``as_of_cycle`` in the source
    history (must lie inside the window or one past its end); only cycles
    strictly before it contribute.
    """
    if not (window.lo <= as_of_cycle <= window.hi):
        raise ValueError(
            f"as_of_cycle {as_of_cycle} outside window [{window.lo}, {window.hi}]"
        )
    registry = window.source.registry
    if test_id not in registry:
        raise UnknownTest(test_id)

    F = cfg.verdict_window
    values = np.zeros(cfg.dimension)
    past = window.source.cycles[window.lo : as_of_cycle]

    present = 0
    fails = 0
    recency = 0.0
    # chronological Horner recurrence, bit-identical to the vectorized path
    for j, cyc in enumerate(past):
        failed_here = 0.0
        try:
            pos = cyc.test_ids.index(test_id)
        except ValueError:
            pos = -1
        if pos >= 0:
            present += 1
            if cyc.failed[pos]:
                failed_here = 1.0
                fails += 1
                dist = len(past) - 1 - j
                if dist < F:
                    values[dist] = 1.0
        recency = cfg.decay * recency + failed_here
    if past:
        values[F] = present / len(past)
        values[F + 1] = fails / present if present else 0.0
        values[F + 2] = recency
    values[F + 3] = registry[test_id] / max(registry.values())
    return FeatureVector(test_id=test_id, values=values)


def build_training_set(window: HistoryWindow, cfg: FeatureConfig) -> TrainingSet:
    """One example per executed test per window cycle except the first
    (which is feature-only): features as of that cycle, label = failed in it.
    """
    if window.n_cycles < 2:
        raise WindowTooSmall(f"need >= 2 cycles, window has {window.n_cycles}")

    arrays = _WindowArrays(window)
    recency = arrays.recency_scores(cfg.decay)

    xs, ys, gids, tids = [], [], [], []
    for offset in range(1, window.n_cycles):
        cyc = window.cycles[offset]
        feats = arrays.features_as_of(offset, cfg, recency)
        idx = np.fromiter((arrays.col_of[t] for t in cyc.test_ids), dtype=np.int64,
                          count=len(cyc.test_ids))
        xs.append(feats[idx])
        ys.append(cyc.failed.astype(np.float64))
        gids.append(np.full(len(idx), cyc.cycle_id, dtype=np.int64))
        tids.extend(cyc.test_ids)

    X = np.vstack(xs)
    y = np.concatenate(ys)
    groups = np.concatenate(gids)
    stats = compute_stats(X) if cfg.standardize else StandardizationStats(
        mean=np.zeros(X.shape[1]), std=np.ones(X.shape[1])
    )
    return TrainingSet(X=X, y=y, group_cycle_ids=groups, test_ids=tuple(tids),
                       stats=stats, config=cfg)


def compute_stats(X: np.ndarray) -> StandardizationStats:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)  # zero-variance dims pass through
    return StandardizationStats(mean=mean, std=std)


def standardize(v: FeatureVector, stats: StandardizationStats) -> FeatureVector:
    if len(v.values) != stats.dimension:
        raise DimensionMismatch(
            f"vector has dimension {len(v.values)}, stats {stats.dimension}"
        )
    return FeatureVector(test_id=v.test_id, values=(v.values - stats.mean) / stats.std)


def feature_matrix(window: HistoryWindow, test_ids: list[str], cfg: FeatureConfig,
                   fallback_norm_duration: float | None = None) -> np.ndarray:
    """Raw feature rows for ``test_ids`` as of one past the window's end.

    Tests absent from the source registry get all-zero history features and
    ``fallback_norm_duration`` as the duration component (they have no
    recorded runs yet); passing ``None`` makes unknown tests an error.
    """
    arrays = _WindowArrays(window)
    recency = arrays.recency_scores(cfg.decay)
    feats = arrays.features_as_of(window.n_cycles, cfg, recency)

    registry = window.source.registry
    F = cfg.verdict_window
    out = np.zeros((len(test_ids), cfg.dimension))
    for i, tid in enumerate(test_ids):
        col = arrays.col_of.get(tid)
        if col is not None:
            out[i] = feats[col]
        elif tid in registry:
            out[i, F + 3] = registry[tid] / arrays.max_duration
        elif fallback_norm_duration is not None:
            out[i, F + 3] = fallback_norm_duration
        else:
            raise UnknownTest(tid)
    return out
