"""Ranker kinds, the shared tie-breaking total order, the two heuristic
rankers (random and recency-weighted), model containers and serialization.

All six strategies produce a :class:`RankedSuite`: a permutation of the
cycle's tests ordered by (score desc, duration asc, test_id asc).  The
duration tie rule executes cheap tests first among equally suspicious ones;
the final lexicographic leg makes the order total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .. import config as cfgmod
from ..domain import HistoryWindow
from ..errors import (
    DimensionMismatch,
    EmptyTestSet,
    EmptyWindow,
    KeyMismatch,
    ModelFormatError,
)
from ..features import FeatureConfig, FeatureVector, StandardizationStats

MODEL_SCHEMA_VERSION = 1

ORDERING_KEY = "score_desc,duration_asc,test_id_asc"


class RankerKind(Enum):
    RANDOM = "random"
    ROCKET = "rocket"
    SVM = "svm"
    ANN = "ann"
    GBDT = "gbdt"
    LRN = "lrn"

    @property
    def history_dependent(self) -> bool:
        return self is not RankerKind.RANDOM

    @property
    def trains(self) -> bool:
        """Whether the kind fits a model from a training set."""
        return self in (RankerKind.SVM, RankerKind.ANN, RankerKind.GBDT, RankerKind.LRN)


# --- hyperparameters ---------------------------------------------------------

@dataclass(frozen=True)
class SvmParams:
    l2: float = 1e-4
    epochs: int = 50
    learning_rate: float = 0.01   # decays as lr / sqrt(epoch)
    batch_size: int = 64
    seed: int = 0


@dataclass(frozen=True)
class AnnParams:
    hidden1: int = 32
    hidden2: int = 16
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 0.01
    restarts: int = 10
    seed: int = 0


@dataclass(frozen=True)
class GbdtParams:
    learning_rate: float = 0.1
    n_estimators: int = 100
    max_depth: int = 3
    min_samples_leaf: int = 2
    seed: int = 0  # fitting is deterministic; kept for interface uniformity


@dataclass(frozen=True)
class LrnParams:
    hidden1: int = 32
    hidden2: int = 16
    epochs: int = 50
    learning_rate: float = 0.005
    restarts: int = 10
    sigma: float = 1.0
    seed: int = 0


@dataclass(frozen=True)
class RocketParams:
    weight_most_recent: float = 0.7
    weight_second: float = 0.2
    weight_older: float = 0.1
    seed: int = 0  # unused; uniform interface


@dataclass(frozen=True)
class RandomParams:
    seed: int = 0


PARAM_TYPES = {
    RankerKind.RANDOM: RandomParams,
    RankerKind.ROCKET: RocketParams,
    RankerKind.SVM: SvmParams,
    RankerKind.ANN: AnnParams,
    RankerKind.GBDT: GbdtParams,
    RankerKind.LRN: LrnParams,
}

RankerParams = (
    RandomParams | RocketParams | SvmParams | AnnParams | GbdtParams | LrnParams
)


def default_params(kind: RankerKind) -> RankerParams:
    return PARAM_TYPES[kind]()


def params_from_config(kind: RankerKind, cfg: Mapping[str, str]) -> RankerParams:
    """Build hyperparameters from dotted config keys (``svm.epochs = 20``)."""
    cls = PARAM_TYPES[kind]
    overrides = {}
    prefix = kind.value + "."
    for key, value in cfg.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        spec = {f.name: f for f in fields(cls)}.get(name)
        if spec is None:
            raise cfgmod.ConfigError(f"unknown hyperparameter {key!r}")
        overrides[name] = type(spec.default)(value)
    return cls(**overrides)


def with_seed(params: RankerParams, seed: int) -> RankerParams:
    return replace(params, seed=seed)


# --- ranked suite -------------------------------------------------------------

@dataclass(frozen=True)
class RankedTest:
    test_id: str
    score: float
    duration_s: float


@dataclass(frozen=True)
class RankedSuite:
    entries: tuple[RankedTest, ...]
    ordering: str = ORDERING_KEY

    @property
    def test_ids(self) -> tuple[str, ...]:
        return tuple(e.test_id for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def rank_with_tie_break(scores: Mapping[str, float],
                        durations: Mapping[str, float]) -> RankedSuite:
    """Total order: score descending, then duration ascending, then test id."""
    if set(scores) != set(durations):
        raise KeyMismatch("scores and durations must cover the same tests")
    entries = [
        RankedTest(tid, float(scores[tid]), float(durations[tid])) for tid in scores
    ]
    entries.sort(key=lambda e: (-e.score, e.duration_s, e.test_id))
    return RankedSuite(entries=tuple(entries))


def random_rank(test_ids: Sequence[str], durations: Mapping[str, float],
                seed: int) -> RankedSuite:
    """Uniform random permutation; scores are descending ranks so the suite
    round-trips through the shared tie-break unchanged."""
    if not test_ids:
        raise EmptyTestSet("cannot rank an empty test set")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(test_ids))
    n = len(test_ids)
    scores = {test_ids[int(p)]: float(n - i) for i, p in enumerate(perm)}
    return rank_with_tie_break(scores, durations)


def rocket_priorities(window: HistoryWindow, test_ids: Sequence[str],
                      params: RocketParams = RocketParams()) -> dict[str, float]:
    """Recency-weighted failure counts: the most recent window cycle weighs
    ``weight_most_recent``, the next ``weight_second``, all older cycles
    ``weight_older``."""
    if window.n_cycles == 0:
        raise EmptyWindow("cannot prioritize from an empty window")
    priorities = {tid: 0.0 for tid in test_ids}
    wanted = set(test_ids)
    for age, cyc in enumerate(reversed(window.cycles), start=1):
        if age == 1:
            w = params.weight_most_recent
        elif age == 2:
            w = params.weight_second
        else:
            w = params.weight_older
        for tid, failed in zip(cyc.test_ids, cyc.failed):
            if failed and tid in wanted:
                priorities[tid] += w
    return priorities


def rocket_rank(window: HistoryWindow, durations: Mapping[str, float],
                params: RocketParams = RocketParams()) -> RankedSuite:
    priorities = rocket_priorities(window, list(durations), params)
    return rank_with_tie_break(priorities, durations)


# --- fitted models ------------------------------------------------------------

@dataclass(frozen=True)
class ConstantPayload:
    """Degenerate model: every test gets the same score, so ranking falls
    back to the duration/id tie rule."""
    value: float = 0.0


@dataclass(frozen=True, eq=False)
class SvmPayload:
    weights: np.ndarray  # (d,)
    bias: float


@dataclass(frozen=True, eq=False)
class MlpPayload:
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]  # [(W, b), ...]
    sigmoid_output: bool


@dataclass(frozen=True, eq=False)
class GbdtTree:
    feature: np.ndarray    # (nodes,) int32, -1 marks a leaf
    threshold: np.ndarray  # (nodes,) float64
    left: np.ndarray       # (nodes,) int32
    right: np.ndarray      # (nodes,) int32
    value: np.ndarray      # (nodes,) float64, leaf scores


@dataclass(frozen=True, eq=False)
class GbdtPayload:
    base_score: float
    shrinkage: float
    trees: tuple[GbdtTree, ...]
    train_loss_trace: tuple[float, ...]  # weighted logloss after each stage


Payload = ConstantPayload | SvmPayload | MlpPayload | GbdtPayload


@dataclass(frozen=True, eq=False)
class Model:
    kind: RankerKind
    payload: Payload
    stats: StandardizationStats     # captured at fit time, applied at score time
    config: FeatureConfig           # the feature settings the model was trained with
    degenerate: bool = False

    @property
    def dimension(self) -> int:
        return self.stats.dimension


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def apply_tree(tree: GbdtTree, X: np.ndarray) -> np.ndarray:
    out = np.zeros(len(X))
    node = np.zeros(len(X), dtype=np.int64)
    active = np.arange(len(X))
    while len(active):
        cur = node[active]
        leaf = tree.feature[cur] < 0
        done = active[leaf]
        out[done] = tree.value[node[done]]
        active = active[~leaf]
        if not len(active):
            break
        cur = node[active]
        go_left = X[active, tree.feature[cur]] <= tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
    return out


def score_matrix(model: Model, X_raw: np.ndarray) -> np.ndarray:
    """Scores for raw (unstandardized) feature rows; applies the model's
    stored standardization first."""
    if X_raw.ndim != 2 or X_raw.shape[1] != model.dimension:
        raise DimensionMismatch(
            f"expected (*, {model.dimension}) features, got {X_raw.shape}"
        )
    X = (X_raw - model.stats.mean) / model.stats.std
    payload = model.payload
    if isinstance(payload, ConstantPayload):
        return np.full(len(X), payload.value)
    if isinstance(payload, SvmPayload):
        return X @ payload.weights + payload.bias
    if isinstance(payload, MlpPayload):
        act = X
        last = len(payload.layers) - 1
        for i, (W, b) in enumerate(payload.layers):
            act = act @ W + b
            if i < last:
                act = np.maximum(act, 0.0)
        out = act[:, 0]
        return _stable_sigmoid(out) if payload.sigmoid_output else out
    if isinstance(payload, GbdtPayload):
        out = np.full(len(X), payload.base_score)
        for tree in payload.trees:
            out += payload.shrinkage * apply_tree(tree, X)
        return out
    raise TypeError(f"unknown payload type {type(payload).__name__}")


def score(model: Model, v: FeatureVector | np.ndarray) -> float:
    values = v.values if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64)
    return float(score_matrix(model, values.reshape(1, -1))[0])


def rank_cycle(model: Model, test_ids: Sequence[str], durations: Mapping[str, float],
               feature_rows: np.ndarray) -> RankedSuite:
    """Score each test's feature row and apply the shared tie-break."""
    values = score_matrix(model, feature_rows)
    scores = {tid: float(s) for tid, s in zip(test_ids, values)}
    return rank_with_tie_break(scores, durations)


def constant_model(kind: RankerKind, config: FeatureConfig,
                   stats: StandardizationStats | None = None) -> Model:
    d = config.dimension
    if stats is None:
        stats = StandardizationStats(mean=np.zeros(d), std=np.ones(d))
    return Model(kind=kind, payload=ConstantPayload(), stats=stats,
                 config=config, degenerate=True)


# --- serialization -------------------------------------------------------------

def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def serialize_model(model: Model) -> bytes:
    payload = model.payload
    if isinstance(payload, ConstantPayload):
        body = {"type": "constant", "value": payload.value}
    elif isinstance(payload, SvmPayload):
        body = {"type": "svm", "weights": _arr(payload.weights), "bias": payload.bias}
    elif isinstance(payload, MlpPayload):
        body = {
            "type": "mlp",
            "sigmoid_output": payload.sigmoid_output,
            "layers": [{"W": _arr(W), "b": _arr(b)} for W, b in payload.layers],
        }
    elif isinstance(payload, GbdtPayload):
        body = {
            "type": "gbdt",
            "base_score": payload.base_score,
            "shrinkage": payload.shrinkage,
            "train_loss_trace": list(payload.train_loss_trace),
            "trees": [
                {
                    "feature": tree.feature.tolist(),
                    "threshold": _arr(tree.threshold),
                    "left": tree.left.tolist(),
                    "right": tree.right.tolist(),
                    "value": _arr(tree.value),
                }
                for tree in payload.trees
            ],
        }
    else:
        raise TypeError(f"cannot serialize payload {type(payload).__name__}")

    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": model.kind.value,
        "degenerate": model.degenerate,
        "feature_config": {
            "verdict_window": model.config.verdict_window,
            "decay": model.config.decay,
            "standardize": model.config.standardize,
        },
        "stats": {"mean": _arr(model.stats.mean), "std": _arr(model.stats.std)},
        "payload": body,
    }
    return (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()


def deserialize_model(data: bytes) -> Model:
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"not a serialized model: {exc}") from exc
    if doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(f"unsupported schema_version {doc.get('schema_version')!r}")

    fc = doc["feature_config"]
    config = FeatureConfig(verdict_window=fc["verdict_window"], decay=fc["decay"],
                           standardize=fc["standardize"])
    stats = StandardizationStats(
        mean=np.array(doc["stats"]["mean"], dtype=np.float64),
        std=np.array(doc["stats"]["std"], dtype=np.float64),
    )
    body = doc["payload"]
    kind = RankerKind(doc["kind"])
    if body["type"] == "constant":
        payload: Payload = ConstantPayload(value=body["value"])
    elif body["type"] == "svm":
        payload = SvmPayload(weights=np.array(body["weights"]), bias=body["bias"])
    elif body["type"] == "mlp":
        payload = MlpPayload(
            layers=tuple(
                (np.array(layer["W"]), np.array(layer["b"])) for layer in body["layers"]
            ),
            sigmoid_output=body["sigmoid_output"],
        )
    elif body["type"] == "gbdt":
        payload = GbdtPayload(
            base_score=body["base_score"],
            shrinkage=body["shrinkage"],
            train_loss_trace=tuple(body["train_loss_trace"]),
            trees=tuple(
                GbdtTree(
                    feature=np.array(t["feature"], dtype=np.int32),
                    threshold=np.array(t["threshold"], dtype=np.float64),
                    left=np.array(t["left"], dtype=np.int32),
                    right=np.array(t["right"], dtype=np.int32),
                    value=np.array(t["value"], dtype=np.float64),
                )
                for t in body["trees"]
            ),
        )
    else:
        raise ModelFormatError(f"unknown payload type {body['type']!r}")
    return Model(kind=kind, payload=payload, stats=stats, config=config,
                 degenerate=doc["degenerate"])
