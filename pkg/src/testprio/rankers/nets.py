"""Small feed-forward nets: the direct fail-probability scorer and the
pairwise learning-to-rank scorer.

Both use the same shape (input -> hidden1 -> hidden2 -> 1, ReLU hidden
activations, three weight layers).  Training runs several restarts from
different seeded initializations; to keep that affordable, all restarts are
trained simultaneously as one stacked tensor computation (leading axis =
restart).  The best restart is kept: minimal final training error for the
probability net, maximal training NDCG for the ranking net.
"""

from __future__ import annotations

import numpy as np

from ..errors import NoRankableGroup
from ..features import TrainingSet
from ..seeding import mix_seed
from .base import (
    AnnParams,
    LrnParams,
    Model,
    MlpPayload,
    RankerKind,
    constant_model,
    _stable_sigmoid,
)

Params = list[tuple[np.ndarray, np.ndarray]]  # [(W, b), ...] stacked over restarts


def _init_stacked(seed: int, restarts: int, sizes: tuple[int, ...]) -> Params:
    """He-scaled normal init; restart r draws from generator seed + r."""
    params: Params = []
    per_restart = [np.random.default_rng(seed + r) for r in range(restarts)]
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = np.stack(
            [rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
             for rng in per_restart]
        )
        b = np.zeros((restarts, 1, fan_out))
        params.append((W, b))
    return params


def _forward_stacked(params: Params, X: np.ndarray) -> list[np.ndarray]:
    """Pre-activations and activations per layer; X is (R|1, B, d).

    Returns [A0, Z1, A1, Z2, A2, Z3] where A_k = relu(Z_k) for hidden
    layers and Z3 is the raw output (R, B, 1).
    """
    caches = [X]
    act = X
    last = len(params) - 1
    for i, (W, b) in enumerate(params):
        z = act @ W + b
        caches.append(z)
        if i < last:
            act = np.maximum(z, 0.0)
            caches.append(act)
    return caches


def _backward_stacked(params: Params, caches: list[np.ndarray],
                      d_out: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Gradients w.r.t. every (W, b) given dLoss/dZ_out of shape (R, B, 1)."""
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)  # type: ignore
    dz = d_out
    for i in range(len(params) - 1, -1, -1):
        act_in = caches[2 * i]
        W, _ = params[i]
        dW = np.matmul(act_in.transpose(0, 2, 1), dz)
        db = dz.sum(axis=1, keepdims=True)
        grads[i] = (dW, db)
        if i > 0:
            da = np.matmul(dz, W.transpose(0, 2, 1))
            z_in = caches[2 * i - 1]
            dz = da * (z_in > 0)
    return grads


def _sgd_step(params: Params, grads, lr: float) -> None:
    for (W, b), (dW, db) in zip(params, grads):
        W -= lr * dW
        b -= lr * db


def _unstack(params: Params, r: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    return tuple((W[r].copy(), b[r, 0].copy()) for W, b in params)


def _class_weights(y: np.ndarray) -> np.ndarray:
    n_pos = int((y > 0.5).sum())
    n_neg = len(y) - n_pos
    return np.where(y > 0.5, n_neg / n_pos, 1.0)


# --- probability net -----------------------------------------------------------

class _BatchWorkspace:
    """Preallocated buffers for one stacked minibatch shape.

    The training loop runs hundreds of thousands of tiny steps; allocating
    the ~dozen intermediate tensors fresh each step costs several times the
    arithmetic itself, so every buffer is reused across steps.
    """

    def __init__(self, R: int, B: int, d: int, h1: int, h2: int):
        self.B = B
        self.Xb = np.empty((R, B, d))
        self.yb = np.empty((R, B))
        self.cb = np.empty((R, B))
        self.Z1 = np.empty((R, B, h1))
        self.A1 = np.empty((R, B, h1))
        self.Z2 = np.empty((R, B, h2))
        self.A2 = np.empty((R, B, h2))
        self.Z3 = np.empty((R, B, 1))
        self.out = np.empty((R, B, 1))
        self.g = np.empty((R, B, 1))
        self.tmp = np.empty((R, B, 1))
        self.mask1 = np.empty((R, B, h1), dtype=bool)
        self.mask2 = np.empty((R, B, h2), dtype=bool)
        self.dA1 = np.empty((R, B, h1))
        self.dA2 = np.empty((R, B, h2))
        self.dW1 = np.empty((R, d, h1))
        self.dW2 = np.empty((R, h1, h2))
        self.dW3 = np.empty((R, h2, 1))
        self.db1 = np.empty((R, 1, h1))
        self.db2 = np.empty((R, 1, h2))
        self.db3 = np.empty((R, 1, 1))

    def step(self, params: Params, X, y, cw, cols, lr: float) -> None:
        """One fused forward/backward/update on rows ``cols`` (R, B)."""
        w = self
        (W1, b1), (W2, b2), (W3, b3) = params
        flat = cols.reshape(-1)
        np.take(X, flat, axis=0, out=w.Xb.reshape(-1, X.shape[1]))
        np.take(y, flat, axis=0, out=w.yb.reshape(-1))
        np.take(cw, flat, axis=0, out=w.cb.reshape(-1))

        np.matmul(w.Xb, W1, out=w.Z1)
        np.add(w.Z1, b1, out=w.Z1)
        np.maximum(w.Z1, 0.0, out=w.A1)
        np.matmul(w.A1, W2, out=w.Z2)
        np.add(w.Z2, b2, out=w.Z2)
        np.maximum(w.Z2, 0.0, out=w.A2)
        np.matmul(w.A2, W3, out=w.Z3)
        np.add(w.Z3, b3, out=w.Z3)
        _stable_sigmoid_into(w.Z3, w.out, w.tmp)

        # g = (2/B) * c * (out - y) * out * (1 - out)
        np.subtract(w.out, w.yb[..., None], out=w.g)
        np.multiply(w.g, w.cb[..., None], out=w.g)
        np.multiply(w.g, w.out, out=w.g)
        np.subtract(1.0, w.out, out=w.tmp)
        np.multiply(w.g, w.tmp, out=w.g)
        np.multiply(w.g, 2.0 / w.B, out=w.g)

        np.matmul(w.A2.transpose(0, 2, 1), w.g, out=w.dW3)
        np.sum(w.g, axis=1, keepdims=True, out=w.db3)
        np.matmul(w.g, W3.transpose(0, 2, 1), out=w.dA2)
        np.greater(w.Z2, 0.0, out=w.mask2)
        np.multiply(w.dA2, w.mask2, out=w.dA2)
        np.matmul(w.A1.transpose(0, 2, 1), w.dA2, out=w.dW2)
        np.sum(w.dA2, axis=1, keepdims=True, out=w.db2)
        np.matmul(w.dA2, W2.transpose(0, 2, 1), out=w.dA1)
        np.greater(w.Z1, 0.0, out=w.mask1)
        np.multiply(w.dA1, w.mask1, out=w.dA1)
        np.matmul(w.Xb.transpose(0, 2, 1), w.dA1, out=w.dW1)
        np.sum(w.dA1, axis=1, keepdims=True, out=w.db1)

        for arr, grad in ((W1, w.dW1), (b1, w.db1), (W2, w.dW2), (b2, w.db2),
                          (W3, w.dW3), (b3, w.db3)):
            np.multiply(grad, lr, out=grad)
            np.subtract(arr, grad, out=arr)


def _stable_sigmoid_into(x: np.ndarray, out: np.ndarray, scratch: np.ndarray) -> None:
    """out = sigmoid(x) without overflow, using ``scratch`` as workspace."""
    np.clip(x, -500.0, 500.0, out=scratch)
    np.negative(scratch, out=scratch)
    np.exp(scratch, out=scratch)
    np.add(scratch, 1.0, out=scratch)
    np.reciprocal(scratch, out=out)


def fit_ann(ts: TrainingSet, hp: AnnParams = AnnParams()) -> Model:
    """Sigmoid-output net trained on class-weighted MSE by minibatch gradient
    descent; keeps the restart with the lowest final training error."""
    if ts.single_class:
        return constant_model(RankerKind.ANN, ts.config, ts.stats)

    X = ts.standardized()
    y = ts.y
    weights = _class_weights(y)
    n, d = X.shape
    R = hp.restarts
    params = _init_stacked(hp.seed, R, (d, hp.hidden1, hp.hidden2, 1))
    shuffles = [np.random.default_rng(mix_seed(hp.seed + r, "shuffle")) for r in range(R)]

    B = min(hp.batch_size, n)
    work = _BatchWorkspace(R, B, d, hp.hidden1, hp.hidden2)
    rem = n % B
    work_rem = _BatchWorkspace(R, rem, d, hp.hidden1, hp.hidden2) if rem else None

    for _ in range(hp.epochs):
        orders = np.stack([rng.permutation(n) for rng in shuffles])
        for start in range(0, n - rem, B):
            work.step(params, X, y, weights, orders[:, start : start + B],
                      hp.learning_rate)
        if rem:
            work_rem.step(params, X, y, weights, orders[:, n - rem :],
                          hp.learning_rate)

    # final weighted MSE per restart on the whole training set
    full = _forward_stacked(params, np.broadcast_to(X, (R, n, d)))
    out = _stable_sigmoid(full[-1][..., 0])
    losses = (weights * (out - y) ** 2).mean(axis=1)
    best = int(np.argmin(losses))
    payload = MlpPayload(layers=_unstack(params, best), sigmoid_output=True)
    return Model(kind=RankerKind.ANN, payload=payload, stats=ts.stats, config=ts.config)


def ann_loss_and_grads(layers, X: np.ndarray, y: np.ndarray,
                       class_weights: np.ndarray):
    """Class-weighted MSE and parameter gradients for one parameter set
    (used directly by finite-difference checks)."""
    params = [(W[None], b[None, None]) for W, b in layers]
    caches = _forward_stacked(params, X[None])
    out = _stable_sigmoid(caches[-1])
    err = out - y[None, :, None]
    cw = class_weights[None, :, None]
    loss = float((cw * err ** 2).mean(axis=1).sum())
    dz = (2.0 / len(y)) * cw * err * out * (1.0 - out)
    grads = _backward_stacked(params, caches, dz)
    return loss, [(dW[0], db[0, 0]) for dW, db in grads]


# --- pairwise ranking net --------------------------------------------------------

def _ranks_descending(scores: np.ndarray) -> np.ndarray:
    """1-based ranks by descending score, ties broken by item index."""
    order = np.lexsort((np.arange(len(scores)), -scores))
    ranks = np.empty(len(scores), dtype=np.int64)
    ranks[order] = np.arange(1, len(scores) + 1)
    return ranks


def _ranks_matrix(s: np.ndarray) -> np.ndarray:
    """Row-wise 1-based descending ranks, ties by index (stable sort)."""
    R, m = s.shape
    order = np.argsort(-s, axis=1, kind="stable")
    ranks = np.empty((R, m), dtype=np.int64)
    np.put_along_axis(ranks, order,
                      np.broadcast_to(np.arange(1, m + 1), (R, m)), axis=1)
    return ranks


def _ideal_dcg(n_pos: int) -> float:
    return float((1.0 / np.log2(1.0 + np.arange(1, n_pos + 1))).sum())


def _group_lambdas(s: np.ndarray, pos: np.ndarray, neg: np.ndarray,
                   sigma: float, idcg: float,
                   frozen_delta: np.ndarray | None = None):
    """dCost/dscore (R, m) for one group with stacked scores s (R, m)."""
    if frozen_delta is None:
        gains = 1.0 / np.log2(1.0 + _ranks_matrix(s))
        delta = np.abs(gains[:, pos][:, :, None] - gains[:, neg][:, None, :]) / idcg
    else:
        delta = frozen_delta
    sdiff = s[:, pos][:, :, None] - s[:, neg][:, None, :]
    with np.errstate(over="ignore"):
        lam = -sigma * delta / (1.0 + np.exp(sigma * sdiff))
    dc = np.zeros_like(s)
    dc[:, pos] = lam.sum(axis=2)
    dc[:, neg] = -lam.sum(axis=1)
    return dc, delta, sdiff


class _GroupWorkspace:
    """Reusable forward/backward buffers for one group size ``m``."""

    def __init__(self, R: int, m: int, d: int, h1: int, h2: int):
        self.Z1 = np.empty((R, m, h1))
        self.A1 = np.empty((R, m, h1))
        self.Z2 = np.empty((R, m, h2))
        self.A2 = np.empty((R, m, h2))
        self.Z3 = np.empty((R, m, 1))
        self.mask1 = np.empty((R, m, h1), dtype=bool)
        self.mask2 = np.empty((R, m, h2), dtype=bool)
        self.dA1 = np.empty((R, m, h1))
        self.dA2 = np.empty((R, m, h2))
        self.dW1 = np.empty((R, d, h1))
        self.dW2 = np.empty((R, h1, h2))
        self.dW3 = np.empty((R, h2, 1))
        self.db1 = np.empty((R, 1, h1))
        self.db2 = np.empty((R, 1, h2))
        self.db3 = np.empty((R, 1, 1))

    def step(self, params: Params, Xg: np.ndarray, pos, neg, sigma: float,
             idcg: float, lr: float) -> None:
        w = self
        (W1, b1), (W2, b2), (W3, b3) = params
        np.matmul(Xg, W1, out=w.Z1)
        np.add(w.Z1, b1, out=w.Z1)
        np.maximum(w.Z1, 0.0, out=w.A1)
        np.matmul(w.A1, W2, out=w.Z2)
        np.add(w.Z2, b2, out=w.Z2)
        np.maximum(w.Z2, 0.0, out=w.A2)
        np.matmul(w.A2, W3, out=w.Z3)
        np.add(w.Z3, b3, out=w.Z3)

        dc, _, _ = _group_lambdas(w.Z3[..., 0], pos, neg, sigma, idcg)

        np.matmul(w.A2.transpose(0, 2, 1), dc[..., None], out=w.dW3)
        np.sum(dc[..., None], axis=1, keepdims=True, out=w.db3)
        np.matmul(dc[..., None], W3.transpose(0, 2, 1), out=w.dA2)
        np.greater(w.Z2, 0.0, out=w.mask2)
        np.multiply(w.dA2, w.mask2, out=w.dA2)
        np.matmul(w.A1.transpose(0, 2, 1), w.dA2, out=w.dW2)
        np.sum(w.dA2, axis=1, keepdims=True, out=w.db2)
        np.matmul(w.dA2, W2.transpose(0, 2, 1), out=w.dA1)
        np.greater(w.Z1, 0.0, out=w.mask1)
        np.multiply(w.dA1, w.mask1, out=w.dA1)
        np.matmul(Xg.transpose(0, 2, 1), w.dA1, out=w.dW1)
        np.sum(w.dA1, axis=1, keepdims=True, out=w.db1)

        for arr, grad in ((W1, w.dW1), (b1, w.db1), (W2, w.dW2), (b2, w.db2),
                          (W3, w.dW3), (b3, w.db3)):
            np.multiply(grad, lr, out=grad)
            np.subtract(arr, grad, out=arr)


def fit_lambdarank(ts: TrainingSet, hp: LrnParams = LrnParams()) -> Model:
    """Linear-output net trained with pairwise lambda gradients per cycle
    group; groups lacking a failing or a passing example are skipped.
    Restarts differ in initialization and share the per-epoch group order;
    the restart with the best final training NDCG wins."""
    slices = ts.group_slices()
    X = ts.standardized()
    y = ts.y
    groups = []
    for sl in slices:
        pos = np.flatnonzero(y[sl] > 0.5)
        neg = np.flatnonzero(y[sl] < 0.5)
        if len(pos) and len(neg):
            groups.append((sl, pos, neg, _ideal_dcg(len(pos))))
    if not groups:
        raise NoRankableGroup("no cycle group contains both verdict classes")

    d = X.shape[1]
    R = hp.restarts
    params = _init_stacked(hp.seed, R, (d, hp.hidden1, hp.hidden2, 1))
    order_rng = np.random.default_rng(mix_seed(hp.seed, "group-order"))

    inputs = [np.ascontiguousarray(X[sl][None]) for sl, _, _, _ in groups]
    workspaces: dict[int, _GroupWorkspace] = {}
    for _ in range(hp.epochs):
        for g in order_rng.permutation(len(groups)):
            _, pos, neg, idcg = groups[g]
            Xg = inputs[g]
            m = Xg.shape[1]
            work = workspaces.get(m)
            if work is None:
                work = workspaces[m] = _GroupWorkspace(R, m, d, hp.hidden1, hp.hidden2)
            work.step(params, Xg, pos, neg, hp.sigma, idcg, hp.learning_rate)

    # mean training NDCG per restart
    ndcg = np.zeros(R)
    for (sl, pos, neg, idcg), Xg in zip(groups, inputs):
        caches = _forward_stacked(params, Xg)
        s = caches[-1][..., 0]
        for r in range(R):
            ranks = _ranks_descending(s[r])
            ndcg[r] += (1.0 / np.log2(1.0 + ranks[pos])).sum() / idcg
    best = int(np.argmax(ndcg))
    payload = MlpPayload(layers=_unstack(params, best), sigmoid_output=False)
    return Model(kind=RankerKind.LRN, payload=payload, stats=ts.stats, config=ts.config)


def lambdarank_cost_and_grads(layers, X: np.ndarray, y: np.ndarray,
                              sigma: float = 1.0,
                              frozen_delta: np.ndarray | None = None):
    """Pairwise cost sum_ij |dNDCG_ij| * log(1 + exp(-sigma (s_i - s_j))) and
    its parameter gradients, for one group and one parameter set.

    The |dNDCG| factors are treated as constants of the current ranking
    (pass ``frozen_delta`` to hold them fixed across finite-difference
    evaluations); that is exactly the function whose gradient the lambda
    accumulation computes.
    """
    pos = np.flatnonzero(y > 0.5)
    neg = np.flatnonzero(y < 0.5)
    if not len(pos) or not len(neg):
        raise NoRankableGroup("gradient check group needs both classes")
    idcg = _ideal_dcg(len(pos))

    params = [(W[None], b[None, None]) for W, b in layers]
    caches = _forward_stacked(params, X[None])
    s = caches[-1][..., 0]
    dc, delta, sdiff = _group_lambdas(s, pos, neg, sigma, idcg, frozen_delta)
    cost = float((delta * np.logaddexp(0.0, -sigma * sdiff)).sum())
    grads = _backward_stacked(params, caches, dc[..., None])
    return cost, [(dW[0], db[0, 0]) for dW, db in grads], delta
