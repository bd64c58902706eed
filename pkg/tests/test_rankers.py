import itertools

import numpy as np
import pytest

from testprio.domain import slice_recent
from testprio.errors import EmptyTestSet, KeyMismatch
from testprio.features import FeatureConfig, StandardizationStats
from testprio.rankers import (
    Model,
    RankerKind,
    RocketParams,
    SvmParams,
    SvmPayload,
    constant_model,
    default_params,
    deserialize_model,
    fit_ann,
    fit_gbdt,
    fit_lambdarank,
    fit_svm,
    params_from_config,
    rank_cycle,
    rank_with_tie_break,
    random_rank,
    rocket_priorities,
    rocket_rank,
    score,
    score_matrix,
    serialize_model,
)

from .conftest import cyc, history, toy_training_set


class TestTieBreak:
    def test_score_order(self):
        rs = rank_with_tie_break({"A": 0.9, "B": 0.1}, {"A": 1.0, "B": 1.0})
        assert rs.test_ids == ("A", "B")

    def test_duration_breaks_score_tie(self):
        rs = rank_with_tie_break({"A": 0.5, "B": 0.5}, {"A": 3.0, "B": 2.0})
        assert rs.test_ids == ("B", "A")

    def test_lexicographic_final_tie(self):
        rs = rank_with_tie_break(
            {"B": 0.5, "A": 0.5, "C": 0.5}, {"A": 1.0, "B": 1.0, "C": 1.0}
        )
        assert rs.test_ids == ("A", "B", "C")

    def test_key_mismatch(self):
        with pytest.raises(KeyMismatch):
            rank_with_tie_break({"A": 1.0}, {"A": 1.0, "B": 2.0})

    def test_is_permutation(self):
        rng = np.random.default_rng(5)
        ids = [f"T{i}" for i in range(30)]
        scores = {t: float(rng.choice([0.1, 0.5, 0.9])) for t in ids}
        durations = {t: float(rng.choice([1.0, 2.0])) for t in ids}
        rs = rank_with_tie_break(scores, durations)
        assert sorted(rs.test_ids) == sorted(ids)


class TestRandomRank:
    def test_single_test(self):
        rs = random_rank(["A"], {"A": 1.0}, seed=0)
        assert rs.test_ids == ("A",)

    def test_deterministic_per_seed(self):
        ids = [f"T{i}" for i in range(10)]
        durations = {t: 1.0 for t in ids}
        assert random_rank(ids, durations, 7).test_ids == random_rank(ids, durations, 7).test_ids

    def test_empty_set(self):
        with pytest.raises(EmptyTestSet):
            random_rank([], {}, 0)

    def test_uniformity_over_orders(self):
        # Monte-Carlo oracle: all 6 orders of 3 tests at 1/6 +- 0.02
        ids = ["A", "B", "C"]
        durations = {t: 1.0 for t in ids}
        counts = {p: 0 for p in itertools.permutations(ids)}
        n = 10000
        for seed in range(n):
            counts[random_rank(ids, durations, seed).test_ids] += 1
        for got in counts.values():
            assert abs(got / n - 1 / 6) < 0.02

    def test_scores_are_descending_ranks(self):
        ids = ["A", "B", "C", "D"]
        rs = random_rank(ids, {t: 1.0 for t in ids}, 3)
        assert [e.score for e in rs.entries] == [4.0, 3.0, 2.0, 1.0]


def _window_with_failures():
    # most recent cycle = id 3: A fails.  B failed in cycles 1 and 2
    # (the 2nd and 3rd most recent).
    return slice_recent(history(
        cyc(0, ("A", "pass", 1.0), ("B", "pass", 2.0), ("C", "pass", 3.0)),
        cyc(1, ("A", "pass", 1.0), ("B", "fail", 2.0), ("C", "pass", 3.0)),
        cyc(2, ("A", "pass", 1.0), ("B", "fail", 2.0), ("C", "pass", 3.0)),
        cyc(3, ("A", "fail", 1.0), ("B", "pass", 2.0), ("C", "pass", 3.0)),
    ), 1.0)


class TestRocket:
    def test_weighted_sums(self):
        # oracle: A fails only in most recent -> 0.7
        #         B fails in 2nd and 3rd most recent -> 0.2 + 0.1 = 0.3
        w = _window_with_failures()
        priorities = rocket_priorities(w, ["A", "B", "C"])
        assert priorities["A"] == pytest.approx(0.7)
        assert priorities["B"] == pytest.approx(0.3)
        assert priorities["C"] == 0.0

    def test_rank_order(self):
        w = _window_with_failures()
        rs = rocket_rank(w, {"A": 1.0, "B": 2.0, "C": 3.0})
        assert rs.test_ids == ("A", "B", "C")

    def test_no_failures_falls_back_to_duration(self):
        w = slice_recent(history(
            cyc(0, ("A", "pass", 3.0), ("B", "pass", 1.0), ("C", "pass", 2.0)),
        ), 1.0)
        rs = rocket_rank(w, {"A": 3.0, "B": 1.0, "C": 2.0})
        assert rs.test_ids == ("B", "C", "A")

    def test_priority_bounds_and_zero_iff_never_failed(self, persistent_history):
        w = slice_recent(persistent_history, 0.4)
        ids = list(persistent_history.registry)
        priorities = rocket_priorities(w, ids)
        k = w.n_cycles
        upper = 0.7 + 0.2 + 0.1 * (k - 2)
        failed_ever = {
            t for c in w.cycles for t, f in zip(c.test_ids, c.failed) if f
        }
        for tid, p in priorities.items():
            assert 0.0 <= p <= upper + 1e-12
            assert (p == 0.0) == (tid not in failed_ever)

    def test_custom_weights(self):
        w = _window_with_failures()
        params = RocketParams(weight_most_recent=1.0, weight_second=0.0, weight_older=0.0)
        priorities = rocket_priorities(w, ["A", "B"], params)
        assert priorities == {"A": 1.0, "B": 0.0}


def _separable_set(n=60, d=4, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.4).astype(float)
    X = rng.normal(0, 0.3, size=(n, d))
    X[:, 0] += np.where(y > 0.5, 1.0, -1.0)
    return toy_training_set(X, y)


class TestSvm:
    def test_separable_set_reaches_full_training_accuracy(self):
        ts = _separable_set()
        model = fit_svm(ts)
        scores = score_matrix(model, ts.X)
        assert np.all((scores > 0) == (ts.y > 0.5))

    def test_single_class_degenerates(self):
        ts = toy_training_set(np.zeros((4, 2)), np.zeros(4))
        model = fit_svm(ts)
        assert model.degenerate
        assert score_matrix(model, np.zeros((2, 2))).tolist() == [0.0, 0.0]

    def test_duplicated_examples_keep_score_ordering(self):
        ts = _separable_set()
        doubled = toy_training_set(np.vstack([ts.X, ts.X]), np.concatenate([ts.y, ts.y]))
        m1, m2 = fit_svm(ts), fit_svm(doubled)
        pos_probe = ts.X[ts.y > 0.5][0]
        neg_probe = ts.X[ts.y < 0.5][0]
        for m in (m1, m2):
            assert score(m, pos_probe) > score(m, neg_probe)

    def test_deterministic_given_seed(self):
        ts = _separable_set()
        a = fit_svm(ts, SvmParams(seed=5))
        b = fit_svm(ts, SvmParams(seed=5))
        assert serialize_model(a) == serialize_model(b)

    def test_positive_affine_scaling_preserves_order(self):
        ts = _separable_set()
        m = fit_svm(ts)
        payload = m.payload
        scaled = Model(kind=m.kind,
                       payload=SvmPayload(weights=2 * payload.weights,
                                          bias=2 * payload.bias),
                       stats=m.stats, config=m.config)
        probes = np.random.default_rng(3).normal(size=(20, ts.dimension))
        s1 = score_matrix(m, probes)
        s2 = score_matrix(scaled, probes)
        assert np.array_equal(np.argsort(-s1, kind="stable"),
                              np.argsort(-s2, kind="stable"))


class TestScoreAndSerialization:
    def test_svm_score_is_dot_product(self):
        # oracle: w = [1, 0], standardized v = [2, ...] -> 2.0
        stats = StandardizationStats(mean=np.zeros(2), std=np.ones(2))
        m = Model(kind=RankerKind.SVM,
                  payload=SvmPayload(weights=np.array([1.0, 0.0]), bias=0.0),
                  stats=stats, config=FeatureConfig())
        assert score(m, np.array([2.0, 99.0])) == pytest.approx(2.0)

    def test_gbdt_zero_stages_scores_base(self):
        from testprio.rankers import GbdtParams

        ts = _separable_set()
        m = fit_gbdt(ts, GbdtParams(n_estimators=0))
        expected = np.log(np.mean(ts.y) / (1 - np.mean(ts.y)))
        got = score_matrix(m, ts.X)
        assert np.allclose(got, expected)

    def test_base_log_odds_clamped(self):
        from testprio.rankers import GbdtParams

        n = 30000
        y = np.zeros(n)
        y[0] = 1.0
        X = np.random.default_rng(0).normal(size=(n, 2))
        m = fit_gbdt(toy_training_set(X, y), GbdtParams(n_estimators=0))
        assert score(m, X[0]) == pytest.approx(-10.0)

    def test_ann_scores_within_unit_interval(self):
        ts = _separable_set(n=40)
        m = fit_ann(ts, default_params(RankerKind.ANN))
        s = score_matrix(m, np.random.default_rng(1).normal(size=(50, ts.dimension)))
        assert np.all((s > 0) & (s < 1))

    @pytest.mark.parametrize("fitter", [fit_svm, fit_gbdt, fit_ann, fit_lambdarank])
    def test_serialization_round_trip_scores_identically(self, fitter):
        groups = np.repeat(np.arange(6), 10)
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 4))
        y = (rng.random(60) < 0.4).astype(float)
        X[:, 0] += np.where(y > 0.5, 1.0, -1.0)
        ts = toy_training_set(X, y, groups)
        m = fitter(ts)
        restored = deserialize_model(serialize_model(m))
        probes = rng.normal(size=(25, 4))
        assert np.array_equal(score_matrix(m, probes), score_matrix(restored, probes))
        assert serialize_model(restored) == serialize_model(m)

    def test_constant_model_rank_falls_back_to_tie_rule(self):
        m = constant_model(RankerKind.SVM, FeatureConfig())
        ids = ["A", "B", "C"]
        rows = np.zeros((3, m.dimension))
        rs = rank_cycle(m, ids, {"A": 3.0, "B": 1.0, "C": 2.0}, rows)
        assert rs.test_ids == ("B", "C", "A")

    def test_rank_cycle_outputs_permutation_for_all_kinds(self, persistent_history):
        from testprio.features import build_training_set, feature_matrix

        w = slice_recent(persistent_history, 0.2)
        cfg = FeatureConfig()
        ts = build_training_set(w, cfg)
        ids = list(persistent_history.cycles[-1].test_ids)
        durations = {t: persistent_history.registry[t] for t in ids}
        rows = feature_matrix(w, ids, cfg)
        suites = [
            random_rank(ids, durations, 1),
            rocket_rank(w, durations),
        ]
        for fitter in (fit_svm, fit_gbdt, fit_ann, fit_lambdarank):
            suites.append(rank_cycle(fitter(ts), ids, durations, rows))
        for rs in suites:
            assert sorted(rs.test_ids) == sorted(ids)


def test_params_from_config():
    cfg = {"svm.epochs": "20", "svm.l2": "0.001", "gbdt.n_estimators": "10"}
    svm = params_from_config(RankerKind.SVM, cfg)
    assert svm.epochs == 20 and svm.l2 == 0.001
    gbdt = params_from_config(RankerKind.GBDT, cfg)
    assert gbdt.n_estimators == 10
    from testprio.errors import ConfigError

    with pytest.raises(ConfigError):
        params_from_config(RankerKind.SVM, {"svm.bogus": "1"})
