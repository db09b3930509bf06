import math

import numpy as np
import pytest

from causalgnn.dataset import DataMatrix
from causalgnn.featuregraph import (EDGE_DIM, NODE_DIM, FeatureGraph,
                                    build_feature_graph,
                                    permute_feature_graph, row_pairs)
from causalgnn.gnn import (ModelConfig, ModelFileError, ModelParams,
                           OptimizerSettings, SchemaMismatchError,
                           TrainingDivergedError, class_weights,
                           edge_labels_from_dag, forward, init_params,
                           load_params, loss, loss_and_gradient, save_params,
                           train)
from causalgnn.graphs import Dag
from causalgnn.synthgen import CorpusSpec, SemConfig, gen_corpus, sample_sem


def _random_graph(seed, d=4, n=80):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(n, d))
    vals[:, 1] += 0.7 * np.tanh(vals[:, 0])
    data = DataMatrix(vals, tuple(f"x{i}" for i in range(d)))
    return build_feature_graph(data)


def _random_fg(seed, d=4):
    # synthetic feature tensors, bypassing the extractors, for fast checks
    rng = np.random.default_rng(seed)
    return FeatureGraph(d, rng.normal(size=(d, NODE_DIM)),
                        rng.normal(size=(d * (d - 1) // 2, EDGE_DIM)))


SMALL = ModelConfig(num_layers=2, hidden_dim=8, seed=1)


class TestEdgeLabels:
    def test_orientations(self):
        dag = Dag(3, frozenset({(0, 1), (2, 1)}))
        assert list(edge_labels_from_dag(dag)) == [1, 0, -1]

    def test_empty(self):
        assert list(edge_labels_from_dag(Dag(4, frozenset()))) == [0] * 6


class TestForward:
    def test_probability_rows(self):
        params = init_params(SMALL, "efs-1")
        probs = forward(params, _random_fg(0))
        assert probs.table.shape == (6, 3)
        assert np.allclose(probs.table.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(probs.table >= 0.0)

    def test_zero_head_uniform(self):
        params = init_params(SMALL, "efs-1")
        params.tensors["w_head"][:] = 0.0
        params.tensors["b_head"][:] = 0.0
        probs = forward(params, _random_fg(1))
        assert np.allclose(probs.table, 1.0 / 3.0, atol=1e-12)

    def test_schema_mismatch(self):
        params = init_params(SMALL, "other-schema")
        with pytest.raises(SchemaMismatchError):
            forward(params, _random_fg(2))

    def test_equivariance_under_relabeling(self):
        # relabeling nodes must permute the per-pair triples exactly,
        # with rev/fwd swapped where the canonical order flips
        params = init_params(SMALL, "efs-1")
        fg = _random_graph(3, d=5, n=60)
        perm = [3, 0, 4, 1, 2]
        base = forward(params, fg).table
        moved = forward(params, permute_feature_graph(fg, perm)).table
        pairs = row_pairs(5)
        for k, (i, j) in enumerate(pairs):
            a, b = perm[i], perm[j]
            if a < b:
                expect = base[k]
            else:
                a, b = b, a
                expect = base[k][::-1]
            got = moved[pairs.index((a, b))]
            assert np.allclose(got, expect, atol=1e-9)

    def test_deterministic(self):
        params = init_params(SMALL, "efs-1")
        fg = _random_fg(4)
        assert np.array_equal(forward(params, fg).table,
                              forward(params, fg).table)


class TestLoss:
    def test_uniform_probs_ln3(self):
        params = init_params(SMALL, "efs-1")
        params.tensors["w_head"][:] = 0.0
        params.tensors["b_head"][:] = 0.0
        probs = forward(params, _random_fg(5))
        labels = np.array([1, 0, -1, 0, 0, 1])
        assert loss(probs, labels) == pytest.approx(math.log(3), abs=1e-12)

    def test_weighted_hand_case(self):
        # two pairs with uniform probs, weights (2, 1, 1), labels (-1, 0):
        # mean of (2 ln 3, 1 ln 3) = 1.5 ln 3
        from causalgnn.inference import EdgeProbabilities
        probs = EdgeProbabilities(2, np.full((1, 3), 1.0 / 3.0))
        probs3 = EdgeProbabilities(3, np.full((3, 3), 1.0 / 3.0))
        del probs
        val = loss(probs3, np.array([-1, 0, 0]), np.array([2.0, 1.0, 1.0]))
        assert val == pytest.approx((2 + 1 + 1) / 3 * math.log(3), abs=1e-12)

    def test_perfect_prediction_near_zero(self):
        from causalgnn.inference import EdgeProbabilities
        table = np.array([[1e-9, 1e-9, 1.0 - 2e-9]])
        probs = EdgeProbabilities(2, table / table.sum())
        assert loss(probs, np.array([1])) < 1e-8


class TestGradient:
    def test_finite_difference(self):
        params = init_params(ModelConfig(num_layers=2, hidden_dim=6, seed=7),
                             "efs-1")
        fg = _random_fg(6)
        labels = np.array([1, -1, 0, 0, 1, -1])
        weights = np.array([1.5, 0.7, 1.0])
        _, grads = loss_and_gradient(params, fg, labels, weights)
        rng = np.random.default_rng(8)
        eps = 1e-6
        for name, arr in params.tensors.items():
            flat = arr.reshape(-1)
            for _ in range(5):
                k = rng.integers(flat.size)
                orig = flat[k]
                flat[k] = orig + eps
                up = loss(forward(params, fg), labels, weights)
                flat[k] = orig - eps
                dn = loss(forward(params, fg), labels, weights)
                flat[k] = orig
                fd = (up - dn) / (2 * eps)
                an = grads[name].reshape(-1)[k]
                assert an == pytest.approx(fd, abs=1e-5, rel=1e-4), name

    def test_zero_weights_zero_gradient(self):
        params = init_params(SMALL, "efs-1")
        fg = _random_fg(9)
        labels = np.array([0, 0, 0, 0, 0, 0])
        _, grads = loss_and_gradient(params, fg, labels,
                                     np.array([1.0, 0.0, 1.0]))
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_loss_matches_forward(self):
        params = init_params(SMALL, "efs-1")
        fg = _random_fg(10)
        labels = np.array([1, 0, -1, 1, 0, 0])
        val, _ = loss_and_gradient(params, fg, labels)
        assert val == pytest.approx(loss(forward(params, fg), labels),
                                    abs=1e-12)


class TestClassWeights:
    def test_balanced_uniform(self):
        labels = [np.array([-1, 0, 1])]
        assert np.allclose(class_weights(labels, "inverse-frequency"),
                           np.ones(3))

    def test_inverse_frequency_hand(self):
        # counts (1, 2, 1): w = 4 / (3 * counts)
        labels = [np.array([-1, 0, 0, 1])]
        w = class_weights(labels, "inverse-frequency")
        assert np.allclose(w, [4 / 3, 4 / 6, 4 / 3])

    def test_uniform_mode(self):
        assert np.array_equal(class_weights([np.array([0, 0])], "uniform"),
                              np.ones(3))


def _overfit_corpus():
    rng = np.random.default_rng(30)
    dag = Dag(6, frozenset({(0, 1), (1, 2), (0, 3), (3, 4), (2, 5)}))
    data = sample_sem(dag, 200, SemConfig(), rng)
    return [(build_feature_graph(data), edge_labels_from_dag(dag))]


class TestTrain:
    def test_loss_decreases_single_graph(self):
        corpus = _overfit_corpus()
        cfg = ModelConfig(num_layers=2, hidden_dim=32, seed=0)
        _, log = train(corpus, cfg,
                       OptimizerSettings(learning_rate=3e-3, epochs=200))
        assert log[-1] < 0.2 * log[0]

    def test_deterministic(self):
        corpus = _overfit_corpus()
        cfg = ModelConfig(num_layers=1, hidden_dim=8, seed=3)
        a, log_a = train(corpus, cfg, OptimizerSettings(epochs=5))
        b, log_b = train(corpus, cfg, OptimizerSettings(epochs=5))
        assert log_a == log_b
        assert all(np.array_equal(a.tensors[k], b.tensors[k])
                   for k in a.tensors)

    def test_empty_corpus(self):
        with pytest.raises(ValueError):
            train([], SMALL)

    def test_mixed_schema_rejected(self):
        fg_a = _random_fg(11)
        fg_b = FeatureGraph(fg_a.d, fg_a.node_feats, fg_a.edge_feats, "other")
        labels = np.zeros(6, dtype=np.int64)
        with pytest.raises(SchemaMismatchError):
            train([(fg_a, labels), (fg_b, labels)], SMALL)

    def test_divergence_detected(self, monkeypatch):
        import causalgnn.gnn as gnn_mod
        monkeypatch.setattr(gnn_mod, "loss_and_gradient",
                            lambda *a, **k: (float("nan"), {}))
        fg = _random_fg(13)
        labels = np.zeros(6, dtype=np.int64)
        with pytest.raises(TrainingDivergedError):
            train([(fg, labels)], SMALL, OptimizerSettings(epochs=1))


class TestSerialization:
    def test_roundtrip_identical_forward(self, tmp_path):
        cfg = ModelConfig(num_layers=2, hidden_dim=8, seed=5)
        params = init_params(cfg, "efs-1")
        path = str(tmp_path / "model.txt")
        save_params(params, path)
        back = load_params(path)
        assert back.config == cfg
        assert back.schema_version == "efs-1"
        fg = _random_fg(12)
        assert np.array_equal(forward(params, fg).table,
                              forward(back, fg).table)

    def test_truncated_rejected(self, tmp_path):
        params = init_params(SMALL, "efs-1")
        path = tmp_path / "model.txt"
        save_params(params, str(path))
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(ModelFileError, match="truncated"):
            load_params(str(path))

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("version=1\nnot-a-field\n")
        with pytest.raises(ModelFileError):
            load_params(str(path))

    def test_wrong_version_rejected(self, tmp_path):
        params = init_params(SMALL, "efs-1")
        path = tmp_path / "model.txt"
        save_params(params, str(path))
        path.write_text(path.read_text().replace("version=1", "version=99", 1))
        with pytest.raises(ModelFileError, match="version"):
            load_params(str(path))


class TestConfigValidation:
    def test_bad_layers(self):
        with pytest.raises(ValueError):
            ModelConfig(num_layers=0)

    def test_bad_activation(self):
        with pytest.raises(ValueError):
            ModelConfig(activation="tanh")

    def test_bad_weights_mode(self):
        with pytest.raises(ValueError):
            ModelConfig(class_weights_mode="other")
