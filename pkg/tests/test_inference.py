import itertools
import math

import numpy as np
import pytest
from scipy.stats import chi2

from causalgnn.graphs import Dag, Digraph, has_cycle_dfs
from causalgnn.inference import (EdgeProbabilities, TopologicalOrder,
                                 WeightedDigraph, dag_log_prob,
                                 graph_log_prob, induced_weighted_graph,
                                 load_edge_probabilities, ml_dag, ml_digraph,
                                 ml_ordering, msdag, sample_dag,
                                 sample_digraph, save_edge_probabilities)


def _probs(rows, d):
    return EdgeProbabilities(d, np.array(rows, dtype=np.float64))


def _random_probs(rng, d):
    raw = rng.random((d * (d - 1) // 2, 3)) + 0.05
    return EdgeProbabilities(d, raw / raw.sum(axis=1, keepdims=True))


def _all_digraphs(d):
    """Every digraph with at most one direction per pair: 3^(pairs)."""
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    for choice in itertools.product((-1, 0, 1), repeat=len(pairs)):
        edges = set()
        for c, (i, j) in zip(choice, pairs):
            if c == 1:
                edges.add((i, j))
            elif c == -1:
                edges.add((j, i))
        yield Digraph(d, frozenset(edges))


class TestEdgeProbabilities:
    def test_validates_sum(self):
        with pytest.raises(ValueError, match="sum"):
            _probs([[0.5, 0.5, 0.5]], 2)

    def test_validates_shape(self):
        with pytest.raises(ValueError, match="shape"):
            _probs([[1.0, 0.0, 0.0]], 3)

    def test_triple_lookup(self):
        p = _random_probs(np.random.default_rng(0), 4)
        assert np.array_equal(p.triple(1, 3), p.table[4])


class TestGraphLogProb:
    def test_distribution_normalizes(self):
        # oracle: summing exp(log p) over all 27 d=3 digraphs gives 1
        p = _random_probs(np.random.default_rng(1), 3)
        total = sum(math.exp(graph_log_prob(p, g)) for g in _all_digraphs(3))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_zero_probability_is_neg_inf(self):
        p = _probs([[0.0, 0.5, 0.5]], 2)
        assert graph_log_prob(p, Digraph(2, frozenset({(1, 0)}))) == -math.inf

    def test_two_cycle_rejected(self):
        p = _probs([[0.2, 0.3, 0.5]], 2)
        with pytest.raises(ValueError, match="both directions"):
            graph_log_prob(p, Digraph(2, frozenset({(0, 1), (1, 0)})))


class TestSampleDigraph:
    def test_frequencies_match_chi_squared(self):
        # frequency oracle: 30000 draws of one pair against its triple
        p = _probs([[0.2, 0.3, 0.5]], 2)
        rng = np.random.default_rng(2)
        counts = np.zeros(3)
        for _ in range(30000):
            g = sample_digraph(p, rng)
            if (0, 1) in g.edges:
                counts[2] += 1
            elif (1, 0) in g.edges:
                counts[0] += 1
            else:
                counts[1] += 1
        expected = np.array([0.2, 0.3, 0.5]) * 30000
        stat = float(np.sum((counts - expected) ** 2 / expected))
        assert stat < chi2.ppf(0.999, df=2)

    def test_degenerate_triple(self):
        p = _probs([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], 3)
        g = sample_digraph(p, np.random.default_rng(3))
        assert g.edges == frozenset({(0, 1), (2, 0)})


class TestMlDigraph:
    def test_argmax(self):
        p = _probs([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7], [0.2, 0.6, 0.2]], 3)
        g = ml_digraph(p)
        assert g.edges == frozenset({(1, 0), (0, 2)})

    def test_full_tie_no_edge(self):
        p = _probs([[1 / 3, 1 / 3, 1 / 3]], 2)
        assert ml_digraph(p).edges == frozenset()

    def test_none_fwd_tie_prefers_none(self):
        p = _probs([[0.1, 0.45, 0.45]], 2)
        assert ml_digraph(p).edges == frozenset()

    def test_fwd_rev_tie_prefers_fwd(self):
        p = _probs([[0.45, 0.1, 0.45]], 2)
        assert ml_digraph(p).edges == frozenset({(0, 1)})

    def test_is_global_argmax_by_enumeration(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            p = _random_probs(rng, 3)
            best = max(_all_digraphs(3), key=lambda g: graph_log_prob(p, g))
            assert graph_log_prob(p, ml_digraph(p)) == pytest.approx(
                graph_log_prob(p, best), abs=1e-12)


class TestInducedWeights:
    def test_placement(self):
        p = _probs([[0.2, 0.3, 0.5]], 2)
        w = induced_weighted_graph(p).w
        assert w[0, 1] == 0.5 and w[1, 0] == 0.2
        assert w[0, 0] == 0.0 and w[1, 1] == 0.0


class TestMsdag:
    def test_degenerate_weights_reproduced(self):
        # weights already encoding a DAG (all other weights 0) come back
        # exactly
        w = np.zeros((4, 4))
        w[0, 1] = 0.9
        w[1, 2] = 0.8
        w[0, 3] = 0.7
        dag = msdag(WeightedDigraph(4, w))
        assert dag.edges == frozenset({(0, 1), (1, 2), (0, 3)})

    def test_orientation_by_larger_weight(self):
        w = np.zeros((2, 2))
        w[0, 1] = 0.3
        w[1, 0] = 0.6
        assert msdag(WeightedDigraph(2, w)).edges == frozenset({(1, 0)})

    def test_cycle_weights_resolved_acyclically(self):
        # a 3-cycle of directed weights cannot survive: the lightest edge
        # must be dropped or reversed
        w = np.zeros((3, 3))
        w[0, 1] = 0.9
        w[1, 2] = 0.8
        w[2, 0] = 0.7
        dag = msdag(WeightedDigraph(3, w))
        assert (0, 1) in dag.edges and (1, 2) in dag.edges
        assert (2, 0) not in dag.edges

    def test_always_acyclic_random(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            w = rng.random((6, 6))
            np.fill_diagonal(w, 0.0)
            dag = msdag(WeightedDigraph(6, w))
            assert not has_cycle_dfs(6, dag.edges)

    def test_zero_weights_give_empty(self):
        dag = msdag(WeightedDigraph(3, np.zeros((3, 3))))
        assert dag.edges == frozenset()


class TestMlOrdering:
    def test_chain(self):
        p = _probs([[0.05, 0.05, 0.9],   # 0 -> 1
                    [0.1, 0.8, 0.1],     # 0 ? 2
                    [0.05, 0.05, 0.9]],  # 1 -> 2
                   3)
        assert ml_ordering(p).order == (0, 1, 2)

    def test_tie_breaks_by_index(self):
        p = _probs([[1 / 3, 1 / 3, 1 / 3]] * 3, 3)
        assert ml_ordering(p).order == (0, 1, 2)

    def test_position_inverse(self):
        order = TopologicalOrder((2, 0, 1))
        assert order.position == {2: 0, 0: 1, 1: 2}

    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError):
            TopologicalOrder((0, 0, 1))


class TestSampleDag:
    def test_renormalized_frequency(self):
        # renormalization oracle: (0.25 rev, 0.5 none, 0.25 fwd) under
        # order (0, 1) includes 0->1 with probability 0.25/(0.25+0.5) = 1/3
        p = _probs([[0.25, 0.5, 0.25]], 2)
        order = TopologicalOrder((0, 1))
        rng = np.random.default_rng(6)
        n = 30000
        hits = sum((0, 1) in sample_dag(p, order, rng).edges
                   for _ in range(n))
        se = math.sqrt((1 / 3) * (2 / 3) / n)
        assert abs(hits / n - 1 / 3) < 4 * se

    def test_respects_ordering(self):
        rng = np.random.default_rng(7)
        p = _random_probs(rng, 5)
        order = ml_ordering(p)
        pos = order.position
        for _ in range(200):
            dag = sample_dag(p, order, rng)
            assert not has_cycle_dfs(5, dag.edges)
            assert all(pos[a] < pos[b] for a, b in dag.edges)

    def test_zero_mass_pair_never_sampled(self):
        p = _probs([[0.0, 1.0, 0.0]], 2)
        order = TopologicalOrder((0, 1))
        rng = np.random.default_rng(8)
        assert all(sample_dag(p, order, rng).edges == frozenset()
                   for _ in range(100))


def _order_compatible_dags(d, order):
    pos = order.position
    pairs = [(a, b) for a in range(d) for b in range(d)
             if a != b and pos[a] < pos[b]]
    for mask in itertools.product((False, True), repeat=len(pairs)):
        yield Dag(d, frozenset(p for keep, p in zip(mask, pairs) if keep))


class TestMlDag:
    def test_threshold(self):
        p = _probs([[0.1, 0.3, 0.6], [0.1, 0.6, 0.3], [0.4, 0.2, 0.4]], 3)
        order = TopologicalOrder((0, 1, 2))
        # pair (0,1): 0.6/0.9 > 0.5 include; (0,2): 0.3/0.9 < 0.5 skip;
        # (1,2): 0.4/0.6 > 0.5 include
        assert ml_dag(p, order).edges == frozenset({(0, 1), (1, 2)})

    def test_exact_half_excluded(self):
        p = _probs([[0.3, 0.3, 0.4]], 2)
        order = TopologicalOrder((0, 1))
        # renormalized exactly 0.4/(0.4+0.3) > 0.5? 0.5714 -> included
        assert ml_dag(p, order).edges == frozenset({(0, 1)})
        p2 = _probs([[0.4, 0.3, 0.3]], 2)
        # renormalized 0.3/0.6 == 0.5 -> excluded
        assert ml_dag(p2, order).edges == frozenset()

    def test_optimal_by_enumeration(self):
        # optimality oracle: the ML DAG attains the maximum renormalized
        # log-probability over every ordering-compatible DAG
        rng = np.random.default_rng(9)
        for _ in range(10):
            p = _random_probs(rng, 4)
            order = ml_ordering(p)
            best = max(dag_log_prob(p, dag, order)
                       for dag in _order_compatible_dags(4, order))
            got = dag_log_prob(p, ml_dag(p, order), order)
            assert got == pytest.approx(best, abs=1e-12)


class TestDagLogProb:
    def test_ordering_violation_rejected(self):
        p = _probs([[0.2, 0.3, 0.5]], 2)
        with pytest.raises(ValueError, match="ordering"):
            dag_log_prob(p, Dag(2, frozenset({(1, 0)})),
                         TopologicalOrder((0, 1)))

    def test_renormalized_distribution_sums_to_one(self):
        p = _random_probs(np.random.default_rng(10), 3)
        order = ml_ordering(p)
        total = sum(math.exp(dag_log_prob(p, dag, order))
                    for dag in _order_compatible_dags(3, order))
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_unnormalized_variant(self):
        p = _probs([[0.2, 0.3, 0.5]], 2)
        order = TopologicalOrder((0, 1))
        dag = Dag(2, frozenset({(0, 1)}))
        assert dag_log_prob(p, dag, order, renormalize=False) == pytest.approx(
            math.log(0.5), abs=1e-12)
        assert dag_log_prob(p, dag, order) == pytest.approx(
            math.log(0.5 / 0.8), abs=1e-12)


class TestSerialization:
    def test_roundtrip_bit_exact(self, tmp_path):
        p = _random_probs(np.random.default_rng(11), 5)
        path = str(tmp_path / "probs.txt")
        save_edge_probabilities(p, path)
        back = load_edge_probabilities(path)
        assert back.d == 5
        assert np.array_equal(back.table, p.table)

    def test_missing_header(self, tmp_path):
        path = tmp_path / "probs.txt"
        path.write_text("0,1,0.2,0.3,0.5\n")
        with pytest.raises(ValueError, match="header"):
            load_edge_probabilities(str(path))
