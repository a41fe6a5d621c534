import math

import numpy as np
import pytest
from hypothesis import given

from faithaudit.datasets import MotifAnchorsConfig, gen_motif_anchors
from faithaudit.graph import Color, Graph, Threshold, select_explanation
from faithaudit.models import (
    BrokenColorGV,
    DegenerateColorGV,
    DegenerateMotif,
    FaithfulColorGV,
    GSATScored,
    ModelError,
    Prediction,
    analytic_model,
    permuted_degenerate,
)
from faithaudit.models.objectives import (
    gsat_graph_value,
    gsat_objective_value,
    smgnn_graph_value,
    smgnn_objective_value,
)
from faithaudit.motifs import MOTIFS

from conftest import colorgv_graph, graphs

R, B, N, GREEN, VIOLET = Color.RED, Color.BLUE, Color.NEUTRAL, Color.GREEN, Color.VIOLET


class TestPrediction:
    def test_must_sum_to_one(self):
        with pytest.raises(ModelError):
            Prediction((0.5, 0.6))

    def test_ties_go_to_lower_index(self):
        assert Prediction.uniform().label == 0

    def test_hard(self):
        assert Prediction.hard(1).probs == (0.0, 1.0)


class TestDegenerate:
    def test_blue_majority_selects_violet(self):
        g = colorgv_graph(3, 5)
        scores, expl, pred = DegenerateColorGV().forward(g)
        assert expl.nodes == set(g.nodes_of(VIOLET))
        assert pred.probs == (0.0, 1.0)

    def test_tie_selects_green(self):
        g = colorgv_graph(2, 2)
        _, expl, pred = DegenerateColorGV().forward(g)
        assert expl.nodes == set(g.nodes_of(GREEN))
        assert pred.probs == (1.0, 0.0)

    def test_violet_alone_is_uncertain(self):
        assert DegenerateColorGV().predict(Graph.build([VIOLET])).probs == (0.5, 0.5)

    def test_missing_anchor_is_uncertain(self):
        g = Graph.build([B, B, R, GREEN])
        assert DegenerateColorGV().predict(g).probs == (0.5, 0.5)

    def test_perfect_accuracy(self, test_split):
        assert all(DegenerateColorGV().predict(g).label == g.label for g in test_split)

    def test_ignores_edges(self, test_split):
        m = DegenerateColorGV()
        for g in test_split[:50]:
            assert m.predict(Graph(g.colors)) == m.predict(g)


class TestPermuted:
    def test_identity_matches(self, test_split):
        a, b = DegenerateColorGV(), permuted_degenerate((0, 1))
        for g in test_split[:100]:
            assert a.forward(g)[1].nodes == b.forward(g)[1].nodes
            assert a.predict(g) == b.predict(g)

    def test_swap_on_blue_majority(self):
        g = colorgv_graph(3, 5)
        _, expl, pred = permuted_degenerate((1, 0)).forward(g)
        assert expl.nodes == set(g.nodes_of(GREEN))
        assert pred.probs == (0.0, 1.0)

    @given(graphs(max_nodes=10, colors=(R, B), anchors=True))
    def test_swap_agrees_on_argmax(self, g):
        assert permuted_degenerate((1, 0)).predict(g).label == DegenerateColorGV().predict(g).label

    def test_rejects_non_bijection(self):
        with pytest.raises(ValueError):
            DegenerateColorGV((0, 0))


class TestFaithful:
    def test_selects_majority(self):
        g = colorgv_graph(3, 5)
        _, expl, pred = FaithfulColorGV().forward(g)
        assert expl.nodes == set(g.nodes_of(B)) and pred.probs == (0.0, 1.0)

    @given(graphs(max_nodes=10, colors=(R, B), anchors=True))
    def test_explanation_alone_keeps_label(self, g):
        m = FaithfulColorGV()
        expl = m.explain(g)
        if expl.nodes:
            assert m.predict(expl.subgraph.to_graph()).label == m.predict(g).label

    def test_empty_graph(self):
        _, expl, pred = FaithfulColorGV().forward(colorgv_graph(0, 0))
        assert expl.empty and pred.probs == (1.0, 0.0)


def motif_graph(red: int, blue: int, motifs: list[str]) -> Graph:
    colors = [R] * red + [B] * blue
    edges = []
    for name in motifs:
        start = len(colors)
        colors += [N] * len(MOTIFS[name])
        edges += [(start + u, start + v) for u in MOTIFS[name] for v in MOTIFS[name][u] if u < v]
        edges.append((0, start))
    return Graph.build(colors, edges)


class TestDegenerateMotif:
    def test_positive_prefers_triangle(self):
        g = motif_graph(1, 3, ["clique", "star", "triangle"])
        _, expl, pred = DegenerateMotif().forward(g)
        assert len(expl.nodes) == 3 and pred.label == 1

    def test_negative_selects_clique(self):
        g = motif_graph(3, 1, ["clique", "star", "triangle"])
        _, expl, pred = DegenerateMotif().forward(g)
        assert len(expl.nodes) == 6 and pred.label == 0

    def test_star_only(self):
        g = motif_graph(1, 3, ["clique", "star"])
        _, expl, pred = DegenerateMotif().forward(g)
        assert len(expl.nodes) == 4 and pred.label == 1

    def test_missing_partition_is_uncertain(self):
        g = motif_graph(1, 3, ["clique"])
        _, expl, pred = DegenerateMotif().forward(g)
        assert expl.empty and pred.probs == (0.5, 0.5)

    def test_accuracy_on_dataset(self):
        ds = gen_motif_anchors(MotifAnchorsConfig(n_graphs=200))
        assert all(DegenerateMotif().predict(g).label == g.label for g in ds.graphs)


class TestPipelineLaw:
    @pytest.mark.parametrize("name", ["degenerate", "degenerate-swap", "faithful"])
    def test_predict_is_classify_of_selection(self, name, test_split):
        m = analytic_model(name)
        for g in test_split[:60]:
            scores = m.extract(g)
            expl = select_explanation(scores, Threshold(0.5), g)
            assert m.predict(g) == m.classify(g, scores, expl)
            assert m.predict(g) == m.predict(g)

    def test_unknown_analytic_name(self):
        with pytest.raises(KeyError):
            analytic_model("nope")

    def test_broken_model_is_not_a_function(self):
        m = BrokenColorGV(0)
        g = colorgv_graph(3, 5)
        assert len({m.predict(g).label for _ in range(40)}) == 2


def gsat_direct(scores: np.ndarray, pred: Prediction, y: int, r: float, lam1: float) -> float:
    """Term-by-term summation with the 0 log 0 = 0 convention."""
    total = -math.log(max(pred.probs[y], 1e-12))
    for p in scores:
        kl = 0.0
        if p > 0:
            kl += p * math.log(p / r)
        if p < 1:
            kl += (1 - p) * math.log((1 - p) / (1 - r))
        total += lam1 * kl
    return total


class TestObjectives:
    def test_gsat_degenerate_closed_form(self, test_split):
        m = GSATScored(DegenerateColorGV(), 0.3)
        val = gsat_objective_value(m, test_split, 0.3, 0.1)
        assert val == pytest.approx(-0.1 * math.log(0.3), abs=1e-12)
        assert round(val, 5) == 0.12040

    def test_gsat_matches_direct_sum(self, test_split):
        m = GSATScored(FaithfulColorGV(), 0.3)
        for g in test_split[:40]:
            scores, _, pred = m.forward(g)
            if not m.explain(g).empty:
                assert gsat_graph_value(m, g, 0.3, 0.1) == pytest.approx(
                    gsat_direct(scores.values, pred, g.label, 0.3, 0.1), abs=1e-12)

    def test_gsat_faithful_k_nodes(self):
        g = colorgv_graph(3, 5)
        val = gsat_graph_value(GSATScored(FaithfulColorGV(), 0.3), g, 0.3, 0.1)
        assert val == pytest.approx(-0.1 * 5 * math.log(0.3))
        assert val > -0.1 * math.log(0.3)

    def test_gsat_rejects_all_r_scores(self):
        g = colorgv_graph(0, 0)
        with pytest.raises(ModelError):
            gsat_graph_value(GSATScored(FaithfulColorGV(), 0.3), g, 0.3, 0.1)

    @pytest.mark.parametrize("r", [0.0, 1.0, -0.2])
    def test_gsat_r_domain(self, r, test_split):
        with pytest.raises(ValueError):
            gsat_objective_value(DegenerateColorGV(), test_split[:2], r, 0.1)

    def test_gsat_requires_prior_scores(self, test_split):
        # raw degenerate scores are {0, 1}, not {r, 1}
        with pytest.raises(ModelError):
            gsat_objective_value(DegenerateColorGV(), test_split[:2], 0.3, 0.1)

    def test_smgnn_degenerate_closed_form(self):
        g = colorgv_graph(40, 60)
        assert g.n == 102
        val = smgnn_graph_value(DegenerateColorGV(), g, 0.4, 1.0)
        assert val == pytest.approx(0.4 / 102, abs=1e-15)
        assert round(val, 7) == 0.0039216

    def test_smgnn_faithful_small_graph(self):
        g = colorgv_graph(3, 5)
        assert smgnn_graph_value(FaithfulColorGV(), g, 0.4, 1.0) == pytest.approx(0.2)

    def test_smgnn_entropy_vanishes_for_binary_scores(self, test_split):
        for m in (DegenerateColorGV(), FaithfulColorGV()):
            for g in test_split[:30]:
                if not m.explain(g).empty:
                    assert smgnn_graph_value(m, g, 0.0, 5.0) == pytest.approx(0.0, abs=1e-12)

    def test_optimality_gap_over_zoo(self, test_split):
        graphs_ = [g for g in test_split if g.count(R) + g.count(B) > 0]
        deg = smgnn_objective_value(DegenerateColorGV(), graphs_, 0.4, 1.0)
        for m in (FaithfulColorGV(), permuted_degenerate((1, 0))):
            assert deg <= smgnn_objective_value(m, graphs_, 0.4, 1.0) + 1e-15
        gdeg = gsat_objective_value(GSATScored(DegenerateColorGV(), 0.3), graphs_, 0.3, 0.1)
        for base in (FaithfulColorGV(), permuted_degenerate((1, 0))):
            assert gdeg <= gsat_objective_value(GSATScored(base, 0.3), graphs_, 0.3, 0.1) + 1e-15

    def test_wrong_prediction_costs_cross_entropy(self):
        g = colorgv_graph(3, 5)
        # label the graph wrongly: the degenerate model is then maximally wrong
        val = smgnn_graph_value(DegenerateColorGV(), g.with_label(0), 0.0, 0.0)
        assert val == pytest.approx(-math.log(1e-12))
