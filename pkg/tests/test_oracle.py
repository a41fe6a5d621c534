import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import colorgv_graph, graphs
from faithaudit.graph import Color, Graph, SubgraphRef, node_induced_subgraph
from faithaudit.metrics.core import distance, suffcause
from faithaudit.models import BrokenColorGV, DegenerateColorGV, FaithfulColorGV
from faithaudit.oracle import (
    CapExceeded,
    ExplanationClass,
    classify_explanation,
    count_supergraphs,
    enumerate_supergraphs,
    exact_ust,
    exact_ust_full,
    iter_supergraph_refs,
    verify_thm_suffcause,
)

EC = ExplanationClass


def only(g: Graph, color: Color) -> SubgraphRef:
    return node_induced_subgraph(g, g.nodes_of(color))


def brute_force_supergraphs(R: SubgraphRef) -> set:
    """Every (nodes, edges) pair with R <= G' <= G, by filtering the full power set."""
    g = R.parent
    edges = sorted(g.edges)
    out = set()
    for mask in range(2 ** g.n):
        nodes = frozenset(u for u in g.nodes if mask >> u & 1)
        if not R.nodes <= nodes:
            continue
        inside = [e for e in edges if e[0] in nodes and e[1] in nodes]
        for emask in range(2 ** len(inside)):
            es = frozenset(e for j, e in enumerate(inside) if emask >> j & 1)
            if R.edges <= es:
                out.add((nodes, es))
    return out


class TestEnumeration:
    def test_small_counts(self):
        g1 = Graph.build([Color.RED])
        assert count_supergraphs(g1.full()) == 1
        g2 = Graph.build([Color.RED, Color.BLUE])
        assert count_supergraphs(node_induced_subgraph(g2, [0])) == 2
        e2 = Graph.build([Color.RED, Color.BLUE], [(0, 1)])
        # {0}, {0,1}, {0,1}+edge, plus nothing else; with R = {0}
        assert count_supergraphs(node_induced_subgraph(e2, [0])) == 3
        # R = empty on one edge: {}, {0}, {1}, {0,1}, {0,1}+edge
        assert count_supergraphs(SubgraphRef(e2, frozenset(), frozenset())) == 5

    @settings(max_examples=60, deadline=None)
    @given(graphs(max_nodes=6), st.data())
    def test_enumeration_matches_power_set(self, g, data):
        nodes = data.draw(st.sets(st.sampled_from(list(g.nodes)), max_size=g.n)) if g.n else set()
        R = SubgraphRef(g, frozenset(nodes), frozenset())
        listed = [(s.nodes, s.edges) for s in iter_supergraph_refs(R)]
        assert len(listed) == len(set(listed))
        assert set(listed) == brute_force_supergraphs(R)
        assert count_supergraphs(R) == len(listed)

    def test_order_is_by_size(self):
        g = colorgv_graph(2, 1, [(0, 1), (1, 2)])
        sizes = [len(s.nodes) for s in iter_supergraph_refs(only(g, Color.GREEN))]
        assert sizes == sorted(sizes)

    def test_graphs_are_standalone(self):
        g = colorgv_graph(1, 1, [(0, 1)])
        out = list(enumerate_supergraphs(only(g, Color.GREEN), g))
        assert out[0].n == 1 and out[-1].n == g.n

    def test_nodes_only_is_one_per_node_set(self):
        g = colorgv_graph(2, 2, [(0, 1), (1, 2), (2, 3)])
        R = only(g, Color.GREEN)
        assert len(list(iter_supergraph_refs(R, nodes_only=True))) == 2 ** (g.n - 1)

    def test_cap(self):
        g = colorgv_graph(6, 6, [(i, i + 1) for i in range(11)])
        with pytest.raises(CapExceeded) as info:
            list(iter_supergraph_refs(only(g, Color.GREEN), cap=10))
        assert info.value.required == 13 + 11 and "--cap 24" in str(info.value)


class TestExactUST:
    def test_violet_positive(self):
        g = colorgv_graph(1, 2, [(0, 1), (1, 2)])
        ex = exact_ust_full(DegenerateColorGV(), g, only(g, Color.VIOLET))
        # {violet, green} has no blue majority, so the green anchor flips the label outright
        assert ex.value == 1.0 and ex.rejected
        # the bare explanation already lands in the uncertain band
        assert ex.witness.nodes == only(g, Color.VIOLET).nodes

    def test_green_negative_with_blue(self):
        g = colorgv_graph(2, 1, [(0, 1), (1, 2)])
        ex = exact_ust_full(DegenerateColorGV(), g, only(g, Color.GREEN))
        assert ex.rejected and ex.value == 1.0
        # smallest changing supergraph: green plus one blue node
        assert {g.colors[u] for u in ex.witness.nodes} == {Color.GREEN, Color.BLUE}

    def test_green_negative_red_only_is_stable(self):
        g = colorgv_graph(2, 0, [(0, 1)])
        assert exact_ust(DegenerateColorGV(), g, only(g, Color.GREEN)) == 0.0

    def test_shortcut_equals_full_enumeration(self, small_graphs):
        blind = DegenerateColorGV()
        full = DegenerateColorGV()
        full.uses_edges = True
        for g in small_graphs[:15]:
            R = blind.explain(g).subgraph
            a, b = exact_ust_full(blind, g, R), exact_ust_full(full, g, R)
            assert (a.value, a.rejected) == (b.value, b.rejected)
            assert b.n_candidates >= a.n_candidates

    @pytest.mark.parametrize("budget", [1, 5, 50])
    @pytest.mark.parametrize("seed", [0, 1])
    def test_sampled_never_exceeds_exact(self, small_graphs, budget, seed):
        model = DegenerateColorGV()
        for i, g in enumerate(small_graphs[:20]):
            R = model.explain(g).subgraph
            ex = exact_ust_full(model, g, R)
            s = suffcause(model, g, R, budget, seed, index=i)
            assert s.value <= ex.value
            assert not s.rejected or ex.rejected

    def test_large_budget_reaches_exact_on_tiny_graphs(self):
        model = DegenerateColorGV()
        g = colorgv_graph(2, 1, [(0, 1), (1, 2)])
        R = model.explain(g).subgraph
        assert suffcause(model, g, R, 2000, 0).value == exact_ust(model, g, R)


class TestTaxonomy:
    def test_green_on_negative_is_minimal_only(self):
        g = colorgv_graph(2, 1, [(0, 1), (1, 2)])
        assert classify_explanation(DegenerateColorGV(), g, only(g, Color.GREEN)) is EC.MINIMAL_ONLY

    def test_violet_on_positive_is_not_label_preserving(self):
        g = colorgv_graph(1, 2, [(0, 1), (1, 2)])
        assert classify_explanation(DegenerateColorGV(), g, only(g, Color.VIOLET)) is EC.NON_LABEL_PRESERVING

    def test_faithful_single_blue_is_prime_implicant(self):
        g = colorgv_graph(0, 1)
        R = FaithfulColorGV().explain(g).subgraph
        assert classify_explanation(FaithfulColorGV(), g, R) is EC.PRIME_IMPLICANT

    def test_superset_of_prime_implicant_is_other(self):
        g = colorgv_graph(0, 2, [(0, 1)])
        R = node_induced_subgraph(g, [0, 1])
        assert classify_explanation(FaithfulColorGV(), g, R) is EC.LABEL_PRESERVING_OTHER

    def test_empty_explanation_rejected(self):
        g = colorgv_graph(1, 1)
        with pytest.raises(ValueError):
            classify_explanation(FaithfulColorGV(), g, SubgraphRef(g, frozenset(), frozenset()))

    def test_prime_implicants_survive_heavy_sampling(self, small_graphs):
        model = FaithfulColorGV()
        found = 0
        for i, g in enumerate(small_graphs):
            R = model.explain(g).subgraph
            if R.is_empty() or classify_explanation(model, g, R) is not EC.PRIME_IMPLICANT:
                continue
            found += 1
            r = suffcause(model, g, R, 1000, 7, index=i)
            assert r.value == 0.0 and not r.rejected
        assert found > 0


class TestTheorem:
    def test_degenerate_and_faithful_pass(self, small_graphs):
        for model in (DegenerateColorGV(), FaithfulColorGV()):
            rep = verify_thm_suffcause(model, small_graphs)
            assert rep.passed, rep.violations
            assert sum(v.cls is not None for v in rep.verdicts) >= 40

    def test_faithful_classes(self, small_graphs):
        rep = verify_thm_suffcause(FaithfulColorGV(), small_graphs)
        for v in rep.verdicts:
            if v.cls is None:
                continue
            assert v.cls in (EC.PRIME_IMPLICANT, EC.LABEL_PRESERVING_OTHER)
            if v.cls is EC.PRIME_IMPLICANT:
                assert v.exact_ust == 0.0

    def test_broken_model_is_caught(self, small_graphs):
        rep = verify_thm_suffcause(BrokenColorGV(seed=0), small_graphs)
        assert not rep.passed

    def test_report_json(self, small_graphs):
        rep = verify_thm_suffcause(DegenerateColorGV(), small_graphs[:5])
        d = rep.to_json()
        assert d["n"] == 5 and d["passed"]
        assert {"class", "exact_ust", "witness"} <= set(d["verdicts"][0])
