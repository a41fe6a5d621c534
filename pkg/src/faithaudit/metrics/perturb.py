"""Perturbation families used by the faithfulness metrics.

Each family returns a list of ``(graph, descriptor)`` pairs; descriptors are
small JSON-ready dicts that end up in the per-sample audit trace.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from faithaudit.graph import Explanation, Graph, SubgraphRef, node_induced_subgraph, norm_edge


class FamilyError(ValueError):
    pass


KINDS = (
    "explanation_removal",
    "complement_removal",
    "edge_removal",
    "complement_swap",
    "score_gaussian",
    "supergraph_sample",
)


@dataclass(frozen=True)
class PerturbationFamily:
    kind: str
    budget: int = 50
    p: float = 0.0
    target: str = "complement"
    n_remove: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise FamilyError(f"unknown perturbation kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise FamilyError(f"p must lie in [0, 1], got {self.p}")
        if self.budget < 1:
            raise FamilyError("budget must be >= 1")
        if self.target not in ("explanation", "complement"):
            raise FamilyError(f"unknown target {self.target!r}")


Perturbed = tuple[Graph, dict]


def complement_graph(R: SubgraphRef) -> Graph:
    g = R.parent
    return node_induced_subgraph(g, set(g.nodes) - R.nodes).to_graph()


def remove_complement(R: SubgraphRef) -> list[Perturbed]:
    return [(R.to_graph(), {"kind": "complement_removal"})]


def remove_explanation(R: SubgraphRef) -> list[Perturbed]:
    return [(complement_graph(R), {"kind": "explanation_removal"})]


def random_edge_removal(R: SubgraphRef, p: float, target: str, budget: int, rng: np.random.Generator) -> list[Perturbed]:
    """Drop each edge of the target region independently with probability ``p``; nodes stay."""
    g = R.parent
    region = sorted(R.edges) if target == "explanation" else sorted(g.edges - R.edges)
    out = []
    for i in range(budget):
        drop = rng.random(len(region)) < p
        removed = {e for e, d in zip(region, drop) if d}
        out.append((Graph(g.colors, g.edges - removed, None, g.attrs), {"i": i, "removed": len(removed)}))
    return out


def fixed_edge_removal(R: SubgraphRef, k: int, budget: int, rng: np.random.Generator) -> list[Perturbed]:
    """Remove exactly ``min(k, |E(R)|)`` uniformly chosen explanation edges per sample."""
    g = R.parent
    region = sorted(R.edges)
    k = min(k, len(region))
    out = []
    for i in range(budget):
        pick = rng.choice(len(region), size=k, replace=False) if k else []
        removed = {region[j] for j in pick}
        out.append((Graph(g.colors, g.edges - removed, None, g.attrs), {"i": i, "removed": len(removed)}))
    return out


def complement_swap(
    R: SubgraphRef,
    donors: Sequence[Explanation],
    budget: int,
    rng: np.random.Generator,
) -> list[Perturbed]:
    """Keep R, replace the complement with a donor's, re-wire up to the original edge count.

    New edges are drawn uniformly among the missing explanation-complement pairs.
    """
    if not donors:
        raise FamilyError("complement swap needs a non-empty donor pool")
    g = R.parent
    r_nodes = sorted(R.nodes)
    k = len(r_nodes)
    out = []
    for i in range(budget):
        d = int(rng.integers(len(donors)))
        donor = donors[d]
        comp = complement_graph(donor.subgraph)
        colors = tuple(g.colors[u] for u in r_nodes) + comp.colors
        attrs = None
        if g.attrs is not None and comp.attrs is not None:
            attrs = tuple(g.attrs[u] for u in r_nodes) + comp.attrs
        remap = {u: j for j, u in enumerate(r_nodes)}
        edges = {norm_edge(remap[u], remap[v]) for u, v in R.edges}
        edges |= {norm_edge(u + k, v + k) for u, v in comp.edges}
        missing = len(g.edges) - len(edges)
        pairs = [(a, b + k) for a in range(k) for b in range(comp.n)]
        added = 0
        if missing > 0 and pairs:
            sel = rng.choice(len(pairs), size=min(missing, len(pairs)), replace=False)
            edges |= {pairs[j] for j in sel}
            added = len(sel)
        out.append((Graph(colors, frozenset(edges), None, attrs), {"i": i, "donor": d, "added": added}))
    return out


def sample_supergraph(R: SubgraphRef, rng: np.random.Generator) -> SubgraphRef:
    """One draw of the uniform sufficiency test: random nodes, then random edges, R forced in."""
    g = R.parent
    w = rng.random(g.n)
    w[list(R.nodes)] = 1.0
    kept = frozenset(int(u) for u in np.flatnonzero(w >= 0.5))
    induced = sorted(node_induced_subgraph(g, kept).edges)
    we = rng.random(len(induced))
    keep_e = frozenset(e for e, x in zip(induced, we) if x >= 0.5 or e in R.edges)
    return SubgraphRef(g, kept, keep_e)


def supergraph_samples(R: SubgraphRef, budget: int, rng: np.random.Generator) -> list[SubgraphRef]:
    """Bare R first, then ``budget - 1`` random supergraphs R <= G' <= G."""
    return [R] + [sample_supergraph(R, rng) for _ in range(budget - 1)]


def supergraph_sample(R: SubgraphRef, budget: int, rng: np.random.Generator) -> list[Perturbed]:
    return [(s.to_graph(), {"i": i, "nodes": sorted(s.nodes), "edges": len(s.edges)})
            for i, s in enumerate(supergraph_samples(R, budget, rng))]


def gaussian_scores(scores: np.ndarray, budget: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Additive noise drawn from N(mean, std) of the instance's own scores, clipped to [0, 1]."""
    mu = float(scores.mean()) if scores.size else 0.0
    sd = float(scores.std(ddof=1)) if scores.size > 1 else 0.0
    return [np.clip(scores + rng.normal(mu, sd, scores.shape), 0.0, 1.0) for _ in range(budget)]
