"""Hand-built SE-GNNs realizing the degenerate, permuted and faithful constructions."""

from __future__ import annotations

import numpy as np

from faithaudit.datasets import MOTIF_PARTITION, label_bacolorgv
from faithaudit.graph import Color, Explanation, Graph, RelevanceScores
from faithaudit.models.base import SEGNN, Prediction
from faithaudit.motifs import MOTIF_SIZE, motif_occurrences, motif_of

ANCHOR_COLORS = (Color.GREEN, Color.VIOLET)


def _indicator(g: Graph, nodes) -> RelevanceScores:
    v = np.zeros(g.n)
    v[list(nodes)] = 1.0
    return RelevanceScores(v)


class DegenerateColorGV(SEGNN):
    """Encodes the label in which anchor node is highlighted.

    The extractor picks ``anchors[perm[y]]`` with ``y`` the red/blue majority
    label (ties count as class 0); the classifier decodes ``anchors[k]`` back
    to ``perm^-1(k)`` and is maximally uncertain on anything else.
    """

    uses_edges = False

    def __init__(self, perm: tuple[int, int] = (0, 1), anchors: tuple[Color, Color] = ANCHOR_COLORS):
        if sorted(perm) != [0, 1]:
            raise ValueError(f"perm must be a bijection on labels, got {perm}")
        self.perm = tuple(perm)
        self.inverse = tuple(perm.index(k) for k in range(2))
        self.anchors = tuple(anchors)
        self.name = "degenerate" if self.perm == (0, 1) else f"degenerate-perm{self.perm[0]}{self.perm[1]}"

    def extract(self, g: Graph) -> RelevanceScores:
        target = self.anchors[self.perm[label_bacolorgv(g)]]
        return _indicator(g, g.nodes_of(target))

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        nodes = expl.nodes
        if len(nodes) == 1:
            (u,) = nodes
            c = g.colors[u]
            if c in self.anchors:
                return Prediction.hard(self.inverse[self.anchors.index(c)])
        return Prediction.uniform()

    def describe(self) -> dict:
        return {"name": self.name, "perm": list(self.perm)}


def permuted_degenerate(perm: tuple[int, int]) -> DegenerateColorGV:
    return DegenerateColorGV(perm)


class FaithfulColorGV(SEGNN):
    """Highlights the majority color; the classifier recounts on the explanation."""

    name = "faithful"
    uses_edges = False

    def extract(self, g: Graph) -> RelevanceScores:
        major = Color.BLUE if label_bacolorgv(g) == 1 else Color.RED
        return _indicator(g, g.nodes_of(major))

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        red = sum(1 for u in expl.nodes if g.colors[u] is Color.RED)
        blue = sum(1 for u in expl.nodes if g.colors[u] is Color.BLUE)
        return Prediction.hard(int(blue > red))


class DegenerateMotif(SEGNN):
    """Highlights the smallest decoy motif of the true label's partition."""

    name = "degenerate-motif"

    def extract(self, g: Graph) -> RelevanceScores:
        y = label_bacolorgv(g)
        cands = [(MOTIF_SIZE[name], min(nodes), nodes)
                 for name, nodes in motif_occurrences(g) if name in MOTIF_PARTITION[y]]
        if not cands:
            return _indicator(g, ())
        return _indicator(g, min(cands, key=lambda c: c[:2])[2])

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        if expl.empty or any(g.colors[u] is not Color.NEUTRAL for u in expl.nodes):
            return Prediction.uniform()
        name = motif_of(expl.subgraph.to_graph())
        for y, part in MOTIF_PARTITION.items():
            if name in part:
                return Prediction.hard(y)
        return Prediction.uniform()


class BrokenColorGV(DegenerateColorGV):
    """Negative control: the classifier ignores the explanation.

    Its label comes from an internal random stream, so repeated queries on the
    same input disagree. Used only to check that the theorem verifier notices.
    """

    def __init__(self, seed: int = 0):
        super().__init__()
        self.name = "broken"
        self._rng = np.random.default_rng(seed)

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        return Prediction.hard(int(self._rng.integers(2)))


class GSATScored(SEGNN):
    """Wraps a hard {0,1}-scored model so unselected nodes carry the prior ``r``."""

    def __init__(self, base: SEGNN, r: float):
        if not 0.0 < r < 0.5:
            raise ValueError("r must lie in (0, 0.5) so the 0.5 threshold keeps the selection")
        self.base, self.r = base, r
        self.name = f"{base.name}@gsat"
        self.uses_edges = base.uses_edges

    def extract(self, g: Graph) -> RelevanceScores:
        v = self.base.extract(g).values
        return RelevanceScores(np.where(v >= 0.5, 1.0, self.r))

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        return self.base.classify(g, scores, expl)


ANALYTIC = {
    "degenerate": DegenerateColorGV,
    "degenerate-swap": lambda: DegenerateColorGV((1, 0)),
    "faithful": FaithfulColorGV,
    "degenerate-motif": DegenerateMotif,
    "faithful-motif": FaithfulColorGV,
    "broken": BrokenColorGV,
}


def analytic_model(name: str) -> SEGNN:
    try:
        return ANALYTIC[name]()
    except KeyError:
        raise KeyError(f"unknown analytic model {name!r}; choose from {sorted(ANALYTIC)}") from None
