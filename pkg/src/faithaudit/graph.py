"""Graph representation, subgraph algebra and explanation selection.

Graphs are small, immutable and undirected. Node ids are dense ``0..n-1``;
an edge is stored once as a sorted ``(u, v)`` pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

Edge = tuple[int, int]


class GraphError(ValueError):
    """Raised for malformed graphs or out-of-domain node/edge references."""


class EmptyExplanationWarning(UserWarning):
    pass


class Color(str, Enum):
    RED = "red"
    BLUE = "blue"
    GREEN = "green"
    VIOLET = "violet"
    NEUTRAL = "neutral"


COLOR_ORDER: tuple[Color, ...] = tuple(Color)
COLOR_INDEX = {c: i for i, c in enumerate(COLOR_ORDER)}


def norm_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True, eq=True)
class Graph:
    colors: tuple[Color, ...]
    edges: frozenset[Edge] = frozenset()
    label: int | None = None
    attrs: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        n = len(self.colors)
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            if not (0 <= u < v < n):
                raise GraphError(f"edge {(u, v)} not normalized or out of range for n={n}")
        if self.attrs is not None and len(self.attrs) != n:
            raise GraphError("attrs length does not match node count")

    @classmethod
    def build(
        cls,
        colors: Iterable[Color | str],
        edges: Iterable[Sequence[int]] = (),
        label: int | None = None,
        attrs: Iterable[Sequence[float]] | None = None,
    ) -> "Graph":
        cols = tuple(Color(c) for c in colors)
        es: set[Edge] = set()
        for e in edges:
            u, v = int(e[0]), int(e[1])
            if u == v:
                raise GraphError(f"self-loop on node {u}")
            ne = norm_edge(u, v)
            if ne in es:
                raise GraphError(f"duplicate edge {ne}")
            es.add(ne)
        at = None if attrs is None else tuple(tuple(float(x) for x in row) for row in attrs)
        return cls(cols, frozenset(es), label, at)

    @property
    def n(self) -> int:
        return len(self.colors)

    @property
    def nodes(self) -> range:
        return range(len(self.colors))

    @cached_property
    def sorted_edges(self) -> tuple[Edge, ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def color_counts(self) -> dict[Color, int]:
        counts = {c: 0 for c in Color}
        for c in self.colors:
            counts[c] += 1
        return counts

    def count(self, color: Color) -> int:
        return self.color_counts[color]

    def nodes_of(self, color: Color) -> list[int]:
        return [u for u, c in enumerate(self.colors) if c is color]

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.sorted_edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(a) for a in adj)

    def one_hot(self) -> np.ndarray:
        x = np.zeros((self.n, len(COLOR_ORDER)))
        x[np.arange(self.n), [COLOR_INDEX[c] for c in self.colors]] = 1.0
        return x

    def with_label(self, label: int | None) -> "Graph":
        return Graph(self.colors, self.edges, label, self.attrs)

    def full(self) -> "SubgraphRef":
        return SubgraphRef(self, frozenset(self.nodes), self.edges)

    # JSON graph format: {"n", "colors", "edges", "label", "attrs"?}
    def to_json(self) -> dict:
        d: dict = {
            "n": self.n,
            "colors": [c.value for c in self.colors],
            "edges": [list(e) for e in self.sorted_edges],
            "label": self.label,
        }
        if self.attrs is not None:
            d["attrs"] = [list(row) for row in self.attrs]
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "Graph":
        try:
            n = int(d["n"])
            colors = d["colors"]
            edges = d["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"malformed graph object: {exc}") from exc
        if len(colors) != n:
            raise GraphError(f"'colors' has {len(colors)} entries, expected n={n}")
        label = d.get("label")
        return cls.build(colors, edges, None if label is None else int(label), d.get("attrs"))


@dataclass(frozen=True)
class SubgraphRef:
    """A node subset of ``parent`` plus a subset of its edges among those nodes."""

    parent: Graph
    nodes: frozenset[int]
    edges: frozenset[Edge] = frozenset()

    def __post_init__(self) -> None:
        bad = [u for u in self.nodes if not 0 <= u < self.parent.n]
        if bad:
            raise GraphError(f"unknown node ids {sorted(bad)}")
        for e in self.edges:
            if e not in self.parent.edges:
                raise GraphError(f"edge {e} not in parent graph")
            if e[0] not in self.nodes or e[1] not in self.nodes:
                raise GraphError(f"edge {e} has an endpoint outside the node subset")

    @property
    def size(self) -> tuple[int, int]:
        return (len(self.nodes), len(self.edges))

    def is_empty(self) -> bool:
        return not self.nodes

    def issubgraph(self, other: "SubgraphRef") -> bool:
        return self.nodes <= other.nodes and self.edges <= other.edges

    def to_graph(self) -> Graph:
        """Materialize as a standalone graph; node order follows ascending parent ids."""
        order = sorted(self.nodes)
        remap = {u: i for i, u in enumerate(order)}
        edges = frozenset(norm_edge(remap[u], remap[v]) for u, v in self.edges)
        attrs = None
        if self.parent.attrs is not None:
            attrs = tuple(self.parent.attrs[u] for u in order)
        return Graph(tuple(self.parent.colors[u] for u in order), edges, None, attrs)


def node_induced_subgraph(g: Graph, nodes: Iterable[int]) -> SubgraphRef:
    ns = frozenset(int(u) for u in nodes)
    bad = [u for u in ns if not 0 <= u < g.n]
    if bad:
        raise GraphError(f"unknown node ids {sorted(bad)}")
    es = frozenset(e for e in g.edges if e[0] in ns and e[1] in ns)
    return SubgraphRef(g, ns, es)


def edge_induced_restrict(s: SubgraphRef, keep: Iterable[Edge]) -> SubgraphRef:
    kept = frozenset(norm_edge(*e) for e in keep)
    extra = kept - s.edges
    if extra:
        raise GraphError(f"edges {sorted(extra)} are not in the subgraph")
    return SubgraphRef(s.parent, s.nodes, kept)


# -- relevance scores and explanation selection ------------------------------

class RelevanceScores:
    """Per-node scores in [0, 1], stored as a read-only float array."""

    __slots__ = ("values",)

    def __init__(self, values: Sequence[float] | np.ndarray, g: Graph | None = None):
        arr = np.array(values, dtype=float)
        if arr.ndim != 1:
            raise GraphError("scores must be a vector")
        if g is not None and arr.shape[0] != g.n:
            raise GraphError(f"got {arr.shape[0]} scores for a graph with {g.n} nodes")
        if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
            raise GraphError("scores must lie in [0, 1]")
        arr.setflags(write=False)
        self.values = arr

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, u: int) -> float:
        return float(self.values[u])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RelevanceScores) and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"RelevanceScores({self.values.tolist()})"


@dataclass(frozen=True)
class Threshold:
    tau: float = 0.5


@dataclass(frozen=True)
class TopK:
    ratio: float

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio <= 1.0:
            raise GraphError(f"TopK ratio must lie in (0, 1], got {self.ratio}")


Selection = Union[Threshold, TopK]


@dataclass(frozen=True)
class Explanation:
    subgraph: SubgraphRef
    scores: RelevanceScores
    selection: Selection
    empty: bool = False
    rescued: bool = False

    @property
    def nodes(self) -> frozenset[int]:
        return self.subgraph.nodes


def _topk_nodes(values: np.ndarray, ratio: float) -> list[int]:
    k = math.ceil(ratio * len(values) - 1e-12)
    # stable sort on -score keeps ascending ids among ties
    order = np.argsort(-values, kind="stable")
    return sorted(int(u) for u in order[:k])


def select_explanation(
    scores: RelevanceScores | Sequence[float],
    mode: Selection,
    g: Graph,
    rescue: bool = False,
) -> Explanation:
    """Turn relevance scores into a node-induced explanation subgraph.

    With ``rescue=True`` an empty thresholded selection is retried after
    instance-wise min-max normalization; constant scores cannot be rescued and
    yield an explanation flagged ``empty``.
    """
    if not isinstance(scores, RelevanceScores):
        scores = RelevanceScores(scores, g)
    elif len(scores) != g.n:
        raise GraphError(f"got {len(scores)} scores for a graph with {g.n} nodes")
    vals = scores.values
    rescued = False
    if isinstance(mode, TopK):
        chosen = _topk_nodes(vals, mode.ratio) if g.n else []
    elif isinstance(mode, Threshold):
        chosen = [u for u in range(g.n) if vals[u] >= mode.tau]
        if not chosen and rescue and g.n:
            lo, hi = float(vals.min()), float(vals.max())
            if hi > lo:
                scaled = (vals - lo) / (hi - lo)
                chosen = [u for u in range(g.n) if scaled[u] >= mode.tau]
                rescued = True
    else:
        raise GraphError(f"unknown selection mode {mode!r}")
    sub = node_induced_subgraph(g, chosen)
    return Explanation(sub, scores, mode, empty=not chosen, rescued=rescued)


# -- anchor sets --------------------------------------------------------------

@dataclass(frozen=True)
class AnchorSet:
    """One color designator per class label."""

    members: Mapping[int, Color]

    def node_for(self, g: Graph, label: int) -> int | None:
        hits = g.nodes_of(self.members[label])
        return hits[0] if len(hits) == 1 else None


@dataclass
class ValidationReport:
    matches: list[dict[int, int]] = field(default_factory=list)
    disjoint: bool = True
    failures: list[int] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.disjoint and not self.failures


def validate_anchor_set(graphs: Iterable[Graph], z: AnchorSet) -> ValidationReport:
    rep = ValidationReport()
    rep.disjoint = len(set(z.members.values())) == len(z.members)
    for i, g in enumerate(graphs):
        counts = {y: g.count(c) for y, c in z.members.items()}
        rep.matches.append(counts)
        if any(k != 1 for k in counts.values()):
            rep.failures.append(i)
    return rep


COLORGV_ANCHORS = AnchorSet({0: Color.GREEN, 1: Color.VIOLET})
