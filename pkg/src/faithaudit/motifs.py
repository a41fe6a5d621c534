"""Exact subgraph search for the small decoy motifs (clique, star, triangle)."""

from __future__ import annotations

from typing import Iterable, Iterator

from faithaudit.graph import Color, Graph, norm_edge

Adjacency = dict[int, set[int]]


def _adjacency(nodes: Iterable[int], edges: Iterable[tuple[int, int]]) -> Adjacency:
    adj: Adjacency = {u: set() for u in nodes}
    for u, v in edges:
        if u in adj and v in adj:
            adj[u].add(v)
            adj[v].add(u)
    return adj


def clique(k: int) -> Adjacency:
    return _adjacency(range(k), [(i, j) for i in range(k) for j in range(i + 1, k)])


def star(k: int) -> Adjacency:
    """Star on ``k`` nodes: one hub plus ``k - 1`` leaves."""
    return _adjacency(range(k), [(0, j) for j in range(1, k)])


MOTIFS: dict[str, Adjacency] = {
    "triangle": clique(3),
    "star": star(4),
    "clique": clique(6),
}
MOTIF_SIZE = {name: len(adj) for name, adj in MOTIFS.items()}


def iter_embeddings(
    pattern: Adjacency,
    target: Adjacency,
    induced: bool = False,
) -> Iterator[dict[int, int]]:
    """Yield injective maps pattern-node -> target-node preserving adjacency.

    Plain backtracking with degree pruning; patterns here have at most six
    nodes so no VF2 state machinery is needed.
    """
    order = sorted(pattern, key=lambda u: -len(pattern[u]))
    # put each node after at least one already-placed neighbour when possible
    placed: list[int] = []
    rest = list(order)
    while rest:
        pick = next((u for u in rest if any(v in pattern[u] for v in placed)), rest[0])
        placed.append(pick)
        rest.remove(pick)
    order = placed

    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> Iterator[dict[int, int]]:
        if i == len(order):
            yield dict(mapping)
            return
        u = order[i]
        mapped_nbrs = [mapping[v] for v in pattern[u] if v in mapping]
        if mapped_nbrs:
            cands: Iterable[int] = set.intersection(*(target[w] for w in mapped_nbrs))
        else:
            cands = target.keys()
        for c in sorted(cands):
            if c in used or len(target[c]) < len(pattern[u]):
                continue
            if induced and any(
                mapping[v] in target[c] for v in mapping if v not in pattern[u]
            ):
                continue
            mapping[u] = c
            used.add(c)
            yield from extend(i + 1)
            del mapping[u]
            used.discard(c)

    yield from extend(0)


def find_embedding(pattern: Adjacency, g: Graph, induced: bool = False) -> dict[int, int] | None:
    target = _adjacency(g.nodes, g.edges)
    return next(iter_embeddings(pattern, target, induced), None)


def contains(g: Graph, motif: str) -> bool:
    return find_embedding(MOTIFS[motif], g) is not None


def is_isomorphic(a: Adjacency, b: Adjacency) -> bool:
    if len(a) != len(b):
        return False
    if sum(map(len, a.values())) != sum(map(len, b.values())):
        return False
    return next(iter_embeddings(a, b, induced=True), None) is not None


def neutral_components(g: Graph) -> list[frozenset[int]]:
    neutral = set(g.nodes_of(Color.NEUTRAL))
    adj = _adjacency(neutral, g.edges)
    seen: set[int] = set()
    comps = []
    for s in sorted(neutral):
        if s in seen:
            continue
        stack, comp = [s], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def motif_occurrences(g: Graph) -> list[tuple[str, frozenset[int]]]:
    """Decoy motifs present in ``g``.

    An occurrence is a connected component of the Neutral-colored nodes that is
    isomorphic to one of the named motifs. Matching whole components keeps a
    triangle inside the 6-clique from counting as a separate triangle motif.
    """
    found = []
    for comp in neutral_components(g):
        sub = _adjacency(comp, g.edges)
        for name, pat in MOTIFS.items():
            if is_isomorphic(pat, sub):
                found.append((name, comp))
                break
    return found


def motif_of(g: Graph) -> str | None:
    """Name of the motif ``g`` is isomorphic to, ignoring colors."""
    adj = _adjacency(g.nodes, g.edges)
    for name, pat in MOTIFS.items():
        if is_isomorphic(pat, adj):
            return name
    return None


def motif_edges(nodes: list[int], motif: str) -> list[tuple[int, int]]:
    pat = MOTIFS[motif]
    return sorted({norm_edge(nodes[u], nodes[v]) for u in pat for v in pat[u]})
