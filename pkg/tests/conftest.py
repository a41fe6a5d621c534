from __future__ import annotations

import pytest
from hypothesis import strategies as st

from faithaudit.datasets import gen_bacolorgv, iter_small_bacolorgv
from faithaudit.graph import Color, Graph


@pytest.fixture(scope="session")
def colorgv():
    return gen_bacolorgv()


@pytest.fixture(scope="session")
def test_split(colorgv):
    return colorgv.split("test")


@pytest.fixture(scope="session")
def small_graphs():
    return list(iter_small_bacolorgv(50))


def colorgv_graph(red: int, blue: int, edges=()) -> Graph:
    """Red nodes first, then blue, then the isolated green and violet anchors."""
    colors = [Color.RED] * red + [Color.BLUE] * blue + [Color.GREEN, Color.VIOLET]
    g = Graph.build(colors, edges)
    return g.with_label(int(blue > red))


@st.composite
def graphs(draw, max_nodes: int = 8, colors=(Color.RED, Color.BLUE, Color.NEUTRAL), anchors: bool = False):
    n = draw(st.integers(0 if not anchors else 0, max_nodes))
    cols = draw(st.lists(st.sampled_from(colors), min_size=n, max_size=n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    if anchors:
        cols = cols + [Color.GREEN, Color.VIOLET]
    g = Graph.build(cols, chosen)
    return g.with_label(int(g.count(Color.BLUE) > g.count(Color.RED)))
