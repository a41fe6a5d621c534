"""Deterministic generators for the BAColorGV and MotifAnchors benchmarks."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterator

import networkx as nx
import numpy as np

from faithaudit.graph import COLORGV_ANCHORS, Color, Graph, GraphError, validate_anchor_set
from faithaudit.motifs import MOTIFS, motif_edges, motif_occurrences

FORMAT = "faithaudit-dataset/1"
SPLITS = ("train", "val", "test")


class ConfigError(ValueError):
    pass


class DatasetError(ValueError):
    pass


def _check_split(split: tuple[float, float, float]) -> None:
    if len(split) != 3 or any(s < 0 for s in split) or abs(sum(split) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three non-negative numbers summing to 1, got {split}")


@dataclass(frozen=True)
class BAColorGVConfig:
    n_graphs: int = 5000
    colored_range: tuple[int, int] = (0, 100)
    ba_attach: int = 2
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 7

    def validate(self) -> None:
        lo, hi = self.colored_range
        if self.n_graphs < 1:
            raise ConfigError("n_graphs must be positive")
        if lo < 0 or hi < lo:
            raise ConfigError(f"invalid colored_range {self.colored_range}")
        if self.ba_attach < 1:
            raise ConfigError("ba_attach must be >= 1")
        _check_split(self.split)


@dataclass(frozen=True)
class MotifAnchorsConfig:
    n_graphs: int = 500
    base_size_range: tuple[int, int] = (6, 30)
    ba_attach: int = 2
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 11

    def validate(self) -> None:
        lo, hi = self.base_size_range
        if self.n_graphs < 1:
            raise ConfigError("n_graphs must be positive")
        if lo < 0 or hi < lo:
            raise ConfigError(f"invalid base_size_range {self.base_size_range}")
        if self.ba_attach < 1:
            raise ConfigError("ba_attach must be >= 1")
        _check_split(self.split)


@dataclass
class Dataset:
    family: str
    graphs: list[Graph]
    splits: dict[str, list[int]]
    config: dict = field(default_factory=dict)
    seed: int = 0
    final_seed: int = 0

    @property
    def labels(self) -> list[int]:
        return [g.label for g in self.graphs]

    def split(self, name: str) -> list[Graph]:
        return [self.graphs[i] for i in self.splits[name]]

    def header(self) -> dict:
        return {
            "format": FORMAT,
            "family": self.family,
            "config": self.config,
            "seed": self.seed,
            "final_seed": self.final_seed,
            "n": len(self.graphs),
            "splits": self.splits,
        }

    def dumps(self, manifest: dict | None = None) -> str:
        head = self.header()
        if manifest is not None:
            head["manifest"] = manifest
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(g.to_json(), sort_keys=True) for g in self.graphs]
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path, manifest: dict | None = None) -> None:
        Path(path).write_text(self.dumps(manifest))

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        with open(path) as fh:
            return cls.read(fh)

    @classmethod
    def read(cls, fh: IO[str]) -> "Dataset":
        try:
            head = json.loads(fh.readline())
            if head.get("format") != FORMAT:
                raise DatasetError(f"unsupported dataset format {head.get('format')!r}")
            graphs = [Graph.from_json(json.loads(line)) for line in fh if line.strip()]
        except (json.JSONDecodeError, GraphError) as exc:
            raise DatasetError(str(exc)) from exc
        if len(graphs) != head["n"]:
            raise DatasetError(f"header announces {head['n']} graphs, found {len(graphs)}")
        splits = {k: list(v) for k, v in head["splits"].items()}
        return cls(head["family"], graphs, splits, head["config"], head["seed"], head["final_seed"])


def _split_indices(n: int, ratios: tuple[float, float, float], rng: np.random.Generator) -> dict[str, list[int]]:
    perm = rng.permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    n_val = min(n_val, n - n_train)
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return {name: sorted(int(i) for i in part) for name, part in zip(SPLITS, parts)}


def _topology(t: int, m: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    # preferential attachment needs t > m; smaller graphs are made complete
    if t <= m:
        return [(i, j) for i in range(t) for j in range(i + 1, t)]
    ba = nx.barabasi_albert_graph(t, m, seed=int(rng.integers(2**31)))
    return sorted((min(u, v), max(u, v)) for u, v in ba.edges())


def label_bacolorgv(g: Graph) -> int:
    return int(g.count(Color.BLUE) > g.count(Color.RED))


label_motif_anchors = label_bacolorgv


def _colorgv_graph(t: int, m: int, rng: np.random.Generator) -> Graph:
    blue = rng.random(t) < 0.5
    colors = [Color.BLUE if b else Color.RED for b in blue] + [Color.GREEN, Color.VIOLET]
    g = Graph.build(colors, _topology(t, m, rng))
    return g.with_label(label_bacolorgv(g))


def _balanced(graphs: list[Graph], splits: dict[str, list[int]]) -> bool:
    for idx in splits.values():
        if idx and len({graphs[i].label for i in idx}) < 2:
            return False
    return True


def gen_bacolorgv(cfg: BAColorGVConfig = BAColorGVConfig(), max_reseeds: int = 100) -> Dataset:
    """Generate BAColorGV; re-seeds (seed+1, seed+2, ...) until every split has both labels.

    Splits with a single graph, or a total colored count of zero, cannot be
    balanced; those datasets are returned from the first seed as is.
    """
    cfg.validate()
    lo, hi = cfg.colored_range
    seed = cfg.seed
    for attempt in range(max_reseeds):
        rng = np.random.default_rng(seed)
        graphs = [_colorgv_graph(int(rng.integers(lo, hi + 1)), cfg.ba_attach, rng)
                  for _ in range(cfg.n_graphs)]
        splits = _split_indices(cfg.n_graphs, cfg.split, rng)
        can_balance = hi > 0 and all(len(v) >= 2 for v in splits.values() if v)
        if _balanced(graphs, splits) or not can_balance:
            break
        seed += 1
    else:
        raise ConfigError(f"no balanced dataset after {max_reseeds} reseeds")
    return Dataset("bacolorgv", graphs, splits, _cfg_dict(cfg), cfg.seed, seed)


def _cfg_dict(cfg) -> dict:
    d = asdict(cfg)
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _motif_graph(size: int, m: int, rng: np.random.Generator) -> Graph:
    blue = rng.random(size) < 0.5
    colors: list[Color] = [Color.BLUE if b else Color.RED for b in blue]
    edges = _topology(size, m, rng)
    y = int(blue.sum() > size - blue.sum())
    if y == 1:
        motifs = ["clique", "star" if rng.random() < 0.5 else "triangle"]
    else:
        motifs = ["clique"]
        if rng.random() < 0.5:
            motifs.append("star")
        if rng.random() < 0.5:
            motifs.append("triangle")
    for name in motifs:
        start = len(colors)
        k = len(MOTIFS[name])
        nodes = list(range(start, start + k))
        colors += [Color.NEUTRAL] * k
        edges += motif_edges(nodes, name)
        if size:
            edges.append((int(rng.integers(size)), int(nodes[rng.integers(k)])))
    g = Graph.build(colors, edges)
    return g.with_label(label_motif_anchors(g))


def gen_motif_anchors(cfg: MotifAnchorsConfig = MotifAnchorsConfig()) -> Dataset:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.base_size_range
    graphs = [_motif_graph(int(rng.integers(lo, hi + 1)), cfg.ba_attach, rng)
              for _ in range(cfg.n_graphs)]
    splits = _split_indices(cfg.n_graphs, cfg.split, rng)
    return Dataset("motif", graphs, splits, _cfg_dict(cfg), cfg.seed, cfg.seed)


MOTIF_PARTITION: dict[int, frozenset[str]] = {
    0: frozenset({"clique"}),
    1: frozenset({"star", "triangle"}),
}


def audit_motif_coverage(ds: Dataset) -> dict:
    """Check per-label coverage and disjointness of the motif partition over ``ds``."""
    uncovered = []
    seen: dict[int, set[str]] = {0: set(), 1: set()}
    for i, g in enumerate(ds.graphs):
        names = {name for name, _ in motif_occurrences(g)}
        seen[g.label] |= names
        if not names & MOTIF_PARTITION[g.label]:
            uncovered.append(i)
    disjoint = not (MOTIF_PARTITION[0] & MOTIF_PARTITION[1])
    return {"uncovered": uncovered, "disjoint": disjoint, "seen": {k: sorted(v) for k, v in seen.items()},
            "passed": disjoint and not uncovered}


def anchor_report(ds: Dataset):
    return validate_anchor_set(ds.graphs, COLORGV_ANCHORS)


def iter_small_bacolorgv(n: int, max_colored: int = 8, seed: int = 3, ba_attach: int = 2) -> Iterator[Graph]:
    """Small BAColorGV graphs for exhaustive checks."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield _colorgv_graph(int(rng.integers(0, max_colored + 1)), ba_attach, rng)
