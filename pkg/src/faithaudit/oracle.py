"""Exact ground truth on small instances.

Exhaustive supergraph enumeration, the explanation taxonomy (prime implicant,
minimal, non-label-preserving) and a machine check that the uniform
sufficiency test rejects minimal and non-label-preserving explanations while
accepting prime implicants.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import comb
from typing import Iterator, Sequence

from faithaudit.graph import Graph, SubgraphRef, node_induced_subgraph
from faithaudit.metrics.core import DEFAULT_BUDGET, distance, is_prediction_changed, suffcause
from faithaudit.models.base import SEGNN, Prediction

DEFAULT_CAP = 22


class CapExceeded(RuntimeError):
    """The instance has more free elements than the enumeration cap allows."""

    def __init__(self, required: int, cap: int, what: str = "supergraph enumeration"):
        self.required, self.cap = required, cap
        super().__init__(
            f"{what} needs {required} free elements (about 2^{required} candidates); cap is {cap}. "
            f"Rerun with --cap {required} or use a smaller instance."
        )


class ExplanationClass(str, enum.Enum):
    PRIME_IMPLICANT = "PrimeImplicant"
    MINIMAL_ONLY = "MinimalOnly"
    NON_LABEL_PRESERVING = "NonLabelPreserving"
    LABEL_PRESERVING_OTHER = "LabelPreservingOther"


def size_key(s: SubgraphRef) -> tuple[int, int]:
    """Explanation size, compared lexicographically as (nodes, edges)."""
    return len(s.nodes), len(s.edges)


def _edge_blind(model: SEGNN | None) -> bool:
    return model is not None and not model.uses_edges


def _check_cap(R: SubgraphRef, cap: int, nodes_only: bool) -> None:
    g = R.parent
    need = g.n - len(R.nodes)
    if not nodes_only:
        need += len(g.edges - R.edges)
    if need > cap:
        raise CapExceeded(need, cap)


def iter_supergraph_refs(R: SubgraphRef, cap: int = DEFAULT_CAP, nodes_only: bool = False) -> Iterator[SubgraphRef]:
    """Every R <= G' <= G, ordered by added nodes, then added edges.

    With ``nodes_only`` one representative per node set is produced (all
    surviving edges kept); that is exact for models that ignore edges.
    """
    _check_cap(R, cap, nodes_only)
    g = R.parent
    free = sorted(set(g.nodes) - R.nodes)
    for k in range(len(free) + 1):
        for extra in combinations(free, k):
            nodes = R.nodes | frozenset(extra)
            induced = node_induced_subgraph(g, nodes).edges
            if nodes_only:
                yield SubgraphRef(g, nodes, induced)
                continue
            cand = sorted(induced - R.edges)
            for j in range(len(cand) + 1):
                for add in combinations(cand, j):
                    yield SubgraphRef(g, nodes, R.edges | frozenset(add))


def enumerate_supergraphs(R: SubgraphRef, g: Graph | None = None, cap: int = DEFAULT_CAP) -> Iterator[Graph]:
    """All supergraphs of R inside its parent graph, as standalone graphs."""
    if g is not None and g != R.parent:
        raise ValueError("R must be a subgraph of g")
    for s in iter_supergraph_refs(R, cap):
        yield s.to_graph()


def count_supergraphs(R: SubgraphRef) -> int:
    """Closed form: sum over added node sets S of 2^(free edges inside R u S)."""
    g = R.parent
    free = sorted(set(g.nodes) - R.nodes)
    total = 0
    for k in range(len(free) + 1):
        for extra in combinations(free, k):
            induced = node_induced_subgraph(g, R.nodes | frozenset(extra)).edges
            total += 2 ** len(induced - R.edges)
    return total


def _predict(model: SEGNN, s: SubgraphRef) -> Prediction:
    return model.predict(s.to_graph())


def _witness(s: SubgraphRef | None) -> dict | None:
    if s is None:
        return None
    return {"nodes": sorted(s.nodes), "edges": [list(e) for e in sorted(s.edges)]}


@dataclass
class ExactUST:
    value: float
    rejected: bool
    witness: SubgraphRef | None
    n_candidates: int


def exact_ust_full(model: SEGNN, g: Graph, R: SubgraphRef, cap: int = DEFAULT_CAP,
                   ref: Prediction | None = None) -> ExactUST:
    """Exact maximum distance over all supergraphs, plus the smallest changing one."""
    ref = model.predict(g) if ref is None else ref
    best, witness, n = 0.0, None, 0
    for s in iter_supergraph_refs(R, cap, nodes_only=_edge_blind(model)):
        q = _predict(model, s)
        n += 1
        best = max(best, distance(ref, q))
        if witness is None and is_prediction_changed(ref, q):
            witness = s
    return ExactUST(best, witness is not None, witness, n)


def exact_ust(model: SEGNN, g: Graph, R: SubgraphRef, cap: int = DEFAULT_CAP) -> float:
    return exact_ust_full(model, g, R, cap).value


def _all_supergraphs_preserve(model: SEGNN, R: SubgraphRef, ref: Prediction, cap: int) -> bool:
    for s in iter_supergraph_refs(R, cap, nodes_only=_edge_blind(model)):
        if is_prediction_changed(ref, _predict(model, s)):
            return False
    return True


def _predecessors(R: SubgraphRef) -> Iterator[SubgraphRef]:
    """Non-empty subgraphs of R with exactly one node or one edge fewer."""
    for e in sorted(R.edges):
        yield SubgraphRef(R.parent, R.nodes, R.edges - {e})
    if len(R.nodes) > 1:
        for u in sorted(R.nodes):
            yield SubgraphRef(R.parent, R.nodes - {u}, frozenset(e for e in R.edges if u not in e))


def _smaller_subgraphs(g: Graph, bound: tuple[int, int], nodes_only: bool) -> Iterator[SubgraphRef]:
    """Non-empty subgraphs of g whose (nodes, edges) size is lexicographically below ``bound``."""
    kmax, emax = bound
    for k in range(1, min(kmax, g.n) + 1):
        for nodes in combinations(range(g.n), k):
            ns = frozenset(nodes)
            induced = sorted(node_induced_subgraph(g, ns).edges)
            limit = len(induced) if k < kmax else min(len(induced), emax - 1)
            if limit < 0:
                continue
            if nodes_only:
                # edge-blind: one representative, as small as the bound allows
                yield SubgraphRef(g, ns, frozenset(induced[:limit]))
                continue
            for j in range(limit + 1):
                for es in combinations(induced, j):
                    yield SubgraphRef(g, ns, frozenset(es))


def _minimal_search_size(g: Graph, bound: tuple[int, int], nodes_only: bool) -> int:
    kmax, _ = bound
    nodes = sum(comb(g.n, k) for k in range(1, min(kmax, g.n) + 1))
    return nodes if nodes_only else nodes * 2 ** len(g.edges)


def _has_smaller_preserving(model: SEGNN, g: Graph, R: SubgraphRef, ref: Prediction, cap: int) -> bool:
    blind = _edge_blind(model)
    if _minimal_search_size(g, size_key(R), blind) > 2 ** cap:
        raise CapExceeded(g.n + (0 if blind else len(g.edges)), cap, "minimality search")
    for s in _smaller_subgraphs(g, size_key(R), blind):
        if not is_prediction_changed(ref, _predict(model, s)):
            return True
    return False


def classify_explanation(model: SEGNN, g: Graph, R: SubgraphRef, cap: int = DEFAULT_CAP) -> ExplanationClass:
    """Place R in the taxonomy. Candidate sub-explanations must be non-empty.

    Label preservation means the prediction is not changed in the sense of the
    metrics' rejection rule: same argmax and outside the uncertain band.
    """
    if R.is_empty():
        raise ValueError("classify_explanation needs a non-empty explanation")
    ref = model.predict(g)
    if is_prediction_changed(ref, _predict(model, R)):
        return ExplanationClass.NON_LABEL_PRESERVING
    # "every supergraph preserves" is upward closed, so checking the
    # immediate predecessors of R decides whether any proper subgraph has it
    if _all_supergraphs_preserve(model, R, ref, cap) and not any(
        _all_supergraphs_preserve(model, p, ref, cap) for p in _predecessors(R)
    ):
        return ExplanationClass.PRIME_IMPLICANT
    if not _has_smaller_preserving(model, g, R, ref, cap):
        return ExplanationClass.MINIMAL_ONLY
    return ExplanationClass.LABEL_PRESERVING_OTHER


@dataclass
class OracleVerdict:
    index: int
    cls: ExplanationClass | None
    exact_ust: float | None
    rejected: bool | None
    witness: dict | None
    sampled_ust: float | None = None
    sampled_rejected: bool | None = None
    skipped: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["class"] = self.cls.value if self.cls else None
        del d["cls"]
        return d


@dataclass
class TheoremReport:
    model: str
    verdicts: list[OracleVerdict] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.verdicts:
            key = v.cls.value if v.cls else "skipped"
            out[key] = out.get(key, 0) + 1
        return out

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "n": len(self.verdicts),
            "passed": self.passed,
            "counts": self.counts(),
            "violations": self.violations,
            "verdicts": [v.to_json() for v in self.verdicts],
        }


def verify_thm_suffcause(
    model: SEGNN,
    graphs: Sequence[Graph],
    cap: int = DEFAULT_CAP,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
) -> TheoremReport:
    """Check, instance by instance, that the sufficiency test separates the taxonomy.

    Classification and exact rejection are computed in separate passes so a
    model whose outputs are not a function of its input shows up as a
    violation. Instances with an empty explanation are skipped.
    """
    report = TheoremReport(model.name)
    for i, g in enumerate(graphs):
        R = model.explain(g).subgraph
        if R.is_empty():
            report.verdicts.append(OracleVerdict(i, None, None, None, None, skipped="empty explanation"))
            continue
        cls = classify_explanation(model, g, R, cap)
        ex = exact_ust_full(model, g, R, cap)
        sampled = suffcause(model, g, R, budget, seed, index=i)
        v = OracleVerdict(i, cls, ex.value, ex.rejected, _witness(ex.witness), sampled.value, sampled.rejected)
        report.verdicts.append(v)

        def fail(rule: str) -> None:
            report.violations.append({"index": i, "class": cls.value, "rule": rule,
                                      "exact_ust": ex.value, "rejected": ex.rejected})

        if cls is ExplanationClass.PRIME_IMPLICANT and (ex.value != 0.0 or ex.rejected):
            fail("prime implicant must have exact UST 0")
        if cls is ExplanationClass.NON_LABEL_PRESERVING and not ex.rejected:
            fail("non-label-preserving explanation must be rejected")
        if cls is ExplanationClass.MINIMAL_ONLY and not ex.rejected:
            fail("minimal, non-prime explanation must be rejected")
        if sampled.value > ex.value + 1e-12:
            fail("sampled UST exceeds the exact maximum")
        if sampled.rejected and not ex.rejected:
            fail("sampled test rejects but exhaustive enumeration does not")
    return report
