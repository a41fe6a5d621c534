"""Faithfulness metrics, the uniform sufficiency test and rejection ratios."""

from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from faithaudit.graph import Explanation, Graph, RelevanceScores, SubgraphRef, select_explanation
from faithaudit.metrics import perturb
from faithaudit.models.base import SEGNN, Prediction

UNCERTAIN_BAND = (0.4, 0.6)
DEFAULT_BUDGET = 50

SUFFICIENCY = ("fid-", "rfid-", "suf", "counterfid", "ust")
NECESSITY = ("fid+", "rfid+", "nec")
METRICS = ("fid-", "fid+", "rfid-", "rfid+", "suf", "nec", "counterfid", "ust")

RFID_MINUS_P = 0.9
RFID_PLUS_P = 0.1
NEC_FRACTION = 0.1


class MetricError(ValueError):
    pass


def distance(p: Prediction, q: Prediction) -> float:
    """Total variation distance between two class distributions."""
    if len(p) != len(q):
        raise MetricError(f"label arity mismatch: {len(p)} vs {len(q)}")
    return 0.5 * sum(abs(a - b) for a, b in zip(p.probs, q.probs))


def is_prediction_changed(p: Prediction, q: Prediction) -> bool:
    """Argmax flip, or (binary only) a perturbed output inside the uncertain band."""
    if p.label != q.label:
        return True
    if len(q) == 2:
        lo, hi = UNCERTAIN_BAND
        return lo <= max(q.probs) <= hi
    return False


@dataclass
class MetricContext:
    """Split-level information some metrics need: swap donors and the NEC removal budget."""

    donors: dict[int, list[tuple[int, Explanation]]] = field(default_factory=dict)
    nec_k: int = 1

    @classmethod
    def from_split(cls, model: SEGNN, graphs: Sequence[Graph]) -> "MetricContext":
        donors: dict[int, list[tuple[int, Explanation]]] = {}
        for i, g in enumerate(graphs):
            y = g.label if g.label is not None else model.predict(g).label
            donors.setdefault(y, []).append((i, model.explain(g)))
        mean_edges = float(np.mean([len(g.edges) for g in graphs])) if graphs else 0.0
        return cls(donors, max(1, math.ceil(NEC_FRACTION * mean_edges - 1e-12)))


@dataclass
class MetricResult:
    value: float
    rejected: bool
    trace: list[dict] = field(default_factory=list)


def sample_rng(seed: int, metric: str, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(metric.encode()), index]))


def _perturbations(model: SEGNN, metric: str, g: Graph, R: SubgraphRef, budget: int, rng, ctx: MetricContext | None,
                   index: int | None) -> list[perturb.Perturbed]:
    if metric == "fid-":
        return perturb.remove_complement(R)
    if metric == "fid+":
        return perturb.remove_explanation(R)
    if metric == "rfid-":
        return perturb.random_edge_removal(R, RFID_MINUS_P, "complement", budget, rng)
    if metric == "rfid+":
        return perturb.random_edge_removal(R, RFID_PLUS_P, "explanation", budget, rng)
    if metric == "nec":
        return perturb.fixed_edge_removal(R, ctx.nec_k if ctx else 1, budget, rng)
    if metric == "suf":
        if ctx is None:
            raise MetricError("SUF needs a MetricContext with a donor pool")
        y = g.label if g.label is not None else model.predict(g).label
        pool = [e for j, e in ctx.donors.get(y, []) if j != index]
        return perturb.complement_swap(R, pool, budget, rng)
    if metric == "ust":
        return perturb.supergraph_sample(R, budget, rng)
    raise MetricError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")


def evaluate_metric(
    model: SEGNN,
    g: Graph,
    metric: str,
    R: SubgraphRef | None = None,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    context: MetricContext | None = None,
    index: int | None = None,
    rng: np.random.Generator | None = None,
) -> MetricResult:
    """Score one (graph, explanation) pair.

    Sufficiency metrics reject when any perturbation changes the prediction;
    necessity metrics reject when none does. ``value`` is the largest total
    variation distance observed.
    """
    if metric not in METRICS:
        raise MetricError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    if budget < 1:
        raise MetricError("budget must be >= 1")
    if rng is None:
        rng = sample_rng(seed, metric, 0 if index is None else index)
    scores, expl, ref = model.forward(g)
    if R is None:
        R = expl.subgraph
    trace: list[dict] = []
    if metric == "counterfid":
        for i, s in enumerate(perturb.gaussian_scores(scores.values, budget, rng)):
            rs = RelevanceScores(s)
            e = select_explanation(rs, model.selection, g, model.rescue)
            q = model.classify(g, rs, e)
            trace.append({"i": i, "d": distance(ref, q), "changed": is_prediction_changed(ref, q)})
    else:
        for gp, desc in _perturbations(model, metric, g, R, budget, rng, context, index):
            q = model.predict(gp)
            trace.append({**desc, "d": distance(ref, q), "changed": is_prediction_changed(ref, q)})
    changed = any(t["changed"] for t in trace)
    rejected = changed if metric in SUFFICIENCY else not changed
    return MetricResult(max(t["d"] for t in trace), rejected, trace)


def suffcause(model: SEGNN, g: Graph, R: SubgraphRef | None = None, budget: int = DEFAULT_BUDGET,
              seed: int = 0, index: int = 0) -> MetricResult:
    """Uniform sufficiency test: bare R plus ``budget - 1`` random supergraphs inside g."""
    return evaluate_metric(model, g, "ust", R, budget, seed, index=index)


@dataclass
class RejectionEntry:
    ratio: float
    n: int
    samples: list[dict] = field(default_factory=list)

    def to_json(self, traces: bool = True) -> dict:
        d = {"ratio": self.ratio, "n": self.n}
        if traces:
            d["samples"] = self.samples
        return d


def _eval_range(args) -> list[dict]:
    model, graphs, metric, budget, seed, ctx, lo, hi = args
    out = []
    for i in range(lo, hi):
        r = evaluate_metric(model, graphs[i], metric, None, budget, seed, ctx, index=i)
        out.append({"index": i, "rejected": r.rejected, "value": r.value, "trace": r.trace})
    return out


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get("FAITHAUDIT_THREADS", "1")))
    except ValueError:
        return 1


def rejection_ratio(
    model: SEGNN,
    graphs: Sequence[Graph],
    metric: str,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    context: MetricContext | None = None,
    workers: int | None = None,
) -> RejectionEntry:
    """Fraction of graphs whose explanation the metric rejects.

    Sample ``i`` draws from its own stream keyed by ``(seed, metric, i)``, so
    results do not depend on ``workers`` and a larger budget extends, rather
    than replaces, the perturbations of a smaller one.
    """
    if not graphs:
        raise MetricError("cannot compute a rejection ratio on an empty split")
    if context is None and metric in ("suf", "nec"):
        context = MetricContext.from_split(model, graphs)
    workers = workers or n_workers()
    n = len(graphs)
    if workers <= 1:
        samples = _eval_range((model, graphs, metric, budget, seed, context, 0, n))
    else:
        step = math.ceil(n / workers)
        jobs = [(model, graphs, metric, budget, seed, context, lo, min(n, lo + step)) for lo in range(0, n, step)]
        with ProcessPoolExecutor(workers) as ex:
            samples = [s for part in ex.map(_eval_range, jobs) for s in part]
    ratio = sum(s["rejected"] for s in samples) / n
    return RejectionEntry(ratio, n, samples)


def audit(
    model: SEGNN,
    graphs: Sequence[Graph],
    metrics: Sequence[str] = METRICS,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    split: str = "test",
    traces: bool = True,
    workers: int | None = None,
) -> dict:
    """Run several metrics on one split and assemble the report dict."""
    ctx = MetricContext.from_split(model, graphs) if {"suf", "nec"} & set(metrics) else None
    out = {}
    for m in metrics:
        out[m] = rejection_ratio(model, graphs, m, budget, seed, ctx, workers).to_json(traces)
    return {"model": model.describe(), "split": split, "budget": budget, "seed": seed, "metrics": out}


def report_csv(report: dict) -> str:
    lines = ["metric,ratio,n,budget,seed"]
    for name, entry in report["metrics"].items():
        lines.append(f"{name},{entry['ratio']:.6f},{entry['n']},{report['budget']},{report['seed']}")
    return "\n".join(lines) + "\n"
