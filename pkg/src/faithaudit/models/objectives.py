"""Closed-form evaluation of GSAT/LRI-style and SMGNN-style training objectives."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from faithaudit.graph import Graph
from faithaudit.models.base import SEGNN, ModelError

# probability floor for the cross-entropy of hard predictions
CE_FLOOR = 1e-12


def _xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    nz = x != 0
    out[nz] = x[nz] * np.log(y[nz])
    return out


def cross_entropy(probs, label: int) -> float:
    return -math.log(max(probs[label], CE_FLOOR))


def _forward_checked(model: SEGNN, g: Graph, allowed: tuple[float, ...]):
    if g.label is None:
        raise ModelError("objective evaluation needs labelled graphs")
    scores, expl, pred = model.forward(g)
    p = scores.values
    if not np.all(np.min(np.abs(p[:, None] - np.array(allowed)[None, :]), axis=1) <= 1e-12):
        raise ModelError(f"{model.name}: scores must lie in {allowed}")
    if expl.empty:
        raise ModelError(f"{model.name}: empty explanation violates |R| > 0")
    return p, pred


def gsat_graph_value(model: SEGNN, g: Graph, r: float, lam1: float) -> float:
    p, pred = _forward_checked(model, g, (r, 1.0))
    q = 1.0 - p
    kl = _xlogy(p, p / r) + _xlogy(q, q / (1.0 - r))
    return cross_entropy(pred.probs, g.label) + lam1 * float(kl.sum())


def gsat_objective_value(model: SEGNN, graphs: Iterable[Graph], r: float, lam1: float) -> float:
    """Mean of CE + lam1 * sum_u KL(Bern(p_u) || Bern(r)) over ``graphs``."""
    if not 0.0 < r < 1.0:
        raise ValueError(f"r must lie in (0, 1), got {r}")
    vals = [gsat_graph_value(model, g, r, lam1) for g in graphs]
    return float(np.mean(vals))


def smgnn_graph_value(model: SEGNN, g: Graph, lam1: float, lam2: float) -> float:
    p, pred = _forward_checked(model, g, (0.0, 1.0))
    q = 1.0 - p
    entropy = -(_xlogy(p, p) + _xlogy(q, q))
    n = g.n
    return cross_entropy(pred.probs, g.label) + lam1 * float(p.sum()) / n + lam2 * float(entropy.sum()) / n


def smgnn_objective_value(model: SEGNN, graphs: Iterable[Graph], lam1: float, lam2: float) -> float:
    """Mean of CE + lam1/|V| sum p_u + lam2/|V| sum H(p_u) over ``graphs``."""
    vals = [smgnn_graph_value(model, g, lam1, lam2) for g in graphs]
    return float(np.mean(vals))
