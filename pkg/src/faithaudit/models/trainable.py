"""A small weighted-message-passing SE-GNN trained with hand-derived gradients.

Extractor, per node u with one-hot color x_u::

    z_u = x_u Ws + (sum_{v in N(u)} x_v) Wn + s * (sum_{v in G} x_v) Wr
    p_u = sigmoid(tanh(z_u) . we)

Classifier: ``softmax(Wc (sum_u w_u x_u))`` with ``w_u = p_u`` while training
and ``w_u = p_u * [u selected]`` at inference. No bias terms anywhere.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from faithaudit.graph import COLOR_INDEX, COLOR_ORDER, Color, Explanation, Graph, RelevanceScores, Threshold
from faithaudit.models.base import SEGNN, ModelError, Prediction

log = logging.getLogger(__name__)

N_FEAT = len(COLOR_ORDER)
PARAM_NAMES = ("Ws", "Wn", "Wr", "we", "Wc")


class TrainingError(ModelError):
    def __init__(self, msg: str, epoch: int | None = None):
        super().__init__(msg if epoch is None else f"{msg} (epoch {epoch})")
        self.epoch = epoch


@dataclass
class TrainHP:
    lr: float = 0.05
    epochs: int = 2000
    hidden: int = 8
    readout_scale: float = 0.1
    optimizer: str = "lbfgs"
    pos_weight: float = 10.0
    lam1: float = 0.0
    lam2: float = 0.0
    init_scale: float = 0.5
    stop_acc: float = 0.99
    stop_loss: float = 0.01
    stop_expl: float = 3e-4
    check_every: int = 10
    # box constraint |Wc| <= wc_bound (L-BFGS only); stops soft scores from
    # shrinking toward zero while the classifier head grows to compensate
    wc_bound: float | None = None


@dataclass
class DesignatedExplanation:
    """Per-class color whose nodes the extractor is pushed to highlight."""

    target: Mapping[int, Color]

    def __post_init__(self) -> None:
        if len(set(self.target.values())) != len(self.target):
            raise ValueError("designated predicates must be disjoint across classes")

    def node_targets(self, g: Graph, y: int) -> np.ndarray:
        c = self.target[y]
        return np.array([1.0 if col is c else 0.0 for col in g.colors])


GREEN_VIOLET = DesignatedExplanation({1: Color.GREEN, 0: Color.VIOLET})
RED_BLUE = DesignatedExplanation({0: Color.RED, 1: Color.BLUE})
DESIGNATED = {"green-violet": GREEN_VIOLET, "red-blue": RED_BLUE}


def init_params(hidden: int = 16, seed: int = 0, scale: float = 0.5) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    return {
        "Ws": rng.normal(0.0, scale, (N_FEAT, hidden)),
        "Wn": rng.normal(0.0, scale, (N_FEAT, hidden)),
        "Wr": rng.normal(0.0, scale, (N_FEAT, hidden)),
        "we": rng.normal(0.0, scale, hidden),
        "Wc": rng.normal(0.0, scale, (2, N_FEAT)),
    }


def zero_params(hidden: int = 16) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in init_params(hidden).items()}


class Batch:
    """Disjoint union of graphs as sparse operators."""

    def __init__(self, graphs: Sequence[Graph], designated: DesignatedExplanation | None = None):
        sizes = np.array([g.n for g in graphs])
        offs = np.concatenate([[0], np.cumsum(sizes)])
        n_tot = int(offs[-1])
        self.n_graphs = len(graphs)
        self.sizes = sizes
        self.gid = np.repeat(np.arange(len(graphs)), sizes)
        feat = np.concatenate([[COLOR_INDEX[c] for c in g.colors] for g in graphs]) if n_tot else np.zeros(0, int)
        self.feat = feat.astype(int)
        self.X = np.zeros((n_tot, N_FEAT))
        self.X[np.arange(n_tot), self.feat] = 1.0
        self.Xs = sp.csr_matrix(self.X)
        rows, cols = [], []
        for g, o in zip(graphs, offs):
            for u, v in g.sorted_edges:
                rows += [u + o, v + o]
                cols += [v + o, u + o]
        self.A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_tot, n_tot))
        self.P = sp.csr_matrix((np.ones(n_tot), (self.gid, np.arange(n_tot))), shape=(len(graphs), n_tot))
        self.AX = self.A @ self.X
        self.C = self.P @ self.X
        self.y = np.array([-1 if g.label is None else g.label for g in graphs])
        self.inv_size = 1.0 / np.maximum(sizes, 1)
        self.targets = None
        if designated is not None:
            self.targets = np.concatenate([designated.node_targets(g, int(y)) for g, y in zip(graphs, self.y)])


def _softplus(s: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, s)


def _sigmoid(s: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * s))


@dataclass
class Forward:
    Z: np.ndarray
    H: np.ndarray
    s: np.ndarray
    p: np.ndarray
    w: np.ndarray
    Hg: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def forward(params: Mapping[str, np.ndarray], b: Batch, scale: float, hard: bool = False) -> Forward:
    Z = params["Ws"][b.feat] + b.AX @ params["Wn"] + ((scale * b.C) @ params["Wr"])[b.gid]
    H = np.tanh(Z)
    s = H @ params["we"]
    p = _sigmoid(s)
    w = np.where(p >= 0.5, p, 0.0) if hard else p
    Hg = np.bincount(b.gid * N_FEAT + b.feat, weights=w, minlength=b.n_graphs * N_FEAT).reshape(b.n_graphs, N_FEAT)
    logits = Hg @ params["Wc"].T
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(probs))):
        raise ModelError("non-finite activation")
    return Forward(Z, H, s, p, w, Hg, logits, probs)


@dataclass
class LossTerms:
    total: float
    clf: float
    expl: float = 0.0
    reg: float = 0.0


def loss_and_grad(
    params: Mapping[str, np.ndarray],
    b: Batch,
    hp: TrainHP,
    mode: str,
    need_grad: bool = True,
) -> tuple[LossTerms, dict[str, np.ndarray] | None, Forward]:
    """Full-batch objective and its gradient.

    ``mode="attack"``: CE + mean_G (1/|V|) sum_u c_u BCE(p_u, t_u), with c_u = pos_weight on targets.
    ``mode="smgnn"``: CE + mean_G (1/|V|) sum_u (lam1 p_u + lam2 H(p_u)).
    """
    scale = hp.readout_scale
    f = forward(params, b, scale)
    G = b.n_graphs
    logz = np.log(np.exp(f.logits - f.logits.max(1, keepdims=True)).sum(1)) + f.logits.max(1)
    ce = float(np.mean(logz - f.logits[np.arange(G), b.y]))
    per_node = b.inv_size[b.gid] / G
    s, p = f.s, f.p
    if mode == "attack":
        t = b.targets
        c = np.where(t > 0.5, hp.pos_weight, 1.0)
        bce = c * (_softplus(s) - t * s)
        expl, reg = float(np.sum(per_node * bce)), 0.0
        ds_reg = per_node * c * (p - t)
    elif mode == "smgnn":
        ent = p * _softplus(-s) + (1.0 - p) * _softplus(s)
        expl, reg = 0.0, float(np.sum(per_node * (hp.lam1 * p + hp.lam2 * ent)))
        ds_reg = per_node * p * (1.0 - p) * (hp.lam1 - hp.lam2 * s)
    else:
        raise ValueError(f"unknown training mode {mode!r}")
    terms = LossTerms(ce + expl + reg, ce, expl, reg)
    if not need_grad:
        return terms, None, f

    onehot = np.zeros_like(f.probs)
    onehot[np.arange(G), b.y] = 1.0
    dlogits = (f.probs - onehot) / G
    dWc = dlogits.T @ f.Hg
    dHg = dlogits @ params["Wc"]
    dp = dHg[b.gid, b.feat]
    ds = dp * p * (1.0 - p) + ds_reg
    dwe = f.H.T @ ds
    dZ = np.outer(ds, params["we"]) * (1.0 - f.H * f.H)
    grads = {
        "Ws": b.Xs.T @ dZ,
        "Wn": b.AX.T @ dZ,
        "Wr": (scale * b.C).T @ (b.P @ dZ),
        "we": dwe,
        "Wc": dWc,
    }
    return terms, grads, f


class _Adam:
    def __init__(self, params: Mapping[str, np.ndarray], lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        self.t += 1
        for k, g in grads.items():
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mh = self.m[k] / (1 - self.b1 ** self.t)
            vh = self.v[k] / (1 - self.b2 ** self.t)
            params[k] = params[k] - self.lr * mh / (np.sqrt(vh) + self.eps)


class _GD:
    def __init__(self, params, lr: float):
        self.lr = lr

    def step(self, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        for k, g in grads.items():
            params[k] = params[k] - self.lr * g


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    epochs: int
    history: list[dict] = field(default_factory=list)
    stopped_early: bool = False


def hard_accuracy(params: Mapping[str, np.ndarray], b: Batch, scale: float) -> tuple[float, float]:
    f = forward(params, b, scale, hard=True)
    G = b.n_graphs
    acc = float(np.mean(f.probs.argmax(1) == b.y))
    ce = float(np.mean(-np.log(np.maximum(f.probs[np.arange(G), b.y], 1e-300))))
    return acc, ce


def _stop(hp: TrainHP, mode: str, terms: LossTerms, acc: float, ce: float) -> bool:
    if mode != "attack" and (hp.lam1 or hp.lam2):
        # with active regularizers the objective is not done once it classifies
        return False
    return acc >= hp.stop_acc and ce <= hp.stop_loss and (mode != "attack" or terms.expl <= hp.stop_expl)


def _flatten(params: Mapping[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(params[k]) for k in PARAM_NAMES])


def _unflatten(x: np.ndarray, like: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    out, i = {}, 0
    for k in PARAM_NAMES:
        n = like[k].size
        out[k] = x[i:i + n].reshape(like[k].shape).copy()
        i += n
    return out


def _train_lbfgs(params: dict[str, np.ndarray], b: Batch, hp: TrainHP, mode: str) -> TrainResult:
    history: list[dict] = []
    state = {"it": 0, "terms": None, "stopped": False}

    def fg(x: np.ndarray) -> tuple[float, np.ndarray]:
        try:
            terms, grads, _ = loss_and_grad(_unflatten(x, params), b, hp, mode)
        except ModelError as exc:
            raise TrainingError(str(exc), state["it"]) from exc
        if not math.isfinite(terms.total):
            raise TrainingError("loss diverged to a non-finite value", state["it"])
        state["terms"] = terms
        return terms.total, _flatten(grads)

    def callback(intermediate_result) -> None:
        state["it"] += 1
        it = state["it"]
        if it % hp.check_every:
            return
        cur = _unflatten(intermediate_result.x, params)
        acc, ce = hard_accuracy(cur, b, hp.readout_scale)
        terms = state["terms"]
        history.append({"epoch": it, "loss": terms.total, "clf": terms.clf, "expl": terms.expl,
                        "acc": acc, "hard_ce": ce})
        if _stop(hp, mode, terms, acc, ce):
            state["stopped"] = True
            raise StopIteration

    bounds = None
    if hp.wc_bound is not None:
        B = hp.wc_bound
        bounds = [(-B, B) if k == "Wc" else (None, None) for k in PARAM_NAMES for _ in range(params[k].size)]
        params = {**params, "Wc": np.clip(params["Wc"], -B, B)}
    res = minimize(fg, _flatten(params), jac=True, method="L-BFGS-B", callback=callback, bounds=bounds,
                   options={"maxiter": hp.epochs, "gtol": 1e-12, "ftol": 1e-15})
    out = _unflatten(res.x, params)
    if not history or history[-1]["epoch"] != state["it"]:
        acc, ce = hard_accuracy(out, b, hp.readout_scale)
        terms = loss_and_grad(out, b, hp, mode, need_grad=False)[0]
        history.append({"epoch": state["it"], "loss": terms.total, "clf": terms.clf, "expl": terms.expl,
                        "acc": acc, "hard_ce": ce})
    return TrainResult(out, state["it"], history, state["stopped"])


def _train(params: Mapping[str, np.ndarray], b: Batch, hp: TrainHP, mode: str) -> TrainResult:
    params = {k: np.array(v, dtype=float) for k, v in params.items()}
    if hp.optimizer == "lbfgs":
        return _train_lbfgs(params, b, hp, mode)
    if hp.optimizer not in ("adam", "gd"):
        raise ValueError(f"unknown optimizer {hp.optimizer!r}")
    opt = _Adam(params, hp.lr) if hp.optimizer == "adam" else _GD(params, hp.lr)
    history: list[dict] = []
    epoch = 0
    for epoch in range(1, hp.epochs + 1):
        try:
            terms, grads, _ = loss_and_grad(params, b, hp, mode)
        except ModelError as exc:
            raise TrainingError(str(exc), epoch) from exc
        if not math.isfinite(terms.total):
            raise TrainingError("loss diverged to a non-finite value", epoch)
        opt.step(params, grads)
        if epoch % hp.check_every == 0 or epoch == hp.epochs:
            acc, ce = hard_accuracy(params, b, hp.readout_scale)
            history.append({"epoch": epoch, "loss": terms.total, "clf": terms.clf, "expl": terms.expl,
                            "acc": acc, "hard_ce": ce})
            if _stop(hp, mode, terms, acc, ce):
                log.info("stopping at epoch %d: acc=%.4f ce=%.4f", epoch, acc, ce)
                return TrainResult(params, epoch, history, True)
    return TrainResult(params, epoch, history, False)


def train_attack(params, graphs: Sequence[Graph], designated: DesignatedExplanation, hp: TrainHP) -> TrainResult:
    return _train(params, Batch(graphs, designated), hp, "attack")


def train_natural_smgnn(params, graphs: Sequence[Graph], hp: TrainHP) -> TrainResult:
    return _train(params, Batch(graphs), hp, "smgnn")


class TrainableSEGNN(SEGNN):
    def __init__(self, params: Mapping[str, np.ndarray], hp: TrainHP | None = None, name: str = "trainable",
                 seed: int | None = None, meta: dict | None = None):
        self.params = {k: np.asarray(v, dtype=float) for k, v in params.items()}
        self.hp = hp or TrainHP(hidden=self.params["we"].shape[0])
        self.name = name
        self.seed = seed
        self.meta = meta or {}
        self.selection = Threshold(0.5)

    def _node_scores(self, g: Graph) -> np.ndarray:
        x = g.one_hot()
        ax = np.zeros_like(x)
        for u, v in g.sorted_edges:
            ax[u] += x[v]
            ax[v] += x[u]
        c = x.sum(axis=0) * self.hp.readout_scale
        z = x @ self.params["Ws"] + ax @ self.params["Wn"] + c @ self.params["Wr"]
        s = np.tanh(z) @ self.params["we"]
        p = _sigmoid(s)
        if not np.all(np.isfinite(p)):
            raise ModelError("non-finite activation")
        return p

    def extract(self, g: Graph) -> RelevanceScores:
        return RelevanceScores(self._node_scores(g))

    def classify(self, g: Graph, scores: RelevanceScores, expl: Explanation) -> Prediction:
        w = np.zeros(g.n)
        idx = sorted(expl.nodes)
        w[idx] = scores.values[idx]
        hg = (w[:, None] * g.one_hot()).sum(axis=0)
        logits = self.params["Wc"] @ hg
        e = np.exp(logits - logits.max())
        return Prediction.of(e / e.sum())

    def predict_batch(self, graphs: Sequence[Graph]) -> np.ndarray:
        return forward(self.params, Batch(graphs), self.hp.readout_scale, hard=True).probs

    def describe(self) -> dict:
        return {"name": self.name, "seed": self.seed, **self.meta}

    # checkpoint: named weight matrices + hyperparameters + seed
    def to_json(self) -> dict:
        return {
            "kind": "trainable",
            "name": self.name,
            "seed": self.seed,
            "hp": asdict(self.hp),
            "params": {k: v.tolist() for k, v in self.params.items()},
            "meta": self.meta,
        }

    def save(self, path: str | Path, manifest: dict | None = None) -> None:
        d = self.to_json()
        if manifest is not None:
            d["manifest"] = manifest
        Path(path).write_text(json.dumps(d, sort_keys=True, indent=1))

    @classmethod
    def from_json(cls, d: Mapping) -> "TrainableSEGNN":
        if d.get("kind") != "trainable":
            raise ModelError(f"not a trainable checkpoint: kind={d.get('kind')!r}")
        params = {k: np.array(d["params"][k], dtype=float) for k in PARAM_NAMES}
        return cls(params, TrainHP(**d["hp"]), d.get("name", "trainable"), d.get("seed"), d.get("meta"))

    @classmethod
    def load(cls, path: str | Path) -> "TrainableSEGNN":
        return cls.from_json(json.loads(Path(path).read_text()))


def eq1_params(hidden: int = 3, readout_scale: float = 0.1, gain: float = 10.0, big: float = 1e4) -> dict[str, np.ndarray]:
    """Weights realizing the degenerate anchor mapping (green for #red >= #blue, else violet).

    Unit 0 saturates at +1 everywhere. Unit 1 is +1 only on a green node with
    #red - #blue >= 0, unit 2 only on a violet node with #blue - #red >= 1;
    both sit at -1 on every other node. The classifier decodes green -> 0 and
    violet -> 1 from the score-weighted readout.
    """
    if hidden < 3:
        raise ValueError("need at least three hidden units")
    P = {k: np.zeros_like(v) for k, v in init_params(hidden).items()}
    r, b, gr, vi = (COLOR_INDEX[c] for c in (Color.RED, Color.BLUE, Color.GREEN, Color.VIOLET))
    a = 4.0 / readout_scale  # half a count of margin -> pre-activation 2
    P["Ws"][:, 0] = big
    P["Ws"][:, 1] = -big
    P["Ws"][gr, 1] = 0.5 * a * readout_scale
    P["Wr"][r, 1], P["Wr"][b, 1] = a, -a
    P["Ws"][:, 2] = -big
    P["Ws"][vi, 2] = -0.5 * a * readout_scale
    P["Wr"][b, 2], P["Wr"][r, 2] = a, -a
    P["we"][:3] = [gain / 2, gain, gain]
    P["Wc"][0, gr] = 2 * gain
    P["Wc"][1, vi] = 2 * gain
    return P


def eval_f1_designated(model: SEGNN, graphs: Sequence[Graph], designated: DesignatedExplanation) -> float | None:
    """Macro F1 over node targets {0, 1} on correctly classified graphs.

    Scores are binarized with 0.9 on target nodes and 0.1 on the others.
    Returns None when no graph is classified correctly.
    """
    tp = fp = fn = tn = 0
    any_correct = False
    for g in graphs:
        scores, _, pred = model.forward(g)
        if pred.label != g.label:
            continue
        any_correct = True
        t = designated.node_targets(g, g.label) > 0.5
        p = scores.values
        yhat = np.where(t, p > 0.9, p > 0.1)
        tp += int(np.sum(yhat & t))
        fp += int(np.sum(yhat & ~t))
        fn += int(np.sum(~yhat & t))
        tn += int(np.sum(~yhat & ~t))
    if not any_correct:
        return None

    def f1(tp_: int, fp_: int, fn_: int) -> float:
        denom = 2 * tp_ + fp_ + fn_
        return 2 * tp_ / denom if denom else 1.0

    # class 1 = target nodes, class 0 = non-target nodes
    return 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp))


def accuracy(model: SEGNN, graphs: Sequence[Graph]) -> float:
    if isinstance(model, TrainableSEGNN):
        probs = model.predict_batch(graphs)
        return float(np.mean(probs.argmax(1) == np.array([g.label for g in graphs])))
    return float(np.mean([model.predict(g).label == g.label for g in graphs]))


def score_mass(model: SEGNN, graphs: Sequence[Graph]) -> float:
    """Mean over graphs of sum_u p_u / |V|."""
    return float(np.mean([model.extract(g).values.mean() if g.n else 0.0 for g in graphs]))
