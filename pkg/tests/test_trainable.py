from dataclasses import replace

import numpy as np
import pytest

from faithaudit.datasets import iter_small_bacolorgv, label_bacolorgv
from faithaudit.graph import Color, Graph, RelevanceScores
from faithaudit.models import DegenerateColorGV, Prediction
from faithaudit.models.base import SEGNN
from faithaudit.models.trainable import (
    GREEN_VIOLET,
    PARAM_NAMES,
    RED_BLUE,
    Batch,
    TrainableSEGNN,
    TrainHP,
    TrainingError,
    accuracy,
    eq1_params,
    eval_f1_designated,
    init_params,
    loss_and_grad,
    score_mass,
    train_attack,
    train_natural_smgnn,
    zero_params,
)

FD_STEP = 1e-5
FD_TOL = 1e-4


def numeric_grad(params, b, hp, mode):
    out = {}
    for k in PARAM_NAMES:
        g = np.zeros_like(params[k])
        it = np.nditer(params[k], flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            hi = {n: v.copy() for n, v in params.items()}
            lo = {n: v.copy() for n, v in params.items()}
            hi[k][idx] += FD_STEP
            lo[k][idx] -= FD_STEP
            f_hi = loss_and_grad(hi, b, hp, mode, need_grad=False)[0].total
            f_lo = loss_and_grad(lo, b, hp, mode, need_grad=False)[0].total
            g[idx] = (f_hi - f_lo) / (2 * FD_STEP)
        out[k] = g
    return out


def relative_error(a: dict, b: dict) -> float:
    va = np.concatenate([a[k].ravel() for k in PARAM_NAMES])
    vb = np.concatenate([b[k].ravel() for k in PARAM_NAMES])
    return float(np.linalg.norm(va - vb) / max(np.linalg.norm(va), np.linalg.norm(vb), 1e-300))


@pytest.fixture(scope="module")
def small():
    return list(iter_small_bacolorgv(12, max_colored=10, seed=5))


@pytest.mark.parametrize("mode,hp", [
    ("attack", TrainHP(hidden=4)),
    ("smgnn", TrainHP(hidden=4, lam1=0.4, lam2=1.0)),
])
@pytest.mark.parametrize("point", range(10))
def test_gradient_matches_central_differences(small, mode, hp, point):
    b = Batch(small, GREEN_VIOLET if mode == "attack" else None)
    params = init_params(hp.hidden, seed=100 + point, scale=0.8)
    _, grads, _ = loss_and_grad(params, b, hp, mode)
    assert relative_error(grads, numeric_grad(params, b, hp, mode)) <= FD_TOL


class TestForward:
    def test_zero_weights_give_half_scores_and_uniform_probs(self, test_split):
        m = TrainableSEGNN(zero_params(8), TrainHP())
        for g in test_split[:20]:
            scores, expl, pred = m.forward(g)
            assert np.all(scores.values == 0.5)
            assert pred.probs == pytest.approx((0.5, 0.5))

    def test_hand_set_weights_reproduce_degenerate_mapping(self, test_split):
        m = TrainableSEGNN(eq1_params(), TrainHP(hidden=3))
        ref = DegenerateColorGV()
        for g in test_split[:50]:
            assert m.predict(g).label == ref.predict(g).label
            assert m.explain(g).nodes == ref.explain(g).nodes

    def test_node_permutation_invariance(self, test_split):
        rng = np.random.default_rng(0)
        m = TrainableSEGNN(init_params(8, 3), TrainHP())
        for g in test_split[:20]:
            perm = rng.permutation(g.n)
            inv = {int(u): i for i, u in enumerate(perm)}
            h = Graph.build([g.colors[u] for u in perm], [(inv[u], inv[v]) for u, v in g.edges])
            assert m.predict(h).probs == pytest.approx(m.predict(g).probs, abs=1e-12)

    def test_batch_agrees_with_per_graph(self, test_split):
        m = TrainableSEGNN(init_params(8, 4), TrainHP())
        probs = m.predict_batch(test_split[:30])
        for row, g in zip(probs, test_split[:30]):
            assert row == pytest.approx(m.predict(g).probs, abs=1e-10)

    def test_classifier_has_no_bias(self):
        assert set(init_params(8, 0)) == set(PARAM_NAMES)
        assert init_params(8, 0)["Wc"].shape == (2, 5)


class TestTraining:
    def test_zero_lr_leaves_params_unchanged(self, small):
        p0 = init_params(4, 1)
        hp = TrainHP(hidden=4, optimizer="gd", lr=0.0, epochs=1, check_every=1)
        res = train_attack(p0, small, GREEN_VIOLET, hp)
        for k in PARAM_NAMES:
            assert np.array_equal(res.params[k], p0[k])

    def test_plain_classification_loss_decreases(self):
        graphs = list(iter_small_bacolorgv(10, seed=8))
        hp = TrainHP(hidden=4, optimizer="gd", lr=0.01, epochs=60, check_every=1, stop_acc=2.0)
        res = train_natural_smgnn(init_params(4, 2), graphs, hp)
        losses = [h["loss"] for h in res.history]
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
        assert losses[-1] < losses[0]

    def test_divergence_reports_epoch(self, small):
        params = init_params(4, 1)
        params["Ws"][0, 0] = np.nan
        hp = TrainHP(hidden=4, optimizer="gd", epochs=5, check_every=1)
        with pytest.raises(TrainingError) as info:
            train_attack(params, small, GREEN_VIOLET, hp)
        assert info.value.epoch == 1

    def test_attack_learns_the_designated_channel(self, colorgv):
        train = colorgv.split("train")[:600]
        res = train_attack(init_params(8, 1), train, GREEN_VIOLET, TrainHP())
        m = TrainableSEGNN(res.params, TrainHP())
        val = colorgv.split("val")
        assert accuracy(m, val) >= 0.95
        assert eval_f1_designated(m, val, GREEN_VIOLET) >= 0.95

    def test_sparsity_pressure_lowers_score_mass(self, colorgv):
        train = colorgv.split("train")[:600]
        test = colorgv.split("test")
        base = TrainHP(wc_bound=10.0)
        free = train_natural_smgnn(init_params(8, 2), train, base)
        sparse = train_natural_smgnn(init_params(8, 2), train, replace(base, lam1=0.4, lam2=1.0))
        m_free = TrainableSEGNN(free.params, base)
        m_sparse = TrainableSEGNN(sparse.params, base)
        assert score_mass(m_sparse, test) < score_mass(m_free, test)

    def test_unknown_optimizer(self, small):
        with pytest.raises(ValueError):
            train_attack(init_params(4, 1), small, GREEN_VIOLET, TrainHP(hidden=4, optimizer="sgd!"))

    def test_wc_bound_is_respected(self, small):
        hp = TrainHP(hidden=4, wc_bound=0.5, lam1=0.1)
        res = train_natural_smgnn(init_params(4, 1, scale=2.0), small, hp)
        assert np.abs(res.params["Wc"]).max() <= 0.5 + 1e-12


class _Oracle(SEGNN):
    """Scores are the designated indicator of the true label; classification is exact."""

    def __init__(self, const: float | None = None):
        self.const = const

    def extract(self, g):
        if self.const is not None:
            return RelevanceScores(np.full(g.n, self.const))
        return RelevanceScores(GREEN_VIOLET.node_targets(g, label_bacolorgv(g)))

    def classify(self, g, scores, expl):
        return Prediction.hard(label_bacolorgv(g))


class TestF1:
    def test_designated_indicator_scores_perfect(self, test_split):
        assert eval_f1_designated(_Oracle(), test_split, GREEN_VIOLET) == 1.0

    def test_half_scores_score_zero(self, test_split):
        assert eval_f1_designated(_Oracle(0.5), test_split, GREEN_VIOLET) == 0.0

    def test_no_correct_graph_is_missing(self, test_split):
        wrong = [g.with_label(1 - g.label) for g in test_split[:10]]
        assert eval_f1_designated(_Oracle(), wrong, GREEN_VIOLET) is None

    def test_designated_targets_disjoint(self):
        with pytest.raises(ValueError):
            type(RED_BLUE)({0: Color.RED, 1: Color.RED})


class TestCheckpoint:
    def test_round_trip(self, tmp_path, test_split):
        m = TrainableSEGNN(init_params(8, 9), TrainHP(), "x", seed=9, meta={"k": 1})
        path = tmp_path / "m.json"
        m.save(path, manifest={"command": "test"})
        back = TrainableSEGNN.load(path)
        assert back.seed == 9 and back.hp == m.hp and back.meta == {"k": 1}
        for g in test_split[:20]:
            assert back.predict(g) == m.predict(g)

    def test_wrong_kind(self):
        from faithaudit.models import ModelError
        with pytest.raises(ModelError):
            TrainableSEGNN.from_json({"kind": "analytic"})


@pytest.mark.slow
def test_natural_sparse_training_accuracy(colorgv):
    """Regularized training at lam1=0.4, lam2=1.0 should keep test accuracy >= 97% on every seed."""
    hp = TrainHP(wc_bound=10.0, lam1=0.4, lam2=1.0)
    train, test = colorgv.split("train"), colorgv.split("test")
    accs = []
    for seed in (1, 2, 3, 4, 5):
        res = train_natural_smgnn(init_params(hp.hidden, seed, hp.init_scale), train, hp)
        accs.append(accuracy(TrainableSEGNN(res.params, hp), test))
    assert min(accs) >= 0.97, accs
