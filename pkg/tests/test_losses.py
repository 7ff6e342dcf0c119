import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xviewtrack.losses import (
    LinearHead, Mode, Sample, TrainingDiverged, UncertaintyWeights, conflict_free_ce,
    cross_view_ce, finite_diff_check, make_toy_batch, matching_accuracy, stack, toy_train,
    total_loss,
)


def naive_ce(W, b, x, labels):
    """Per-sample loop softmax cross-entropy."""
    total = 0.0
    for xi, y in zip(x, labels):
        logits = [float(np.dot(W[c], xi) + b[c]) for c in range(len(b))]
        top = max(logits)
        log_z = top + math.log(sum(math.exp(z - top) for z in logits))
        total += log_z - logits[y]
    return total / len(labels)


def naive_conflict_free(W, b, x, lids, lid_to_view):
    """Builds each sample's allowed class set explicitly."""
    total = 0.0
    for xi, y in zip(x, lids):
        allowed = [c for c in range(len(b)) if lid_to_view[c] == lid_to_view[y]]
        logits = {c: float(np.dot(W[c], xi) + b[c]) for c in allowed}
        top = max(logits.values())
        log_z = top + math.log(sum(math.exp(z - top) for z in logits.values()))
        total += log_z - logits[y]
    return total / len(lids)


def random_head(rng, n_classes, dim):
    return LinearHead(rng.normal(size=(n_classes, dim)), rng.normal(size=n_classes))


def test_uniform_logits_give_log_c():
    head = LinearHead(np.zeros((5, 3)), np.zeros(5))
    loss, _ = cross_view_ce(head, [[0.3, -1.0, 2.0]], [2])
    assert loss == pytest.approx(math.log(5), abs=1e-15)


def test_single_class_zero_loss():
    head = LinearHead(np.ones((1, 2)), np.zeros(1))
    loss, grads = cross_view_ce(head, [[1.0, 2.0]], [0])
    assert loss == 0.0
    assert np.all(grads["W"] == 0)


def test_cross_view_ce_matches_naive():
    rng = np.random.default_rng(0)
    head = random_head(rng, 5, 8)
    x = rng.normal(size=(16, 8))
    labels = rng.integers(0, 5, size=16)
    loss, _ = cross_view_ce(head, x, labels)
    assert abs(loss - naive_ce(head.W, head.b, x, labels)) <= 1e-10


def test_label_out_of_range():
    head = LinearHead(np.zeros((3, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        cross_view_ce(head, [[1.0, 1.0]], [3])
    with pytest.raises(ValueError):
        cross_view_ce(head, np.zeros((0, 2)), [])


def test_stack_samples():
    samples = [Sample(np.array([1.0, 2.0]), 0, 3, 1), Sample(np.array([0.0, 1.0]), 1, 0, 0)]
    x, gid, lid, view = stack(samples)
    assert x.shape == (2, 2) and list(gid) == [0, 1] and list(lid) == [3, 0] and list(view) == [1, 0]


def test_conflict_free_singleton_view_is_zero():
    rng = np.random.default_rng(1)
    head = random_head(rng, 3, 4)
    lid_to_view = np.array([0, 0, 1])  # class 2 is the only local ID of view 1
    loss, grads = conflict_free_ce(head, rng.normal(size=(1, 4)), [2], lid_to_view)
    assert loss == 0.0
    assert np.all(grads["W"] == 0) and np.all(grads["x"] == 0)


def test_conflict_free_single_view_equals_plain_ce():
    rng = np.random.default_rng(2)
    head = random_head(rng, 4, 6)
    x = rng.normal(size=(10, 6))
    lids = rng.integers(0, 4, size=10)
    cf, g_cf = conflict_free_ce(head, x, lids, np.zeros(4, dtype=int))
    ce, g_ce = cross_view_ce(head, x, lids)
    assert abs(cf - ce) <= 1e-12
    for k in g_cf:
        np.testing.assert_allclose(g_cf[k], g_ce[k], atol=1e-12)


def test_conflict_free_matches_naive():
    rng = np.random.default_rng(3)
    lid_to_view = np.array([0, 0, 1, 1, 2, 2])
    head = random_head(rng, 6, 8)
    lids = rng.integers(0, 6, size=18)
    x = rng.normal(size=(18, 8))
    loss, _ = conflict_free_ce(head, x, lids, lid_to_view)
    assert abs(loss - naive_conflict_free(head.W, head.b, x, lids, lid_to_view)) <= 1e-10


def test_conflict_free_unknown_view():
    head = LinearHead(np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError):
        conflict_free_ce(head, [[1.0, 0.0]], [0], [0])  # no view for class 1
    with pytest.raises(ValueError):
        conflict_free_ce(head, [[1.0, 0.0]], [0], [0, -1])


def test_other_view_rows_get_exactly_zero_gradient():
    rng = np.random.default_rng(4)
    lid_to_view = np.array([0, 0, 0, 1, 1, 2])
    head = random_head(rng, 6, 5)
    lids = np.array([0, 1, 2, 1, 0])  # all from view 0
    _, grads = conflict_free_ce(head, rng.normal(size=(5, 5)), lids, lid_to_view)
    assert np.all(grads["W"][3:] == 0.0)
    assert np.all(grads["b"][3:] == 0.0)
    assert np.any(grads["W"][:3] != 0.0)


def test_invariant_to_foreign_view_classes():
    rng = np.random.default_rng(5)
    head = random_head(rng, 4, 6)
    lid_to_view = np.array([0, 0, 1, 1])
    x = rng.normal(size=(8, 6))
    lids = rng.integers(0, 4, size=8)
    base, _ = conflict_free_ce(head, x, lids, lid_to_view)
    grown = LinearHead(np.vstack([head.W, 10 * rng.normal(size=(3, 6))]),
                       np.concatenate([head.b, [5.0, -2.0, 7.0]]))
    bigger, _ = conflict_free_ce(grown, x, lids, np.array([0, 0, 1, 1, 2, 2, 3]))
    assert abs(base - bigger) <= 1e-12


@settings(max_examples=50)
@given(st.integers(0, 10_000))
def test_conflict_free_nonnegative(seed):
    rng = np.random.default_rng(seed)
    n_cls = int(rng.integers(1, 7))
    lid_to_view = rng.integers(0, 3, size=n_cls)
    head = LinearHead(rng.normal(scale=5, size=(n_cls, 3)), rng.normal(size=n_cls))
    lids = rng.integers(0, n_cls, size=5)
    loss, _ = conflict_free_ce(head, rng.normal(size=(5, 3)), lids, lid_to_view)
    assert loss >= 0.0
    singleton = all(np.sum(lid_to_view == lid_to_view[y]) == 1 for y in lids)
    if singleton:
        assert loss == 0.0


def test_total_loss_examples():
    assert total_loss(0.0, 1.0, 1.0, UncertaintyWeights(0.0, 0.0))[0] == 1.0
    assert total_loss(0.0, 0.0, 0.0, UncertaintyWeights(0.0, 0.0))[0] == 0.0
    # 0.5 * (e^1.85 + 2 e^1.05 - 2.9) at the initial weights
    expected = 0.5 * (math.exp(1.85) + 2 * math.exp(1.05) - 2.9)
    value, _ = total_loss(1.0, 1.0, 1.0, UncertaintyWeights(-1.85, -1.05))
    assert value == pytest.approx(expected, abs=1e-12)
    assert value == pytest.approx(4.5875608794, abs=1e-9)


def test_uncertainty_weights_default_to_initial_values():
    w = UncertaintyWeights()
    assert (w.w1, w.w2) == (-1.85, -1.05)


@given(st.floats(0, 10), st.floats(0, 10))
def test_total_loss_at_zero_weights(ls, lc):
    assert total_loss(0.0, ls, lc, UncertaintyWeights(0.0, 0.0))[0] == pytest.approx(0.5 * (ls + lc))


def test_finite_diff_on_quadratic():
    a = np.array([[3.0, 1.0], [1.0, 2.0]])

    def quad(p):
        v = p["v"]
        return 0.5 * v @ a @ v, {"v": a @ v}

    assert finite_diff_check(quad, {"v": np.array([0.7, -1.3])}) <= 1e-8


def test_finite_diff_detects_wrong_gradient():
    def wrong(p):
        return float(np.sum(p["v"] ** 2)), {"v": p["v"]}  # true gradient is 2v

    assert finite_diff_check(wrong, {"v": np.array([1.0, 2.0])}) > 0.1


def test_finite_diff_epsilon_bounds():
    with pytest.raises(ValueError):
        finite_diff_check(lambda p: (0.0, {"v": 0.0}), {"v": np.zeros(1)}, epsilon=0.1)


def _params(rng, n_cls, dim, n):
    return {"W": rng.normal(size=(n_cls, dim)), "b": rng.normal(size=n_cls), "x": rng.normal(size=(n, dim))}


def test_gradients_conflict_free():
    rng = np.random.default_rng(6)
    lids = rng.integers(0, 6, size=9)
    lid_to_view = np.array([0, 0, 1, 1, 2, 2])

    def fn(p):
        return conflict_free_ce(LinearHead(p["W"], p["b"]), p["x"], lids, lid_to_view)

    assert finite_diff_check(fn, _params(rng, 6, 8, 9), epsilon=1e-5) <= 1e-4


def test_gradients_cross_view():
    rng = np.random.default_rng(7)
    labels = rng.integers(0, 5, size=12)

    def fn(p):
        return cross_view_ce(LinearHead(p["W"], p["b"]), p["x"], labels)

    assert finite_diff_check(fn, _params(rng, 5, 8, 12), epsilon=1e-5) <= 1e-4


def test_gradients_total_loss():
    def fn(p):
        v, g = total_loss(0.8, 1.7, 0.4, UncertaintyWeights(*p["w"]))
        return v, {"w": np.array([g["w1"], g["w2"]])}

    assert finite_diff_check(fn, {"w": np.array([-1.85, -1.05])}) <= 1e-4


def test_full_model_gradients():
    from xviewtrack.losses import init_model, model_loss

    batch = make_toy_batch(n_ids=3, n_views=2, per_pair=2, dim=4, seed=2)
    for mode in Mode:
        heads = init_model(mode, batch, hidden=5, emb=3, seed=1)
        names = sorted(heads)

        def fn(p):
            hs = {k: LinearHead(p[k + ".W"], p[k + ".b"]) for k in names}
            v, _, g = model_loss(mode, hs, batch, UncertaintyWeights())
            return v, {k + "." + part: g[k][part] for k in names for part in ("W", "b")}

        params = {k + "." + part: getattr(heads[k], part) for k in names for part in ("W", "b")}
        assert finite_diff_check(fn, params) <= 1e-4, mode


def test_zero_epochs_returns_initialization():
    batch = make_toy_batch(seed=0)
    result = toy_train(batch, Mode.DECOUPLED_CONFLICT_FREE, epochs=0, seed=4)
    assert len(result.trace) == 1
    for k, h in result.heads.items():
        np.testing.assert_array_equal(h.W, result.initial[k].W)
        np.testing.assert_array_equal(h.b, result.initial[k].b)


def test_training_descends():
    batch = make_toy_batch(n_ids=4, n_views=3, seed=1)
    result = toy_train(batch, Mode.DECOUPLED_CONFLICT_FREE, epochs=200, lr=0.5, seed=1)
    assert result.trace[-1] < result.trace[0]


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported():
    batch = make_toy_batch(seed=0)
    with pytest.raises(TrainingDiverged):
        toy_train(batch, Mode.SHARED, epochs=50, lr=1e6, seed=0)


def test_learned_uncertainty_weight_moves():
    batch = make_toy_batch(seed=0)
    result = toy_train(batch, Mode.DECOUPLED_CONFLICT_FREE, epochs=20, seed=0, learn_weights=True)
    assert result.weights.w1 == -1.85
    assert result.weights.w2 != -1.05


def test_matching_accuracy_bounds():
    batch = make_toy_batch(seed=0)
    result = toy_train(batch, Mode.SHARED, epochs=5, seed=0)
    acc = matching_accuracy(Mode.SHARED, result.heads, batch)
    assert 0.0 <= acc <= 1.0
