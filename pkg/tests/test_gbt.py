import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from limefold import gbt
from limefold.gbt import GbtModel, GbtParams, SingleClassError, TreeNode


def sig(z):
    return 1 / (1 + math.exp(-z))


def test_zero_rounds_predicts_prior():
    X = np.zeros((8, 1))
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0])
    m = gbt.train(X, y, GbtParams(rounds=0))
    assert m.trees == []
    assert np.allclose(m.predict_proba(X), 3 / 8)


def test_single_stump_matches_closed_form():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    lam, eta = 1.0, 0.3
    m = gbt.train(X, y, GbtParams(rounds=1, max_depth=1, learning_rate=eta, reg_lambda=lam,
                                       min_child_weight=0.0))
    root = m.trees[0]
    assert root.feature == 0 and root.threshold == 1.5
    # base log-odds 0, so p = 0.5, g = p - y, h = 0.25
    gl, hl = 2 * 0.5, 2 * 0.25
    gr, hr = 2 * -0.5, 2 * 0.25
    assert root.left.score == pytest.approx(-gl / (hl + lam))
    assert root.right.score == pytest.approx(-gr / (hr + lam))
    assert root.gain == pytest.approx(0.5 * (gl ** 2 / (hl + lam) + gr ** 2 / (hr + lam) - 0))
    expected = [sig(eta * root.left.score)] * 2 + [sig(eta * root.right.score)] * 2
    assert np.allclose(m.predict_proba(X), expected)


def test_xor_is_learned():
    # uneven counts: on a perfectly balanced table no first split has gain
    counts = [3, 5, 4, 6]
    table = [[0, 0], [0, 1], [1, 0], [1, 1]]
    X = np.array([r for r, c in zip(table, counts) for _ in range(c)], dtype=float)
    y = np.array([int(a != b) for a, b in X])
    m = gbt.train(X, y, GbtParams(rounds=60, max_depth=2, learning_rate=0.3, min_child_weight=0.0))
    assert [gbt.predict_label(m, r) for r in np.array(table, dtype=float)] == ["-", "+", "+", "-"]


def test_training_loss_never_increases_with_rounds():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(120, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] ** 2 + rng.normal(scale=0.3, size=120) > 0.4).astype(int)
    m = gbt.train(X, y, GbtParams(rounds=30))
    losses = []
    for r in range(31):
        sub = GbtModel(m.trees[:r], m.learning_rate, m.base_score, m.feature_names)
        losses.append(gbt.logistic_loss(sub, X, y))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))


def test_missing_values_route_left():
    node = TreeNode(feature=0, threshold=1.0, left=TreeNode(score=-1.0), right=TreeNode(score=2.0))
    m = GbtModel([node], 1.0, 0.0, ["a"])
    assert m.margin(np.array([[np.nan], [0.5], [1.0]])).tolist() == [-1.0, -1.0, 2.0]


def test_single_class_rejected():
    with pytest.raises(SingleClassError):
        gbt.train(np.zeros((3, 1)), np.ones(3))


def test_arity_checked_at_prediction():
    m = gbt.train(np.array([[0.0], [1.0]]), np.array([0, 1]), GbtParams(rounds=2))
    with pytest.raises(ValueError, match="expected 1"):
        m.predict_proba(np.zeros((1, 3)))


def test_json_round_trip_preserves_predictions():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(60, 3))
    X[::7, 1] = np.nan
    y = (X[:, 0] > 0).astype(int)
    m = gbt.train(X, y, GbtParams(rounds=10), ["a", "b", "c"])
    m2 = GbtModel.from_json(m.to_json())
    assert np.array_equal(m.predict_proba(X), m2.predict_proba(X))
    assert m2.to_json() == m.to_json()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_row_order_does_not_change_the_model(seed):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(30, 3)).astype(float)
    y = rng.integers(0, 2, size=30)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    perm = rng.permutation(30)
    p = GbtParams(rounds=5, max_depth=2)
    a = gbt.train(X, y, p).predict_proba(X)
    b = gbt.train(X[perm], y[perm], p).predict_proba(X)
    assert np.allclose(a, b, atol=1e-9)


def _walk_importance(tree, names, acc):
    # recursive walk, independent of the library's stack traversal
    if tree.feature is None:
        return
    acc.setdefault(names[tree.feature], [0.0, 0])
    acc[names[tree.feature]][0] += tree.gain
    acc[names[tree.feature]][1] += 1
    _walk_importance(tree.left, names, acc)
    _walk_importance(tree.right, names, acc)


def test_feature_importance_matches_tree_walk():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(80, 4))
    y = (X[:, 2] - X[:, 0] > 0).astype(int)
    m = gbt.train(X, y, GbtParams(rounds=8), ["a", "b", "c", "d"])
    acc = {}
    for t in m.trees:
        _walk_importance(t, m.feature_names, acc)
    imp = gbt.feature_importance(m)
    for name in m.feature_names:
        g, s = acc.get(name, [0.0, 0])
        assert imp.gain[name] == pytest.approx(g)
        assert imp.splits[name] == s
    assert set(imp.ranked()[:2]) == {"a", "c"}
