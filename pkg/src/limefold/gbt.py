"""Second-order gradient boosting on logistic loss with exact greedy splits.

Trees route ``x < threshold`` (and missing values) to the left child.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np


@dataclass
class GbtParams:
    rounds: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    seed: int = 0  # no stochastic component yet; kept so configs round-trip


@dataclass
class TreeNode:
    # split node when feature is not None, otherwise leaf
    feature: Optional[int] = None
    threshold: float = 0.0
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    score: float = 0.0
    gain: float = 0.0
    cover: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"leaf": self.score, "cover": self.cover}
        return {"feature": self.feature, "threshold": self.threshold, "gain": self.gain,
                "cover": self.cover, "left": self.left.to_dict(), "right": self.right.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "leaf" in d:
            return cls(score=float(d["leaf"]), cover=float(d.get("cover", 0.0)))
        return cls(feature=int(d["feature"]), threshold=float(d["threshold"]),
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]),
                   gain=float(d.get("gain", 0.0)), cover=float(d.get("cover", 0.0)))


class _FlatTree:
    """Array form of a tree for vectorized prediction."""

    def __init__(self, root: TreeNode):
        feats, thr, left, right, score = [], [], [], [], []

        def visit(node):
            i = len(feats)
            feats.append(-1 if node.is_leaf else node.feature)
            thr.append(node.threshold)
            left.append(-1)
            right.append(-1)
            score.append(node.score)
            if not node.is_leaf:
                left[i] = visit(node.left)
                right[i] = visit(node.right)
            return i

        visit(root)
        self.feature = np.array(feats)
        self.threshold = np.array(thr)
        self.left = np.array(left)
        self.right = np.array(right)
        self.score = np.array(score)
        self.depth = root.depth()

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=int)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            f = self.feature[idx]
            internal = f >= 0
            xv = X[rows, np.where(internal, f, 0)]
            go_left = ~(xv >= self.threshold[idx])  # NaN goes left
            nxt = np.where(go_left, self.left[idx], self.right[idx])
            idx = np.where(internal, nxt, idx)
        return self.score[idx]


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass
class GbtModel:
    trees: List[TreeNode]
    learning_rate: float
    base_score: float
    feature_names: List[str]
    _flat: List[_FlatTree] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._flat = [_FlatTree(t) for t in self.trees]

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.full(len(X), self.base_score)
        for t in self._flat:
            out += self.learning_rate * t.predict(X)
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Positive-class probability for each row of ``X``."""
        return sigmoid(self.margin(X))

    def to_json(self) -> str:
        doc = {"learning_rate": self.learning_rate, "base_score": self.base_score,
               "feature_names": self.feature_names, "trees": [t.to_dict() for t in self.trees]}
        return json.dumps(doc, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GbtModel":
        doc = json.loads(text)
        return cls([TreeNode.from_dict(t) for t in doc["trees"]], float(doc["learning_rate"]),
                   float(doc["base_score"]), list(doc["feature_names"]))


def predict_proba(model: GbtModel, row: Sequence[float]) -> float:
    return float(model.predict_proba(np.asarray(row, dtype=float)[None, :])[0])


def predict_label(model: GbtModel, row: Sequence[float], threshold: float = 0.5) -> str:
    return "+" if predict_proba(model, row) >= threshold else "-"


def logistic_loss(model: GbtModel, X: np.ndarray, y: np.ndarray) -> float:
    m = model.margin(X)
    # log(1 + e^m) - y m, computed stably
    return float(np.mean(np.logaddexp(0.0, m) - y * m))


class SingleClassError(ValueError):
    pass


_TIE = 1e-9


def _best_split(X, g, h, rows, params):
    """Return (gain, feature, threshold) of the best split of ``rows`` or None."""
    G, H = g[rows].sum(), h[rows].sum()
    lam = params.reg_lambda
    parent = G * G / (H + lam)
    best = None
    for j in range(X.shape[1]):
        col = X[rows, j]
        present = ~np.isnan(col)
        miss_g = g[rows][~present].sum()
        miss_h = h[rows][~present].sum()
        vals = col[present]
        if len(vals) < 2:
            continue
        order = np.argsort(vals, kind="stable")
        v = vals[order]
        gs = np.cumsum(g[rows][present][order]) + miss_g
        hs = np.cumsum(h[rows][present][order]) + miss_h
        cand = np.nonzero(v[1:] > v[:-1])[0]  # split after position i
        if len(cand) == 0:
            continue
        GL, HL = gs[cand], hs[cand]
        GR, HR = G - GL, H - HL
        ok = (HL >= params.min_child_weight) & (HR >= params.min_child_weight)
        if not ok.any():
            continue
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent)
        gain = np.where(ok, gain, -np.inf)
        top = gain.max()
        if top <= 1e-12:
            continue
        # near-equal gains count as ties so summation order cannot pick the split
        k = int(np.argmax(gain >= top - _TIE * max(1.0, abs(top))))  # lowest threshold
        if best is None or gain[k] > best[0] + _TIE * max(1.0, abs(best[0])):
            thr = (v[cand[k]] + v[cand[k] + 1]) / 2.0
            best = (float(gain[k]), j, float(thr))
    return best


def _grow(X, g, h, rows, depth, params) -> TreeNode:
    G, H = g[rows].sum(), h[rows].sum()
    leaf = TreeNode(score=float(-G / (H + params.reg_lambda)), cover=float(H))
    if depth >= params.max_depth or len(rows) < 2:
        return leaf
    split = _best_split(X, g, h, rows, params)
    if split is None:
        return leaf
    gain, j, thr = split
    col = X[rows, j]
    go_left = ~(col >= thr)
    return TreeNode(feature=j, threshold=thr, gain=gain, cover=float(H),
                    left=_grow(X, g, h, rows[go_left], depth + 1, params),
                    right=_grow(X, g, h, rows[~go_left], depth + 1, params))


def train(X: np.ndarray, y: np.ndarray, params: Optional[GbtParams] = None,
          feature_names: Optional[List[str]] = None) -> GbtModel:
    params = params or GbtParams()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training matrix must be non-empty and 2-D")
    if len(y) != len(X):
        raise ValueError("label vector length differs from row count")
    rate = y.mean()
    if rate in (0.0, 1.0):
        raise SingleClassError("labels contain a single class; use a constant classifier instead")
    names = feature_names or [f"f{j}" for j in range(X.shape[1])]
    base = math.log(rate / (1.0 - rate))
    model = GbtModel([], params.learning_rate, base, list(names))
    margin = np.full(len(X), base)
    all_rows = np.arange(len(X))
    for _ in range(params.rounds):
        p = sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        tree = _grow(X, g, h, all_rows, 0, params)
        model.trees.append(tree)
        flat = _FlatTree(tree)
        model._flat.append(flat)
        margin = margin + params.learning_rate * flat.predict(X)
    return model


@dataclass
class FeatureImportance:
    gain: Dict[str, float]
    splits: Dict[str, int]

    def ranked(self) -> List[str]:
        return sorted(self.gain, key=lambda f: (-self.gain[f], f))


def feature_importance(model: GbtModel) -> FeatureImportance:
    gain = {f: 0.0 for f in model.feature_names}
    splits = {f: 0 for f in model.feature_names}
    stack = list(model.trees)
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        name = model.feature_names[node.feature]
        gain[name] += node.gain
        splits[name] += 1
        stack.extend((node.left, node.right))
    return FeatureImportance(gain, splits)
