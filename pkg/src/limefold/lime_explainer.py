"""Local linear surrogates over an interpretable binary space.

Each interpretable column asks "does the perturbed sample agree with x here?":
one column per binarized category indicator and one per numeric feature
(same discretized interval as x). A weighted ridge fit of the classifier's
positive-class probability on those columns yields the explanation.
"""
from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data_model import (MISSING, DataRow, Dataset, DiscretizationMap, Schema, encode_row,
                         format_interval, interval_index)


@dataclass
class LimeConfig:
    n_samples: int = 5000
    k: int = 8
    kernel_width: Optional[float] = None  # None -> 0.75 * sqrt(d)
    p_perturb: float = 0.5
    ridge: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.n_samples >= self.k >= 1:
            raise ValueError("need n_samples >= k >= 1")


@dataclass(frozen=True)
class Condition:
    feature: str
    kind: str  # "category" or "interval"
    value: str  # category label, or interval index as text
    equals: int = 1  # categorical indicator value (1 or 0)
    lower: float = -math.inf
    upper: float = math.inf

    @property
    def interval(self) -> int:
        return int(self.value)

    def __str__(self):
        if self.kind == "category":
            return f"{self.feature}_{self.value}={self.equals}"
        return f"{self.feature} in {format_interval(self.lower, self.upper)}"

    def to_dict(self) -> dict:
        d = {"feature": self.feature, "kind": self.kind, "value": self.value}
        if self.kind == "category":
            d["equals"] = self.equals
        else:
            d["lower"] = None if self.lower == -math.inf else self.lower
            d["upper"] = None if self.upper == math.inf else self.upper
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Condition":
        if d["kind"] == "category":
            return cls(d["feature"], "category", str(d["value"]), int(d["equals"]))
        lo = -math.inf if d.get("lower") is None else float(d["lower"])
        hi = math.inf if d.get("upper") is None else float(d["upper"])
        return cls(d["feature"], "interval", str(d["value"]), 1, lo, hi)


@dataclass
class Explanation:
    sample_id: object
    label: str
    pairs: List[Tuple[Condition, float]] = field(default_factory=list)
    intercept: float = 0.0

    def to_json(self) -> str:
        return json.dumps({"id": self.sample_id, "label": self.label,
                           "pairs": [{"condition": c.to_dict(), "weight": w} for c, w in self.pairs]})

    @classmethod
    def from_json(cls, line: str) -> "Explanation":
        d = json.loads(line)
        return cls(d["id"], d["label"],
                   [(Condition.from_dict(p["condition"]), float(p["weight"])) for p in d["pairs"]])


@dataclass
class PerturbedSample:
    values: Tuple
    x_prime: np.ndarray  # interpretable 0/1 vector
    f_of_x_prime: float = math.nan
    pi: float = math.nan


@dataclass
class TrainingStats:
    """Empirical per-feature distributions from the training split."""
    schema: Schema
    dmap: DiscretizationMap
    category_freq: Dict[str, Tuple[List[str], np.ndarray]]
    interval_freq: Dict[str, Tuple[np.ndarray, np.ndarray]]  # (interval ids, probs)
    interval_range: Dict[str, Dict[int, Tuple[float, float]]]

    @classmethod
    def from_dataset(cls, dataset: Dataset, dmap: DiscretizationMap) -> "TrainingStats":
        cat, ivf, rng_ = {}, {}, {}
        for j, f in enumerate(dataset.schema.features):
            col = [r.values[j] for r in dataset.rows if r.values[j] is not MISSING]
            if f.is_numeric:
                idx = [interval_index(dmap, f.name, v) for v in col]
                ids, counts = np.unique(idx, return_counts=True) if idx else (np.array([0]), np.array([1]))
                ivf[f.name] = (ids, counts / counts.sum())
                ranges = {}
                for i, v in zip(idx, col):
                    lo, hi = ranges.get(i, (v, v))
                    ranges[i] = (min(lo, v), max(hi, v))
                rng_[f.name] = ranges or {0: (0.0, 0.0)}
            else:
                vals, counts = np.unique(col, return_counts=True) if col else (np.array(f.domain[:1]), np.array([1]))
                cat[f.name] = ([str(v) for v in vals], counts / counts.sum())
        return cls(dataset.schema, dmap, cat, ivf, rng_)


@dataclass(frozen=True)
class _Column:
    feature: int
    category: Optional[str]  # None for numeric features


def interpretable_columns(schema: Schema) -> List[_Column]:
    cols = []
    for j, f in enumerate(schema.features):
        if f.is_numeric:
            cols.append(_Column(j, None))
        else:
            cols.extend(_Column(j, c) for c in f.domain)
    return cols


def interpret(schema: Schema, dmap: DiscretizationMap, x: Sequence, z: Sequence) -> np.ndarray:
    """Agreement vector between the original values ``x`` and perturbed values ``z``."""
    out = []
    for c in interpretable_columns(schema):
        f = schema.features[c.feature]
        a, b = x[c.feature], z[c.feature]
        if c.category is None:
            if a is MISSING or b is MISSING:
                out.append(1.0 if a is b else 0.0)
            else:
                same = interval_index(dmap, f.name, a) == interval_index(dmap, f.name, b)
                out.append(1.0 if same else 0.0)
        else:
            out.append(1.0 if (a == c.category) == (b == c.category) else 0.0)
    return np.array(out)


def sample_batch(x: DataRow, stats: TrainingStats, rng: np.random.Generator, n: int,
                 p_perturb: float = 0.5) -> Tuple[List[np.ndarray], np.ndarray]:
    """Draw ``n`` perturbations of ``x``.

    Returns per-feature value arrays (floats for numeric features, category
    positions with -1 for missing otherwise) and the interpretable matrix.
    """
    schema = stats.schema
    columns, interp = [], []
    for j, f in enumerate(schema.features):
        xv = x.values[j]
        flip = (rng.random(n) < p_perturb) if xv is not MISSING else np.zeros(n, dtype=bool)
        if f.is_numeric:
            ids, probs = stats.interval_freq[f.name]
            ranges = stats.interval_range[f.name]
            lo_of = np.array([ranges[i][0] for i in ids], dtype=float)
            hi_of = np.array([ranges[i][1] for i in ids], dtype=float)
            k = rng.choice(len(ids), size=n, p=probs)
            lo, hi = lo_of[k], hi_of[k]
            u = rng.random(n)
            vals = np.where(flip, lo + u * (hi - lo), np.nan if xv is MISSING else float(xv))
            columns.append(vals)
            if xv is MISSING:
                interp.append(np.ones(n))
            else:
                own = interval_index(stats.dmap, f.name, xv)
                idx = np.searchsorted(np.asarray(stats.dmap.cuts[f.name]), vals, side="right")
                interp.append((idx == own).astype(float))
        else:
            cats, probs = stats.category_freq[f.name]
            pos = np.array([f.domain.index(c) for c in cats])
            drawn = pos[rng.choice(len(cats), size=n, p=probs)]
            own = -1 if xv is MISSING else f.domain.index(xv)
            vals = np.where(flip, drawn, own)
            columns.append(vals)
            for k in range(len(f.domain)):
                interp.append(((vals == k) == (own == k)).astype(float))
    return columns, np.column_stack(interp) if interp else np.ones((n, 0))


def _encode_columns(schema: Schema, columns: List[np.ndarray]) -> np.ndarray:
    parts = []
    for f, vals in zip(schema.features, columns):
        if f.is_numeric:
            parts.append(vals[:, None])
        else:
            parts.append((vals[:, None] == np.arange(len(f.domain))[None, :]).astype(float))
    return np.hstack(parts)


def sample_around(x: DataRow, stats: TrainingStats, rng: np.random.Generator,
                  p_perturb: float = 0.5) -> PerturbedSample:
    """One perturbation of ``x``; features are resampled independently with
    probability ``p_perturb`` from their training distributions."""
    columns, Z = sample_batch(x, stats, rng, 1, p_perturb)
    values = []
    for f, vals in zip(stats.schema.features, columns):
        v = vals[0]
        if f.is_numeric:
            values.append(MISSING if np.isnan(v) else float(v))
        else:
            values.append(MISSING if v < 0 else f.domain[int(v)])
    return PerturbedSample(tuple(values), Z[0])


def kernel_pi(x_interp: np.ndarray, x_self: np.ndarray, width: float) -> np.ndarray:
    """Exponential kernel exp(-D^2 / width^2) on Euclidean distance."""
    d2 = np.sum((np.atleast_2d(x_interp) - x_self) ** 2, axis=-1)
    out = np.exp(-d2 / width ** 2)
    return out if np.ndim(x_interp) > 1 else float(out[0])


def weighted_ridge(Z: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: float) -> Tuple[np.ndarray, float]:
    """Weighted least squares with an unpenalized intercept. Returns (coef, intercept)."""
    sw = w.sum()
    zm = (w @ Z) / sw
    ym = float(w @ y) / sw
    Zc = Z - zm
    yc = y - ym
    A = Zc.T @ (Zc * w[:, None])
    b = Zc.T @ (w * yc)
    lam = ridge
    while True:
        M = A + lam * np.eye(A.shape[0])
        try:
            coef = np.linalg.solve(M, b)
            if np.all(np.isfinite(coef)) and np.linalg.cond(M) < 1e14:
                break
        except np.linalg.LinAlgError:
            pass
        lam = max(lam * 10.0, 1e-8)
    return coef, ym - float(zm @ coef)


def row_rng(seed: int, row_id) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(str(row_id).encode())])


def _twin(schema: Schema, x: DataRow, c: _Column) -> bool:
    if c.category is None:
        return False
    f = schema.features[c.feature]
    xv = x.values[c.feature]
    if len(f.domain) != 2:
        return False
    return c.category != (f.domain[0] if xv is MISSING else xv)


def explain(model, x: DataRow, stats: TrainingStats, config: Optional[LimeConfig] = None,
            return_samples: bool = False):
    """Explain ``model``'s decision on ``x``.

    ``model`` needs ``predict_proba(matrix)`` over the one-hot/raw encoding of
    the schema. The first sample is ``x`` itself.
    """
    config = config or LimeConfig()
    schema = stats.schema
    rng = row_rng(config.seed, x.id)
    cols = interpretable_columns(schema)
    d = len(cols)
    columns, Z = sample_batch(x, stats, rng, config.n_samples - 1, config.p_perturb)
    X = np.vstack([encode_row(schema, x.values)[None, :], _encode_columns(schema, columns)])
    Z = np.vstack([np.ones((1, d)), Z])
    fx = np.asarray(model.predict_proba(X), dtype=float)
    width = config.kernel_width or 0.75 * math.sqrt(d)
    pi = kernel_pi(Z, np.ones(d), width)

    # a two-valued category yields two identical agreement columns; keep x's own
    fit = [i for i, c in enumerate(cols) if not _twin(schema, x, c)]
    coef = np.zeros(d)
    coef[fit], intercept = weighted_ridge(Z[:, fit], fx, pi, config.ridge)
    usable = [i for i in fit
              if x.values[cols[i].feature] is not MISSING and Z[:, i].min() < 1.0]
    usable.sort(key=lambda i: -abs(coef[i]))  # stable: ties keep column order
    pairs = []
    for i in usable[: config.k]:
        c = cols[i]
        f = schema.features[c.feature]
        xv = x.values[c.feature]
        if c.category is None:
            n = interval_index(stats.dmap, f.name, xv)
            lo, hi = stats.dmap.bounds(f.name, n)
            cond = Condition(f.name, "interval", str(n), 1, lo, hi)
        else:
            cond = Condition(f.name, "category", c.category, int(xv == c.category))
        pairs.append((cond, float(coef[i])))
    label = "+" if fx[0] >= 0.5 else "-"
    expl = Explanation(x.id, label, pairs, intercept)
    if return_samples:
        return expl, (X, Z, fx, pi), coef
    return expl


def explain_all(model, dataset: Dataset, stats: TrainingStats, config: Optional[LimeConfig] = None) -> List[Explanation]:
    return [explain(model, r, stats, config) for r in dataset.rows]
