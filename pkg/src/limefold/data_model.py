"""Tabular datasets: schema, CSV ingestion, binarization and MDLP discretization."""
from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

Value = Union[str, float, None]
ExampleId = Union[int, str]

MISSING = None
MISSING_TOKENS = frozenset({"", "?", "NA", "nan"})


class DataError(ValueError):
    """Malformed input data. Carries the offending row/column when known."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.row = row
        self.column = column


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # "categorical" | "numeric"
    domain: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("categorical", "numeric"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.domain:
                raise ValueError(f"categorical feature {self.name!r} needs a non-empty domain")
            if len(set(self.domain)) != len(self.domain):
                raise ValueError(f"duplicate category in domain of {self.name!r}")

    @property
    def is_numeric(self) -> bool:
        return self.kind == "numeric"


@dataclass(frozen=True)
class Schema:
    features: Tuple[FeatureSpec, ...]
    label_name: str
    positive_label: str
    id_column: Optional[str] = None
    name: str = "dataset"
    target: Optional[str] = None  # predicate name for the learned concept

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if self.label_name in names:
            raise ValueError("label column cannot also be a feature")

    def index(self, feature: str) -> int:
        for i, f in enumerate(self.features):
            if f.name == feature:
                return i
        raise KeyError(feature)

    def feature(self, name: str) -> FeatureSpec:
        return self.features[self.index(name)]

    @property
    def numeric_features(self) -> List[str]:
        return [f.name for f in self.features if f.is_numeric]

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "Schema":
        feats = tuple(
            FeatureSpec(f["name"], f["kind"], tuple(str(v) for v in f.get("domain", ())))
            for f in doc["features"]
        )
        return cls(feats, doc["label"], str(doc["positive_label"]), doc.get("id_column"),
                   doc.get("name", "dataset"), doc.get("target"))

    def to_dict(self) -> Dict[str, Any]:
        feats = []
        for f in self.features:
            d: Dict[str, Any] = {"name": f.name, "kind": f.kind}
            if f.kind == "categorical":
                d["domain"] = list(f.domain)
            feats.append(d)
        out: Dict[str, Any] = {"name": self.name, "label": self.label_name,
                               "positive_label": self.positive_label, "features": feats}
        if self.id_column:
            out["id_column"] = self.id_column
        if self.target:
            out["target"] = self.target
        return out


def load_schema(path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return Schema.from_dict(json.load(fh))


@dataclass(frozen=True)
class DataRow:
    id: ExampleId
    values: Tuple[Value, ...]
    label: int  # 1 positive, 0 negative


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    rows: Tuple[DataRow, ...]

    def __post_init__(self):
        n = len(self.schema.features)
        seen = set()
        for r in self.rows:
            if len(r.values) != n:
                raise DataError(f"row has {len(r.values)} values, schema has {n} features", row=r.id)
            if r.id in seen:
                raise DataError(f"duplicate id {r.id!r}", row=r.id)
            seen.add(r.id)

    def __len__(self):
        return len(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=int)

    @property
    def ids(self) -> List[ExampleId]:
        return [r.id for r in self.rows]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(self.schema, tuple(self.rows[i] for i in indices))

    def column(self, feature: str) -> List[Value]:
        j = self.schema.index(feature)
        return [r.values[j] for r in self.rows]


def _parse_id(raw: str) -> ExampleId:
    try:
        return int(raw)
    except ValueError:
        return raw


def load_csv(path, schema: Schema) -> Dataset:
    """Read an RFC-4180 CSV whose header names the schema columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty file: missing header row")
        header = [h.strip() for h in header]
        needed = [f.name for f in schema.features] + [schema.label_name]
        if schema.id_column:
            needed.append(schema.id_column)
        missing_cols = [c for c in needed if c not in header]
        if missing_cols:
            raise DataError(f"header lacks columns {missing_cols}")
        col = {h: i for i, h in enumerate(header)}
        rows = []
        seen = set()
        for lineno, cells in enumerate(reader, start=2):
            if not cells or all(not c.strip() for c in cells):
                continue
            if len(cells) != len(header):
                raise DataError(f"expected {len(header)} cells, got {len(cells)}", row=lineno)
            values: List[Value] = []
            for f in schema.features:
                cell = cells[col[f.name]].strip()
                if cell in MISSING_TOKENS:
                    values.append(MISSING)
                elif f.is_numeric:
                    try:
                        values.append(float(cell))
                    except ValueError:
                        raise DataError(f"cannot parse {cell!r} as a number", row=lineno, column=f.name)
                else:
                    if cell not in f.domain:
                        raise DataError(f"unknown category {cell!r}", row=lineno, column=f.name)
                    values.append(cell)
            label_cell = cells[col[schema.label_name]].strip()
            if label_cell in MISSING_TOKENS:
                raise DataError("missing label", row=lineno, column=schema.label_name)
            rid = _parse_id(cells[col[schema.id_column]].strip()) if schema.id_column else len(rows)
            if rid in seen:
                raise DataError(f"duplicate id {rid!r}", row=lineno, column=schema.id_column)
            seen.add(rid)
            rows.append(DataRow(rid, tuple(values), int(label_cell == schema.positive_label)))
    return Dataset(schema, tuple(rows))


# ---------------------------------------------------------------------------
# Binarization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BinaryColumn:
    name: str
    source: str
    category: Optional[str]  # None for numeric pass-through


def binary_columns(schema: Schema) -> List[BinaryColumn]:
    cols = []
    for f in schema.features:
        if f.is_numeric:
            cols.append(BinaryColumn(f.name, f.name, None))
        else:
            cols.extend(BinaryColumn(f"{f.name}_{v}", f.name, v) for v in f.domain)
    return cols


def encode_row(schema: Schema, values: Sequence[Value]) -> np.ndarray:
    """Numeric vector for the model: one-hot categories, raw numerics, NaN for missing numerics."""
    out = []
    for f, v in zip(schema.features, values):
        if f.is_numeric:
            out.append(np.nan if v is MISSING else float(v))
        else:
            out.extend(1.0 if v == c else 0.0 for c in f.domain)
    return np.array(out, dtype=float)


def encode(dataset: Dataset) -> np.ndarray:
    if not dataset.rows:
        return np.zeros((0, len(binary_columns(dataset.schema))))
    return np.vstack([encode_row(dataset.schema, r.values) for r in dataset.rows])


def binarize(dataset: Dataset) -> Tuple[Dataset, List[BinaryColumn]]:
    """Expand every categorical feature into one 0/1 numeric feature per category.

    Returns the expanded dataset and the column mapping used by :func:`debinarize`.
    """
    cols = binary_columns(dataset.schema)
    schema = Schema(tuple(FeatureSpec(c.name, "numeric") for c in cols),
                    dataset.schema.label_name, dataset.schema.positive_label,
                    dataset.schema.id_column, dataset.schema.name, dataset.schema.target)
    rows = []
    for r in dataset.rows:
        vec = encode_row(dataset.schema, r.values)
        vals = tuple(MISSING if np.isnan(x) else float(x) for x in vec)
        rows.append(DataRow(r.id, vals, r.label))
    return Dataset(schema, tuple(rows)), cols


def debinarize(binary: Dataset, columns: List[BinaryColumn], original: Schema) -> Dataset:
    rows = []
    for r in binary.rows:
        vals: List[Value] = []
        for f in original.features:
            idx = [i for i, c in enumerate(columns) if c.source == f.name]
            if f.is_numeric:
                vals.append(r.values[idx[0]])
            else:
                hot = [columns[i].category for i in idx if r.values[i] == 1.0]
                vals.append(hot[0] if hot else MISSING)
        rows.append(DataRow(r.id, tuple(vals), r.label))
    return Dataset(original, tuple(rows))


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

def _entropy(counts) -> float:
    n = sum(counts)
    if n == 0:
        return 0.0
    h = 0.0
    for c in counts:
        if c:
            p = c / n
            h -= p * math.log2(p)
    return h


def _mdlp_cuts(values: np.ndarray, labels: np.ndarray) -> List[float]:
    """Recursive Fayyad-Irani split on sorted (value, label) arrays."""
    n = len(values)
    if n < 2:
        return []
    # distinct-value boundaries: cut between positions i-1 and i
    boundaries = np.nonzero(np.diff(values) > 0)[0] + 1
    if len(boundaries) == 0:
        return []
    classes = np.unique(labels)
    if len(classes) < 2:
        return []
    onehot = (labels[:, None] == classes[None, :]).astype(np.int64)
    cum = np.cumsum(onehot, axis=0)
    total = cum[-1]
    ent_s = _entropy(total)

    best = None
    for b in boundaries:
        left = cum[b - 1]
        right = total - left
        e = (b * _entropy(left) + (n - b) * _entropy(right)) / n
        # ties keep the earliest (smallest) boundary
        if best is None or e < best[0] - 1e-12:
            best = (e, b, left, right)
    e, b, left, right = best
    gain = ent_s - e
    k = len(classes)
    k1 = int(np.count_nonzero(left))
    k2 = int(np.count_nonzero(right))
    delta = math.log2(3 ** k - 2) - (k * ent_s - k1 * _entropy(left) - k2 * _entropy(right))
    if gain <= (math.log2(n - 1) + delta) / n:
        return []
    cut = (values[b - 1] + values[b]) / 2.0
    return _mdlp_cuts(values[:b], labels[:b]) + [float(cut)] + _mdlp_cuts(values[b:], labels[b:])


def mdl_discretize(dataset: Dataset, feature: str) -> List[float]:
    """Cut points for a numeric feature by entropy minimization with the MDLP stopping rule.

    Rows whose value is missing are ignored. Returns an empty list when no split
    passes the criterion.
    """
    spec = dataset.schema.feature(feature)
    if not spec.is_numeric:
        raise ValueError(f"{feature!r} is not numeric")
    j = dataset.schema.index(feature)
    pairs = [(float(r.values[j]), r.label) for r in dataset.rows if r.values[j] is not MISSING]
    if not pairs:
        return []
    # stable sort on value; label order within equal values does not affect counts
    pairs.sort(key=lambda p: p[0])
    values = np.array([p[0] for p in pairs])
    labels = np.array([p[1] for p in pairs])
    return _mdlp_cuts(values, labels)


@dataclass(frozen=True)
class DiscretizationMap:
    cuts: Dict[str, Tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for f, cs in self.cuts.items():
            if any(b <= a for a, b in zip(cs, cs[1:])):
                raise ValueError(f"cut points for {f!r} must be strictly increasing")

    def n_intervals(self, feature: str) -> int:
        return len(self.cuts[feature]) + 1

    def bounds(self, feature: str, index: int) -> Tuple[float, float]:
        cs = self.cuts[feature]
        lo = cs[index - 1] if index > 0 else -math.inf
        hi = cs[index] if index < len(cs) else math.inf
        return lo, hi

    def to_json(self) -> str:
        return json.dumps({f: list(cs) for f, cs in sorted(self.cuts.items())}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DiscretizationMap":
        return cls({f: tuple(float(c) for c in cs) for f, cs in json.loads(text).items()})

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DiscretizationMap":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def interval_index(dmap: DiscretizationMap, feature: str, value: float) -> int:
    """0-based index of the left-closed interval holding ``value``."""
    return bisect.bisect_right(dmap.cuts[feature], value)


def fit_discretization(dataset: Dataset) -> DiscretizationMap:
    return DiscretizationMap({f: tuple(mdl_discretize(dataset, f)) for f in dataset.schema.numeric_features})


def format_interval(lo: float, hi: float) -> str:
    left = "(-inf" if lo == -math.inf else f"[{lo:g}"
    right = "+inf)" if hi == math.inf else f"{hi:g})"
    return f"{left},{right}"


# ---------------------------------------------------------------------------
# Bundled datasets
# ---------------------------------------------------------------------------

BUNDLED_DIR = Path(__file__).resolve().parent / "datasets"


def bundled_names() -> List[str]:
    return sorted(p.name[: -len(".schema.json")] for p in BUNDLED_DIR.glob("*.schema.json"))


def load_bundled(name: str) -> Dataset:
    """Load a dataset shipped with the package by name (e.g. ``"heart"``)."""
    if name not in bundled_names():
        raise DataError(f"unknown dataset {name!r}; bundled: {', '.join(bundled_names())}")
    return load_csv(BUNDLED_DIR / f"{name}.csv", load_schema(BUNDLED_DIR / f"{name}.schema.json"))
