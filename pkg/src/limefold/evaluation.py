"""Metrics, stratified k-fold cross-validation, and report rendering."""
from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import List, Optional, Sequence

import numpy as np

from .data_model import Dataset, fit_discretization
from .fold_engine import Evaluator, FoldParams, Hypothesis, covers, fold, foil, prune_hypothesis
from .ilp_transform import full_encoding
from .pipeline import PipelineConfig, derive_seed, lime_fold, target_name, train_model
from . import gbt
from .lime_explainer import LimeConfig

VARIANTS = ("lime-fold", "fold", "foil")

# reference LIME-FOLD scores used for the Markdown comparison (precision, recall, accuracy, f1)
REFERENCE = {
    "breast-w": (0.94, 0.92, 0.95, 0.92),
    "voting": (0.98, 0.96, 0.97, 0.97),
    "heart": (0.82, 0.74, 0.82, 0.78),
}


@dataclass
class Metrics:
    precision: float = 0.0
    recall: float = 0.0
    accuracy: float = 0.0
    f1: float = 0.0
    clause_count: int = 0
    fact_count: int = 0
    wall_time_seconds: float = 0.0


def metrics_from_confusion(tp: int, fp: int, fn: int, tn: int) -> Metrics:
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    accuracy = (tp + tn) / total if total else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Metrics(precision, recall, accuracy, f1)


def score(hypothesis: Hypothesis, test_instance) -> Metrics:
    """Classify every example of ``test_instance`` by coverage; its E+ is the truth."""
    examples = test_instance.examples
    predicted = covers(hypothesis, examples, test_instance.index()).covered
    truth = set(test_instance.e_plus)
    tp = len(predicted & truth)
    fp = len(predicted - truth)
    fn = len(truth - predicted)
    tn = len(examples) - tp - fp - fn
    m = metrics_from_confusion(tp, fp, fn, tn)
    m.clause_count = count_rules(hypothesis)
    m.fact_count = count_facts(hypothesis)
    return m


def count_rules(h: Hypothesis) -> int:
    return len(h.defaults) + len(h.abnormals)


def count_facts(h: Hypothesis) -> int:
    return len(h.facts)


def stratified_folds(labels: Sequence[int], k: int = 5, seed: int = 0) -> List[np.ndarray]:
    """Split row positions into ``k`` test folds, dealing each class round-robin."""
    labels = np.asarray(labels)
    if k < 2 or k > len(labels):
        raise ValueError(f"cannot make {k} folds from {len(labels)} rows")
    rng = np.random.default_rng(seed)
    buckets: List[List[int]] = [[] for _ in range(k)]
    offset = 0
    for cls in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == cls))
        for j, i in enumerate(idx):
            buckets[(j + offset) % k].append(int(i))
        offset += len(idx)
    return [np.array(sorted(b), dtype=int) for b in buckets]


@dataclass
class FoldResult:
    metrics: Metrics
    hypothesis: Hypothesis


@dataclass
class CvReport:
    dataset: str
    variant: str
    folds: List[Metrics]
    programs: List[Hypothesis] = field(default_factory=list)

    @property
    def average(self) -> Metrics:
        n = len(self.folds)
        out = {}
        for f in fields(Metrics):
            vals = [getattr(m, f.name) for m in self.folds]
            out[f.name] = sum(vals) / n if n else 0.0
        return Metrics(**out)


def induce_variant(train: Dataset, variant: str, config: PipelineConfig, stream: str) -> Hypothesis:
    """Induce a hypothesis on ``train`` with one of :data:`VARIANTS`."""
    dmap = fit_discretization(train)
    target = target_name(train)
    if variant == "lime-fold":
        gp = gbt.GbtParams(**{**config.gbt.__dict__, "seed": derive_seed(config.seed, stream, "gbt")})
        model = train_model(train, gp)
        lc = LimeConfig(**{**config.lime.__dict__, "seed": derive_seed(config.seed, stream, "lime")})
        return lime_fold(train, model, lc, config.fold, dmap, target).hypothesis
    instance = full_encoding(train, dmap, target)
    if variant == "fold":
        return prune_hypothesis(fold(instance, config.fold), instance, config.fold.noise_tolerance)
    if variant == "foil":
        return foil(instance, config.fold)
    raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")


def run_fold(dataset: Dataset, train_idx, test_idx, variant: str, config: PipelineConfig,
             fold_no: int) -> FoldResult:
    start = time.perf_counter()
    train, test = dataset.subset(train_idx), dataset.subset(test_idx)
    h = induce_variant(train, variant, config, f"fold{fold_no}")
    # test rows are encoded with the train split's cut points
    test_instance = full_encoding(test, fit_discretization(train), target_name(dataset))
    m = score(h, test_instance)
    m.wall_time_seconds = time.perf_counter() - start
    return FoldResult(m, h)


def _run_fold_args(args):
    return run_fold(*args)


def cross_validate(dataset: Dataset, variant: str = "lime-fold", folds: int = 5, seed: int = 0,
                   config: Optional[PipelineConfig] = None, jobs: int = 1) -> CvReport:
    """Stratified ``folds``-fold CV of one pipeline variant; deterministic given ``seed``."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    config = config or PipelineConfig(seed=seed)
    parts = stratified_folds(dataset.labels, folds, derive_seed(seed, "cv"))
    n = len(dataset)
    tasks = []
    for i, test_idx in enumerate(parts):
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        tasks.append((dataset, train_idx, test_idx, variant, config, i))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_fold_args, tasks))
    else:
        results = [_run_fold_args(t) for t in tasks]
    return CvReport(dataset.schema.name, variant, [r.metrics for r in results],
                    [r.hypothesis for r in results])


# ---------------------------------------------------------------------------
# Rendering. Timing lives in its own file so the other reports stay reproducible.
# ---------------------------------------------------------------------------

_CSV_HEADER = ["dataset", "variant", "fold", "precision", "recall", "accuracy", "f1", "rules", "facts"]


def _row(report: CvReport, fold, m: Metrics) -> list:
    return [report.dataset, report.variant, fold, f"{m.precision:.4f}", f"{m.recall:.4f}",
            f"{m.accuracy:.4f}", f"{m.f1:.4f}", _num(m.clause_count), _num(m.fact_count)]


def _num(v) -> str:
    return str(int(v)) if float(v).is_integer() else f"{v:.2f}"


def report_csv(reports: Sequence[CvReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_CSV_HEADER)
    for r in reports:
        for i, m in enumerate(r.folds):
            w.writerow(_row(r, i, m))
        w.writerow(_row(r, "mean", r.average))
    return buf.getvalue()


def timing_csv(reports: Sequence[CvReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "variant", "fold", "seconds"])
    for r in reports:
        for i, m in enumerate(r.folds):
            w.writerow([r.dataset, r.variant, i, f"{m.wall_time_seconds:.3f}"])
        w.writerow([r.dataset, r.variant, "mean", f"{r.average.wall_time_seconds:.3f}"])
    return buf.getvalue()


def report_table(reports: Sequence[CvReport]) -> str:
    head = f"{'dataset':<10} {'variant':<10} {'prec':>6} {'recall':>6} {'acc':>6} {'f1':>6} {'rules':>6} {'facts':>6}"
    lines = [head, "-" * len(head)]
    for r in reports:
        a = r.average
        lines.append(f"{r.dataset:<10} {r.variant:<10} {a.precision:6.3f} {a.recall:6.3f} "
                     f"{a.accuracy:6.3f} {a.f1:6.3f} {a.clause_count:6.1f} {a.fact_count:6.1f}")
    return "\n".join(lines) + "\n"


def markdown_summary(reports: Sequence[CvReport]) -> str:
    lines = ["| dataset | variant | precision | recall | accuracy | F1 | rules | reference F1 |",
             "|---|---|---|---|---|---|---|---|"]
    for r in reports:
        a = r.average
        ref = REFERENCE.get(r.dataset)
        ref_f1 = f"{ref[3]:.2f}" if ref and r.variant == "lime-fold" else "n/a"
        lines.append(f"| {r.dataset} | {r.variant} | {a.precision:.3f} | {a.recall:.3f} | "
                     f"{a.accuracy:.3f} | {a.f1:.3f} | {a.clause_count:.1f} | {ref_f1} |")
    return "\n".join(lines) + "\n"


def program_json(h: Hypothesis, instance=None, var: str = "X") -> str:
    """JSON form of a hypothesis, with per-clause coverage when ``instance`` is given."""
    ev = None
    if instance is not None:
        ev = Evaluator(h, instance.index())
        pos, neg = set(instance.e_plus), set(instance.e_minus)

    def clause(c):
        d = {"clause": c.render(var)}
        if ev is not None:
            d["e_plus"] = len(ev.clause_cover(c, pos))
            d["e_minus"] = len(ev.clause_cover(c, neg))
        return d

    doc = {"target": h.target,
           "defaults": [clause(c) for c in h.defaults],
           "abnormals": [clause(c) for c in h.abnormals],
           "facts": [f.render() for f in h.facts],
           "rules": count_rules(h), "fact_count": count_facts(h)}
    return json.dumps(doc, indent=1) + "\n"
