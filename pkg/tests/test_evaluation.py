import csv
import io
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from limefold.data_model import load_bundled
from limefold.evaluation import (Metrics, CvReport, count_facts, count_rules, cross_validate,
                                 markdown_summary, metrics_from_confusion, program_json, report_csv,
                                 score, stratified_folds, timing_csv)
from limefold.fold_engine import NAF, NEG, Clause, GroundFact, Hypothesis, Literal
from limefold.ilp_transform import Atom, IlpInstance


def confusion_oracle(pred, truth, universe):
    # plain counting, no set algebra shared with the library
    tp = fp = fn = tn = 0
    for e in universe:
        p, t = e in pred, e in truth
        tp += p and t
        fp += p and not t
        fn += t and not p
        tn += not p and not t
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return prec, rec, (tp + tn) / len(universe), f1


def test_confusion_fixture():
    m = metrics_from_confusion(tp=4, fp=1, fn=2, tn=3)
    assert m.precision == pytest.approx(0.8)
    assert m.recall == pytest.approx(0.6667, abs=1e-4)
    assert m.accuracy == pytest.approx(0.7)
    assert m.f1 == pytest.approx(0.7273, abs=1e-4)


def instance(labels):
    """One example per label; example e carries the fact f(e)."""
    bk = frozenset(Atom("f", (e,)) for e in range(len(labels)))
    pos = frozenset(e for e, y in enumerate(labels) if y)
    return IlpInstance("t", bk, pos, frozenset(range(len(labels))) - pos)


def test_perfect_and_empty_hypotheses():
    inst = instance([1, 1, 0, 0])
    exact = Hypothesis("t", facts=[GroundFact("t", 0), GroundFact("t", 1)])
    m = score(exact, inst)
    assert (m.precision, m.recall, m.accuracy, m.f1) == (1.0, 1.0, 1.0, 1.0)
    m = score(Hypothesis("t"), inst)
    assert m.recall == 0.0 and m.f1 == 0.0 and m.accuracy == 0.5


@settings(max_examples=60)
@given(st.lists(st.booleans(), min_size=1, max_size=15), st.lists(st.booleans(), min_size=15, max_size=15))
def test_score_matches_confusion_oracle(labels, predicted):
    inst = instance(labels)
    chosen = {e for e in range(len(labels)) if predicted[e]}
    h = Hypothesis("t", facts=[GroundFact("t", e) for e in sorted(chosen)])
    m = score(h, inst)
    expected = confusion_oracle(chosen, set(inst.e_plus), range(len(labels)))
    assert (m.precision, m.recall, m.accuracy, m.f1) == pytest.approx(expected, abs=1e-12)


def lit(p, c=None, pol="pos"):
    return Literal(p, c, pol)


def test_rule_count_of_the_reference_heart_program():
    hd = "heart_disease"
    h = Hypothesis(hd, defaults=[
        Clause(hd, (lit("chest_pain", 4), lit("thal", 3, NEG))),
        Clause(hd, (lit("slope", 2), lit("major_vessels", 1))),
        Clause(hd, (lit("chest_pain", 4), lit("sex", 1), lit("ab0", pol=NAF))),
        Clause(hd, (lit("blood_pressure", 5), lit("sex", 1))),
        Clause(hd, (lit("slope", 2), lit("blood_pressure", 5))),
        Clause(hd, (lit("slope", 2), lit("major_vessels", 3), lit("serum_cholestoral", 3))),
    ], abnormals=[Clause("ab0", (lit("major_vessels", 3),))])
    assert count_rules(h) == 7
    assert count_rules(Hypothesis("t")) == 0
    facts_only = Hypothesis("t", facts=[GroundFact("t", i) for i in range(4)])
    assert (count_rules(facts_only), count_facts(facts_only)) == (0, 4)


@settings(max_examples=40)
@given(st.lists(st.integers(0, 2), min_size=10, max_size=80), st.integers(2, 5), st.integers(0, 999))
def test_folds_partition_rows_and_stratify(labels, k, seed):
    folds = stratified_folds(labels, k, seed)
    flat = sorted(int(i) for f in folds for i in f)
    assert flat == list(range(len(labels)))
    labels = np.array(labels)
    for cls in np.unique(labels):
        counts = [int((labels[f] == cls).sum()) for f in folds]
        assert max(counts) - min(counts) <= 1


def test_folds_reject_bad_k():
    with pytest.raises(ValueError):
        stratified_folds([0, 1, 0], 4)
    with pytest.raises(ValueError):
        stratified_folds([0, 1, 0], 1)


def test_every_fold_has_both_classes_on_balanced_input():
    labels = [0, 1] * 25
    for f in stratified_folds(labels, 5, 3):
        assert set(np.array(labels)[f]) == {0, 1}


@pytest.fixture(scope="module")
def small_voting():
    ds = load_bundled("voting")
    rng = random.Random(5)
    return ds.subset(sorted(rng.sample(range(len(ds)), 120)))


def test_cross_validation_is_deterministic(small_voting):
    a = cross_validate(small_voting, "fold", 5, seed=11)
    b = cross_validate(small_voting, "fold", 5, seed=11)
    assert report_csv([a]) == report_csv([b])
    assert [h.render() for h in a.programs] == [h.render() for h in b.programs]
    assert a.average.f1 > 0.8


def test_average_is_the_plain_mean(small_voting):
    r = cross_validate(small_voting, "foil", 3, seed=2)
    for name in ("precision", "recall", "accuracy", "f1", "clause_count", "fact_count"):
        vals = [getattr(m, name) for m in r.folds]
        assert getattr(r.average, name) == sum(vals) / len(vals)


def test_unknown_variant():
    with pytest.raises(ValueError, match="lime-fold"):
        cross_validate(load_bundled("voting"), "aleph")


def report():
    folds = [Metrics(1.0, 0.5, 0.75, 2 / 3, 3, 1, 0.25), Metrics(0.5, 0.5, 0.5, 0.5, 4, 0, 0.75)]
    return CvReport("heart", "lime-fold", folds)


def test_report_csv_has_fold_rows_and_mean_without_timing():
    rows = list(csv.reader(io.StringIO(report_csv([report()]))))
    assert rows[0] == ["dataset", "variant", "fold", "precision", "recall", "accuracy", "f1", "rules", "facts"]
    assert rows[1] == ["heart", "lime-fold", "0", "1.0000", "0.5000", "0.7500", "0.6667", "3", "1"]
    assert rows[3] == ["heart", "lime-fold", "mean", "0.7500", "0.5000", "0.6250", "0.5833", "3.50", "0.50"]
    timing = list(csv.reader(io.StringIO(timing_csv([report()]))))
    assert timing[-1] == ["heart", "lime-fold", "mean", "0.500"]


def test_markdown_lists_reference_f1_for_lime_fold_only():
    md = markdown_summary([report(), CvReport("heart", "foil", report().folds)])
    lines = md.splitlines()
    assert lines[2].endswith("| 0.78 |") and lines[3].endswith("| n/a |")


def test_program_json_counts_clause_coverage():
    import json
    inst = instance([1, 1, 0])
    h = Hypothesis("t", defaults=[Clause("t", (lit("f"),))])
    doc = json.loads(program_json(h, inst))
    assert doc["defaults"] == [{"clause": "t(X) :- f(X).", "e_plus": 2, "e_minus": 1}]
    assert doc["rules"] == 1 and doc["fact_count"] == 0
