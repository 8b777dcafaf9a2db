import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from limefold.data_model import (MISSING, DataRow, Dataset, DiscretizationMap, FeatureSpec, Schema,
                                 encode_row, interval_index, load_bundled, fit_discretization)
from limefold.lime_explainer import (Condition, Explanation, LimeConfig, TrainingStats, explain,
                                     interpret, interpretable_columns, kernel_pi, row_rng, sample_around,
                                     sample_batch, weighted_ridge)
from oracles import LinearInInterpretableSpace, weighted_ridge_oracle

SCHEMA = Schema((FeatureSpec("age", "numeric"), FeatureSpec("sex", "categorical", ("0", "1")),
                 FeatureSpec("cp", "categorical", ("1", "2", "4"))), "y", "1")


def make_dataset(n=60, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        age = float(rng.integers(30, 80))
        sex = str(rng.integers(0, 2))
        cp = ["1", "2", "4"][rng.integers(0, 3)]
        rows.append(DataRow(i, (age, sex, cp), int(cp == "4" or age > 60)))
    return Dataset(SCHEMA, tuple(rows))


DS = make_dataset()
DMAP = DiscretizationMap({"age": (45.0, 60.0)})
STATS = TrainingStats.from_dataset(DS, DMAP)


class ConstantModel:
    def __init__(self, p):
        self.p = p

    def predict_proba(self, X):
        return np.full(len(X), self.p)


class CpModel:
    def predict_proba(self, X):
        # column 5 is the cp=4 indicator in the one-hot encoding
        return 0.1 + 0.8 * X[:, 5]


def test_interpretable_columns_layout():
    cols = interpretable_columns(SCHEMA)
    assert [(c.feature, c.category) for c in cols] == [(0, None), (1, "0"), (1, "1"), (2, "1"), (2, "2"), (2, "4")]


def test_interpret_oracle():
    x = (50.0, "1", "4")
    assert interpret(SCHEMA, DMAP, x, x).tolist() == [1] * 6
    z = (70.0, "0", "2")
    # age changes interval; sex flips; cp moves 4 -> 2
    assert interpret(SCHEMA, DMAP, x, z).tolist() == [0, 0, 0, 1, 0, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 59), st.integers(0, 2 ** 31))
def test_sampled_rows_agree_with_interpret(row, seed):
    x = DS.rows[row]
    s = sample_around(x, STATS, np.random.default_rng(seed))
    assert s.x_prime.tolist() == interpret(SCHEMA, DMAP, x.values, s.values).tolist()


def test_numeric_perturbations_stay_in_observed_interval_ranges():
    x = DS.rows[0]
    cols, _ = sample_batch(x, STATS, np.random.default_rng(1), 2000, p_perturb=1.0)
    ages = cols[0]
    lo, hi = min(r.values[0] for r in DS.rows), max(r.values[0] for r in DS.rows)
    assert ages.min() >= lo and ages.max() <= hi
    for v in ages:
        i = interval_index(DMAP, "age", v)
        rlo, rhi = STATS.interval_range["age"][i]
        assert rlo <= v <= rhi


def test_missing_feature_is_never_perturbed():
    x = DataRow("m", (MISSING, "1", "4"), 1)
    cols, Z = sample_batch(x, STATS, np.random.default_rng(2), 500)
    assert np.isnan(cols[0]).all()
    assert (Z[:, 0] == 1).all()


def test_kernel_is_one_at_x_and_decreasing():
    x = np.ones(4)
    Z = np.array([[1, 1, 1, 1], [1, 1, 1, 0], [0, 0, 1, 0]], dtype=float)
    pi = kernel_pi(Z, x, 1.5)
    assert pi[0] == 1.0
    assert pi[1] == pytest.approx(math.exp(-1 / 2.25))
    assert pi[2] == pytest.approx(math.exp(-3 / 2.25))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1e-6, 1e-3, 0.5]))
def test_weighted_ridge_matches_augmented_least_squares(seed, lam):
    rng = np.random.default_rng(seed)
    Z = rng.integers(0, 2, size=(40, 5)).astype(float)
    y = rng.normal(size=40)
    w = rng.uniform(0.1, 1.0, size=40)
    coef, b = weighted_ridge(Z, y, w, lam)
    ref_c, ref_b = weighted_ridge_oracle(Z, y, w, lam)
    if np.linalg.cond(Z - Z.mean(0)) < 1e6:
        assert np.allclose(coef, ref_c, atol=1e-7)
        assert b == pytest.approx(ref_b, abs=1e-7)


def test_explanation_recovers_a_linear_target():
    rng = np.random.default_rng(9)
    names = [f"v{j}" for j in range(5)]
    schema = Schema(tuple(FeatureSpec(n, "numeric") for n in names), "y", "1")
    rows = tuple(DataRow(i, tuple(rng.normal(size=5)), int(i % 2)) for i in range(200))
    ds = Dataset(schema, rows)
    dmap = DiscretizationMap({n: (0.0,) for n in names})
    x = rows[0]
    true = [0.30, -0.05, 0.20, -0.25, 0.10]
    model = LinearInInterpretableSpace(dmap, names, x.values, true)
    expl = explain(model, x, TrainingStats.from_dataset(ds, dmap), LimeConfig(n_samples=2000, k=3))
    got = {c.feature: w for c, w in expl.pairs}
    assert list(got) == ["v0", "v3", "v2"]
    for j, n in enumerate(names):
        if n in got:
            assert got[n] == pytest.approx(true[j], rel=1e-3)


def test_explain_shape_and_labels():
    x = DS.rows[3]
    e = explain(CpModel(), x, STATS, LimeConfig(n_samples=800, k=3))
    assert len(e.pairs) == 3
    top, w = e.pairs[0]
    assert top.feature == "cp" and top.value == "4"
    assert (w > 0) == (x.values[2] == "4")
    assert e.label == ("+" if x.values[2] == "4" else "-")


def test_binary_feature_yields_one_condition():
    for x in DS.rows[:10]:
        e = explain(CpModel(), x, STATS, LimeConfig(n_samples=300, k=6))
        sex = [c for c, _ in e.pairs if c.feature == "sex"]
        assert len(sex) <= 1
        assert all(c.value == x.values[1] and c.equals == 1 for c in sex)


def test_constant_model_explanation_has_zero_weights():
    e = explain(ConstantModel(0.7), DS.rows[0], STATS, LimeConfig(n_samples=300, k=2))
    assert e.label == "+"
    assert all(abs(w) < 1e-9 for _, w in e.pairs)


def test_explain_is_deterministic_per_seed():
    cfg = LimeConfig(n_samples=400, k=4, seed=5)
    a = explain(CpModel(), DS.rows[7], STATS, cfg)
    b = explain(CpModel(), DS.rows[7], STATS, cfg)
    assert a.to_json() == b.to_json()
    c = explain(CpModel(), DS.rows[7], STATS, LimeConfig(n_samples=400, k=4, seed=6))
    assert c.to_json() != a.to_json()


def test_first_sample_is_x_itself():
    x = DS.rows[11]
    _, (X, Z, fx, pi), _ = explain(CpModel(), x, STATS, LimeConfig(n_samples=50, k=2), return_samples=True)
    assert np.array_equal(X[0], encode_row(SCHEMA, x.values))
    assert Z[0].tolist() == [1.0] * Z.shape[1]
    assert pi[0] == 1.0


def test_explanation_json_round_trip():
    e = Explanation(4, "+", [(Condition("cp", "category", "4", 1), 0.5),
                             (Condition("thal", "category", "3", 0), -0.25),
                             (Condition("age", "interval", "1", 1, 45.0, 60.0), 0.125),
                             (Condition("bp", "interval", "0", 1, -math.inf, 120.0), 0.0625)])
    back = Explanation.from_json(e.to_json())
    assert back.pairs == e.pairs and back.sample_id == 4 and back.label == "+"
    assert str(e.pairs[1][0]) == "thal_3=0"
    assert str(e.pairs[3][0]) == "bp in (-inf,120)"


def test_config_validation_and_rng_streams():
    with pytest.raises(ValueError):
        LimeConfig(n_samples=3, k=5)
    a = row_rng(1, "r1").random(3)
    assert np.array_equal(a, row_rng(1, "r1").random(3))
    assert not np.array_equal(a, row_rng(1, "r2").random(3))


def test_heart_explanations_use_known_features():
    ds = load_bundled("heart").subset(range(40))
    dm = fit_discretization(ds)
    stats = TrainingStats.from_dataset(ds, dm)
    names = {f.name for f in ds.schema.features}
    e = explain(ConstantModel(0.2), ds.rows[0], stats, LimeConfig(n_samples=100))
    assert {c.feature for c, _ in e.pairs} <= names
