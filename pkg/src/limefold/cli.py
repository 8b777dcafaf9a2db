"""Command-line interface: ``limefold <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional


from . import gbt
from .data_model import (DataError, Dataset, DiscretizationMap, bundled_names, fit_discretization,
                         load_bundled, load_csv, load_schema)
from .evaluation import (VARIANTS, count_facts, count_rules, cross_validate, markdown_summary,
                         program_json, report_csv, report_table, timing_csv)
from .fold_engine import FoldParams, fold, foil, prune_hypothesis
from .ilp_transform import ParseError, load_program, render_program, transform, write_provenance
from .lime_explainer import Explanation, LimeConfig, TrainingStats, explain_all
from .pipeline import PipelineConfig, derive_seed, run_lime_fold, target_name, train_model

log = logging.getLogger("limefold")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- shared flag groups -------------------------------------------------------

def _add_dataset(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", help="bundled dataset name")
    g.add_argument("--data", type=Path, help="CSV file")
    g.add_argument("--schema", type=Path, help="schema JSON for --data")


def _add_gbt(p):
    d = gbt.GbtParams()
    g = p.add_argument_group("boosting")
    g.add_argument("--rounds", type=int, default=d.rounds)
    g.add_argument("--max-depth", type=int, default=d.max_depth)
    g.add_argument("--learning-rate", type=float, default=d.learning_rate)
    g.add_argument("--min-child-weight", type=float, default=d.min_child_weight)
    g.add_argument("--reg-lambda", type=float, default=d.reg_lambda)


def _add_lime(p):
    d = LimeConfig()
    g = p.add_argument_group("explanations")
    g.add_argument("--samples", type=int, default=d.n_samples, help="perturbations per row")
    g.add_argument("--k", type=int, default=d.k, help="explanation length")
    g.add_argument("--kernel-width", type=float, default=d.kernel_width)


def _add_fold(p):
    d = FoldParams()
    g = p.add_argument_group("induction")
    g.add_argument("--max-rule-length", type=int, default=d.max_rule_length)
    g.add_argument("--max-exception-depth", type=int, default=d.max_exception_depth)
    g.add_argument("--literal-cost", type=float, default=d.literal_cost)
    g.add_argument("--constant-cost", type=float, default=d.constant_cost)
    g.add_argument("--fact-cost", type=float, default=d.fact_cost)
    g.add_argument("--noise-tolerance", type=int, default=d.noise_tolerance)


def _gbt_params(a, seed=0) -> gbt.GbtParams:
    return gbt.GbtParams(a.rounds, a.max_depth, a.learning_rate, a.min_child_weight, a.reg_lambda, seed)


def _lime_config(a, seed=0) -> LimeConfig:
    return LimeConfig(n_samples=a.samples, k=a.k, kernel_width=a.kernel_width, seed=seed)


def _fold_params(a) -> FoldParams:
    return FoldParams(a.max_rule_length, a.max_exception_depth, a.literal_cost, a.constant_cost,
                      a.fact_cost, a.noise_tolerance)


def _pipeline(a) -> PipelineConfig:
    return PipelineConfig(_gbt_params(a), _lime_config(a), _fold_params(a), a.seed)


def _load_dataset(a) -> Dataset:
    if a.dataset:
        return load_bundled(a.dataset)
    if a.data is None or a.schema is None:
        raise UsageError("give --dataset NAME or both --data and --schema")
    return load_csv(a.data, load_schema(a.schema))


def _dmap(a, dataset) -> DiscretizationMap:
    path = getattr(a, "dmap", None)
    return DiscretizationMap.load(path) if path else fit_discretization(dataset)


def _write(path: Optional[Path], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


# -- subcommands ---------------------------------------------------------------

def cmd_discretize(a) -> int:
    ds = _load_dataset(a)
    _write(a.out, fit_discretization(ds).to_json() + "\n")
    return EXIT_OK


def cmd_train(a) -> int:
    ds = _load_dataset(a)
    model = train_model(ds, _gbt_params(a, derive_seed(a.seed, "all", "gbt")))
    _write(a.out, model.to_json() + "\n")
    if a.importance:
        _write(a.importance, _importance_csv(model))
    return EXIT_OK


def _importance_csv(model: gbt.GbtModel) -> str:
    imp = gbt.feature_importance(model)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "gain", "splits"])
    for name in imp.ranked():
        w.writerow([name, f"{imp.gain[name]:.6f}", imp.splits[name]])
    return buf.getvalue()


def _load_model(path: Path) -> gbt.GbtModel:
    try:
        return gbt.GbtModel.from_json(path.read_text(encoding="utf-8"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not a model file ({exc})")


def cmd_explain(a) -> int:
    ds = _load_dataset(a)
    model = _load_model(a.model)
    stats = TrainingStats.from_dataset(ds, _dmap(a, ds))
    expl = explain_all(model, ds, stats, _lime_config(a, derive_seed(a.seed, "all", "lime")))
    _write(a.out, "".join(e.to_json() + "\n" for e in expl))
    return EXIT_OK


def cmd_transform(a) -> int:
    ds = _load_dataset(a)
    model = _load_model(a.model)
    lines = a.explanations.read_text(encoding="utf-8").splitlines()
    try:
        expl = [Explanation.from_json(l) for l in lines if l.strip()]
    except (KeyError, ValueError) as exc:
        raise DataError(f"{a.explanations}: bad explanation record ({exc})")
    instance, prov = transform(ds, model, expl, a.target or target_name(ds))
    _write(a.out, render_program(instance))
    if a.provenance:
        write_provenance(prov, a.provenance)
    return EXIT_OK


def cmd_induce(a) -> int:
    instance = load_program(a.program)
    params = _fold_params(a)
    if a.algorithm == "foil":
        h = foil(instance, params)
    else:
        h = fold(instance, params)
        if not a.no_prune:
            h = prune_hypothesis(h, instance, params.noise_tolerance)
    if a.json:
        _write(a.out, program_json(h, instance, a.var))
    else:
        _write(a.out, h.render(a.var))
    return EXIT_OK


def _variants(text: str) -> List[str]:
    out = [v.strip() for v in text.split(",") if v.strip()]
    bad = [v for v in out if v not in VARIANTS]
    if bad or not out:
        raise UsageError(f"unknown variant(s) {bad}; choose from {', '.join(VARIANTS)}")
    return out


def _evaluate(ds: Dataset, a):
    config = _pipeline(a)
    reports = [cross_validate(ds, v, a.folds, a.seed, config, a.jobs) for v in _variants(a.variants)]
    return reports, config


def _write_reports(out: Path, reports, var: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report_csv(reports), encoding="utf-8")
    (out / "report.txt").write_text(report_table(reports), encoding="utf-8")
    (out / "report.md").write_text(markdown_summary(reports), encoding="utf-8")
    (out / "timing.csv").write_text(timing_csv(reports), encoding="utf-8")
    # rules per variant, for plotting elsewhere
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "variant", "mean_rules", "mean_facts"])
    for r in reports:
        a = r.average
        w.writerow([r.dataset, r.variant, f"{a.clause_count:.2f}", f"{a.fact_count:.2f}"])
    (out / "rules.csv").write_text(buf.getvalue(), encoding="utf-8")
    progs = out / "programs"
    progs.mkdir(exist_ok=True)
    for r in reports:
        for i, h in enumerate(r.programs):
            (progs / f"{r.variant}_fold{i}.pl").write_text(h.render(var), encoding="utf-8")


def cmd_evaluate(a) -> int:
    ds = _load_dataset(a)
    reports, _ = _evaluate(ds, a)
    sys.stdout.write(report_table(reports))
    if a.out:
        _write_reports(a.out, reports, a.var)
    return EXIT_OK


def cmd_reproduce(a) -> int:
    if a.name not in bundled_names():
        sys.stderr.write(f"unknown dataset {a.name!r}; bundled datasets: {', '.join(bundled_names())}\n")
        return EXIT_DATA
    ds = load_bundled(a.name)
    start = time.perf_counter()
    reports, config = _evaluate(ds, a)
    _write_reports(a.out, reports, a.var)
    whole = run_lime_fold(ds, config, stream="all")
    (a.out / "program.pl").write_text(whole.hypothesis.render(a.var), encoding="utf-8")
    (a.out / "program.json").write_text(program_json(whole.hypothesis, whole.instance, a.var), encoding="utf-8")
    (a.out / "discretization.json").write_text(whole.dmap.to_json() + "\n", encoding="utf-8")
    (a.out / "feature_importance.csv").write_text(_importance_csv(whole.model), encoding="utf-8")
    sys.stdout.write(report_table(reports))
    sys.stdout.write(f"whole-dataset program: {count_rules(whole.hypothesis)} rules, "
                     f"{count_facts(whole.hypothesis)} facts ({time.perf_counter() - start:.1f}s total)\n")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="limefold", description="Learn default theories from a boosted model's explanations.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("discretize", help="fit MDLP cut points for numeric features")
    _add_dataset(s)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_discretize)

    s = sub.add_parser("train", help="train the boosted-tree model")
    _add_dataset(s)
    _add_gbt(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path)
    s.add_argument("--importance", type=Path, help="also write per-feature gain as CSV")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("explain", help="explain every row with local linear surrogates")
    _add_dataset(s)
    _add_lime(s)
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--dmap", type=Path, help="cut points JSON (default: fit on the data)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_explain)

    s = sub.add_parser("transform", help="turn explanations into an ILP program")
    _add_dataset(s)
    s.add_argument("--model", type=Path, required=True)
    s.add_argument("--explanations", type=Path, required=True)
    s.add_argument("--target", help="target predicate name")
    s.add_argument("--provenance", type=Path, help="write fact provenance JSON here")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_transform)

    s = sub.add_parser("induce", help="induce a hypothesis from a B:/E+:/E-: program")
    s.add_argument("program", type=Path)
    s.add_argument("--algorithm", choices=("fold", "foil"), default="fold")
    s.add_argument("--no-prune", action="store_true")
    s.add_argument("--json", action="store_true", help="JSON with per-clause coverage")
    s.add_argument("--var", default="X", help="variable name in printed clauses")
    s.add_argument("--out", type=Path)
    _add_fold(s)
    s.set_defaults(func=cmd_induce)

    for name, func in (("evaluate", cmd_evaluate), ("reproduce", cmd_reproduce)):
        s = sub.add_parser(name, help="stratified cross-validation" if name == "evaluate"
                           else "full protocol on a bundled dataset")
        if name == "evaluate":
            _add_dataset(s)
            s.add_argument("--out", type=Path)
        else:
            s.add_argument("name", help=f"one of: {', '.join(bundled_names())}")
            s.add_argument("--out", type=Path, default=Path("out"))
        s.add_argument("--seed", type=int, required=True)
        s.add_argument("--folds", type=int, default=5)
        s.add_argument("--variants", default=",".join(VARIANTS))
        s.add_argument("--jobs", type=int, default=1)
        s.add_argument("--var", default="X")
        _add_gbt(s)
        _add_lime(s)
        _add_fold(s)
        s.set_defaults(func=func)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        logging.basicConfig(level=logging.DEBUG if a.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return a.func(a)
    except UsageError as exc:
        sys.stderr.write(f"limefold: error: {exc}\n")
        return EXIT_USAGE
    except ParseError as exc:
        sys.stderr.write(f"limefold: {exc}\n")
        return EXIT_DATA
    except (DataError, ValueError, OSError) as exc:
        sys.stderr.write(f"limefold: {exc}\n")
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
