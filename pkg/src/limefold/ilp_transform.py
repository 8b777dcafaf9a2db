"""Turn a dataset plus per-row explanations into an ILP problem instance.

Also reads and writes the textual program format::

    B:
    bird(X) :- penguin(X).
    bird(tweety).
    -thal(135,7).
    E+:
    fly(tweety).
    E-:
    fly(kitty).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .data_model import MISSING, Dataset, DiscretizationMap, encode, interval_index
from .fold_engine.logic import (NAF, NEG, POS, Clause, Const, FactIndex, Literal, const_key,
                                format_const, norm_const)
from .lime_explainer import Explanation


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: Tuple[Const, ...]
    negated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(norm_const(a) for a in self.args))

    def render(self) -> str:
        return ("-" if self.negated else "") + f"{self.predicate}(" + ",".join(
            format_const(a) for a in self.args) + ")."

    def sort_key(self):
        return (self.predicate, tuple(const_key(a) for a in self.args), self.negated)

    def complement(self) -> "Atom":
        return Atom(self.predicate, self.args, not self.negated)


@dataclass
class IlpInstance:
    target: str
    bk: FrozenSet[Atom]
    e_plus: FrozenSet[Const]
    e_minus: FrozenSet[Const]
    rules: Tuple[Clause, ...] = ()
    # signed explanation weight behind each BK fact, when it came from one
    weights: Dict[Atom, float] = field(default_factory=dict)

    def __post_init__(self):
        self.bk = frozenset(self.bk)
        self.e_plus = frozenset(norm_const(e) for e in self.e_plus)
        self.e_minus = frozenset(norm_const(e) for e in self.e_minus)
        if self.e_plus & self.e_minus:
            raise ValueError(f"examples in both E+ and E-: {sorted(self.e_plus & self.e_minus, key=const_key)}")
        ids = self.e_plus | self.e_minus
        for a in self.bk:
            if a.args[0] not in ids:
                raise ValueError(f"{a.render()} is about {a.args[0]!r}, which is not an example")
            if a.complement() in self.bk:
                raise ValueError(f"{a.render()} and its classical negation are both in BK")

    @property
    def examples(self) -> FrozenSet[Const]:
        return self.e_plus | self.e_minus

    def saturated(self) -> FrozenSet[Atom]:
        """BK facts closed under the BK rules (single-variable definite rules)."""
        facts = set(self.bk)
        if not self.rules:
            return frozenset(facts)
        domain = set(self.examples) | {a.args[0] for a in facts}
        changed = True
        while changed:
            changed = False
            index = FactIndex(facts)
            for r in self.rules:
                hold = set(domain)
                for lit in r.body:
                    hold &= index.extension(lit.key)
                for e in hold:
                    a = Atom(r.head, (e,))
                    if a not in facts:
                        facts.add(a)
                        changed = True
        return frozenset(facts)

    def index(self) -> FactIndex:
        return FactIndex(self.saturated())

    def exception_only(self) -> FrozenSet[Tuple[Const, Tuple]]:
        """(example, fact key) pairs that came from negatively weighted explanation pairs."""
        out = set()
        for a, w in self.weights.items():
            if w < 0:
                c = a.args[1] if len(a.args) > 1 else None
                out.add((a.args[0], (a.predicate, a.negated, c)))
        return frozenset(out)

    def __eq__(self, other):
        if not isinstance(other, IlpInstance):
            return NotImplemented
        return (self.target == other.target and self.bk == other.bk and self.e_plus == other.e_plus
                and self.e_minus == other.e_minus and set(self.rules) == set(other.rules))


def predicate_name(feature: str) -> str:
    name = re.sub(r"[^A-Za-z0-9_]", "_", feature).lower()
    if not re.match(r"^[a-z]", name):
        name = "f_" + name
    return name


@dataclass
class Provenance:
    fact: Atom
    row_id: Const
    condition: str
    weight: float

    def to_dict(self):
        return {"fact": self.fact.render(), "row_id": self.row_id, "condition": self.condition,
                "weight": self.weight}


def transform(dataset: Dataset, model, explanations: Sequence[Explanation], target: str,
              matrix: Optional[np.ndarray] = None) -> Tuple[IlpInstance, List[Provenance]]:
    """Label rows by the model's prediction and keep only explained conditions as BK."""
    by_id = {norm_const(e.sample_id): e for e in explanations}
    names = {f.name for f in dataset.schema.features}
    X = encode(dataset) if matrix is None else matrix
    proba = model.predict_proba(X) if len(dataset) else np.zeros(0)
    e_plus, e_minus = set(), set()
    bk = {}
    prov = []
    for row, p in zip(dataset.rows, proba):
        rid = norm_const(row.id)
        (e_plus if p >= 0.5 else e_minus).add(rid)
        expl = by_id.get(rid)
        if expl is None:
            raise ValueError(f"no explanation for row {row.id!r}")
        for cond, w in expl.pairs:
            if cond.feature not in names:
                raise ValueError(f"explanation for row {row.id!r} references unknown feature {cond.feature!r}")
            pred = predicate_name(cond.feature)
            if cond.kind == "interval":
                atom = Atom(pred, (rid, cond.interval))
            elif cond.equals == 0:
                atom = Atom(pred, (rid, cond.value), negated=True)
            else:
                atom = Atom(pred, (rid, cond.value))
            bk[atom] = w
            prov.append(Provenance(atom, rid, str(cond), w))
    inst = IlpInstance(target, frozenset(bk), frozenset(e_plus), frozenset(e_minus), weights=bk)
    return inst, prov


def full_encoding(dataset: Dataset, dmap: DiscretizationMap, target: str,
                  labels: Optional[Sequence[int]] = None) -> IlpInstance:
    """Every row's complete feature encoding as BK.

    A categorical value v yields f(id,v) plus -f(id,u) for the other categories;
    a numeric value yields f(id,interval). Missing values yield nothing.
    Examples are labeled by ``labels`` (default: the dataset's labels).
    """
    labels = dataset.labels if labels is None else labels
    bk = set()
    e_plus, e_minus = set(), set()
    for row, y in zip(dataset.rows, labels):
        rid = norm_const(row.id)
        (e_plus if y else e_minus).add(rid)
        for f, v in zip(dataset.schema.features, row.values):
            if v is MISSING:
                continue
            pred = predicate_name(f.name)
            if f.is_numeric:
                bk.add(Atom(pred, (rid, interval_index(dmap, f.name, v))))
            else:
                bk.add(Atom(pred, (rid, v)))
                bk.update(Atom(pred, (rid, u), negated=True) for u in f.domain if u != v)
    return IlpInstance(target, frozenset(bk), frozenset(e_plus), frozenset(e_minus))


# ---------------------------------------------------------------------------
# Program text
# ---------------------------------------------------------------------------

def render_program(instance: IlpInstance) -> str:
    lines = ["B:"]
    lines += [_render_rule(r) for r in sorted(instance.rules, key=lambda r: (r.head, [l.sort_key() for l in r.body]))]
    lines += [a.render() for a in sorted(instance.bk, key=Atom.sort_key)]
    lines.append("E+:")
    lines += [f"{instance.target}({format_const(e)})." for e in sorted(instance.e_plus, key=const_key)]
    lines.append("E-:")
    lines += [f"{instance.target}({format_const(e)})." for e in sorted(instance.e_minus, key=const_key)]
    return "\n".join(lines) + "\n"


def _render_rule(rule: Clause) -> str:
    return rule.render("X")


def emit_program(instance: IlpInstance, path) -> None:
    Path(path).write_text(render_program(instance), encoding="utf-8")


def write_provenance(prov: Sequence[Provenance], path) -> None:
    Path(path).write_text(json.dumps([p.to_dict() for p in prov], indent=1) + "\n", encoding="utf-8")


_TOKEN = re.compile(r"""
    \s*(?:
      (?P<neck>:-)
    | (?P<quoted>'(?:[^'\\]|\\.)*')
    | (?P<num>-?\d+(?:\.\d+)?)
    | (?P<name>[a-z][A-Za-z0-9_]*)
    | (?P<var>[A-Z_][A-Za-z0-9_]*)
    | (?P<punct>[(),.\-])
    )""", re.VERBOSE)
_HEADER = re.compile(r"^\s*(B|E\+|E-|E\u2212)\s*:(?!-)")


def _tokenize(text: str, line: int):
    pos = 0
    out = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r}", line)
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "quoted":
            val = re.sub(r"\\(.)", r"\1", val[1:-1])
        out.append((kind, val, line))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, kind=None, value=None):
        t = self.peek()
        if t is None:
            last = self.toks[-1][2] if self.toks else 1
            raise ParseError("unexpected end of input", last)
        if (kind and t[0] != kind) or (value and (t[1] != value or t[0] == "quoted")):
            raise ParseError(f"expected {value or kind}, found {t[1]!r}", t[2])
        self.i += 1
        return t

    def term(self):
        t = self.take()
        if t[0] == "var":
            return ("var", t[1])
        if t[0] == "num":
            return ("const", norm_const(t[1]))
        if t[0] in ("name", "quoted"):
            return ("const", t[1])
        raise ParseError(f"expected a term, found {t[1]!r}", t[2])

    def atom(self):
        neg = False
        t = self.peek()
        if t and t[0] == "punct" and t[1] == "-":
            self.take()
            neg = True
        name = self.take("name")
        args = []
        if self.peek() and self.peek()[:2] == ("punct", "("):
            self.take(value="(")
            args.append(self.term())
            while self.peek() and self.peek()[:2] == ("punct", ","):
                self.take()
                args.append(self.term())
            self.take(value=")")
        return neg, name[1], args, name[2]

    def statement(self):
        neg, pred, args, line = self.atom()
        body = None
        if self.peek() and self.peek()[0] == "neck":
            self.take()
            body = [self.body_literal()]
            while self.peek() and self.peek()[:2] == ("punct", ","):
                self.take()
                body.append(self.body_literal())
        self.take(value=".")
        return neg, pred, args, body, line

    def body_literal(self):
        t = self.peek()
        naf = False
        if t and t[0] == "name" and t[1] == "not":
            self.take()
            naf = True
        elif t and t[0] == "name" and t[1] == "true":
            self.take()
            return None
        neg, pred, args, line = self.atom()
        return naf, neg, pred, args, line


def _rule_literal(item, var: str) -> Literal:
    naf, neg, pred, args, line = item
    if not args or args[0] != ("var", var):
        raise ParseError("body literals must take the head variable as first argument", line)
    if len(args) > 2 or (len(args) == 2 and args[1][0] != "const"):
        raise ParseError("body literals take at most one constant argument", line)
    const = args[1][1] if len(args) == 2 else None
    pol = NAF if naf else (NEG if neg else POS)
    return Literal(pred, const, pol)


def parse_program(text: str) -> IlpInstance:
    """Parse the sectioned program format. Statements may not span sections."""
    section = None
    stmts = {"B": [], "E+": [], "E-": []}
    tokens: List = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("%", 1)[0]
        m = _HEADER.match(line)
        if m:
            if tokens:
                raise ParseError("unterminated statement before section header", lineno)
            section = "E-" if m.group(1) in ("E-", "E\u2212") else m.group(1)
            line = line[m.end():]
        toks = _tokenize(line, lineno)
        if toks and section is None:
            raise ParseError("statement outside of a B:/E+:/E-: section", lineno)
        tokens.extend(toks)
        # flush complete statements
        while True:
            ends = [i for i, t in enumerate(tokens) if t[0] == "punct" and t[1] == "."]
            if not ends:
                break
            p = _Parser(tokens[: ends[0] + 1])
            stmts[section].append(p.statement())
            if p.i != len(p.toks):
                raise ParseError("trailing tokens after statement", tokens[p.i][2])
            tokens = tokens[ends[0] + 1:]
    if tokens:
        raise ParseError("unterminated statement (missing '.')", tokens[-1][2])

    bk, rules = set(), []
    for neg, pred, args, body, line in stmts["B"]:
        if body is None:
            if any(a[0] == "var" for a in args) or not 1 <= len(args) <= 2:
                raise ParseError("BK facts must be ground with one or two arguments", line)
            bk.add(Atom(pred, tuple(a[1] for a in args), neg))
        else:
            if neg or len(args) != 1 or args[0][0] != "var":
                raise ParseError("BK rule heads must be p(X)", line)
            lits = [_rule_literal(b, args[0][1]) for b in body if b is not None]
            if any(l.polarity == NAF for l in lits):
                raise ParseError("negation as failure is not allowed in BK rules", line)
            rules.append(Clause(pred, tuple(lits)))

    target = None
    ex = {"E+": set(), "E-": set()}
    for sec in ("E+", "E-"):
        for neg, pred, args, body, line in stmts[sec]:
            if body is not None or neg or len(args) != 1 or args[0][0] != "const":
                raise ParseError("examples must be ground unary atoms", line)
            if target is None:
                target = pred
            elif pred != target:
                raise ParseError(f"example predicate {pred!r} differs from target {target!r}", line)
            ex[sec].add(args[0][1])
    if target is None:
        target = "target"
    return IlpInstance(target, frozenset(bk), frozenset(ex["E+"]), frozenset(ex["E-"]), tuple(rules))


def load_program(path) -> IlpInstance:
    return parse_program(Path(path).read_text(encoding="utf-8"))
