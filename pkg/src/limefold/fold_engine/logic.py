"""Single-variable clause language and stratified coverage.

Every clause has the shape ``h(X) :- l1, ..., ln`` where each body literal
is ``p(X)``, ``p(X,c)``, ``-p(X,c)`` (classical negation, a stored fact) or
``not q(X)`` (negation as failure over an invented predicate).
"""
from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

Const = Union[int, str]

POS = "pos"
NEG = "neg"  # classical negation
NAF = "naf"
_POLARITY_ORDER = {POS: 0, NEG: 1, NAF: 2}

_PLAIN_ATOM = re.compile(r"^[a-z][A-Za-z0-9_]*$")
_INT = re.compile(r"^-?\d+$")


def norm_const(value) -> Const:
    """Canonical constant: integer-looking text becomes int."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    text = str(value)
    if _INT.match(text):
        return int(text)
    return text


def format_const(value: Const) -> str:
    if isinstance(value, int):
        return str(value)
    if _PLAIN_ATOM.match(value) or re.match(r"^-?\d+(\.\d+)?$", value):
        return value
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"


def const_key(value: Const):
    """Sort key placing numbers (by value) before strings."""
    if isinstance(value, int):
        return (0, value, "")
    return (1, 0, value)


@dataclass(frozen=True)
class Literal:
    predicate: str
    constant: Optional[Const] = None
    polarity: str = POS

    def __post_init__(self):
        if self.polarity not in _POLARITY_ORDER:
            raise ValueError(f"bad polarity {self.polarity!r}")
        if self.constant is not None:
            object.__setattr__(self, "constant", norm_const(self.constant))
        if self.polarity == NAF and self.constant is not None:
            raise ValueError("NAF literals range over unary invented predicates")

    @property
    def key(self) -> Tuple[str, bool, Optional[Const]]:
        return (self.predicate, self.polarity == NEG, self.constant)

    def sort_key(self):
        c = (0, 0, "") if self.constant is None else const_key(self.constant)
        return (self.predicate, c, _POLARITY_ORDER[self.polarity])

    def render(self, var: str = "X") -> str:
        args = var if self.constant is None else f"{var},{format_const(self.constant)}"
        atom = f"{self.predicate}({args})"
        if self.polarity == NEG:
            return "-" + atom
        if self.polarity == NAF:
            return "not " + atom
        return atom

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class Clause:
    head: str
    body: Tuple[Literal, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "body", tuple(self.body))

    def __len__(self):
        return len(self.body)

    def extend(self, lit: Literal) -> "Clause":
        return Clause(self.head, self.body + (lit,))

    def without(self, i: int) -> "Clause":
        return Clause(self.head, self.body[:i] + self.body[i + 1:])

    def render(self, var: str = "X") -> str:
        head = f"{self.head}({var})"
        if not self.body:
            return f"{head} :- true."
        return f"{head} :- " + ", ".join(l.render(var) for l in self.body) + "."

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class GroundFact:
    predicate: str
    example: Const

    def render(self) -> str:
        return f"{self.predicate}({format_const(self.example)})."


class StratificationError(ValueError):
    pass


@dataclass
class Hypothesis:
    """Default clauses for the target, invented abnormality clauses, and
    enumerated ground facts (for the target or an abnormality predicate)."""

    target: str
    defaults: List[Clause] = field(default_factory=list)
    abnormals: List[Clause] = field(default_factory=list)
    facts: List[GroundFact] = field(default_factory=list)

    def __post_init__(self):
        self.check_stratified()

    def defined(self) -> Set[str]:
        return {self.target} | {c.head for c in self.abnormals} | {f.predicate for f in self.facts}

    def check_stratified(self) -> None:
        """Reject NAF over the target and any cycle through defined predicates."""
        for c in self.defaults + self.abnormals:
            for lit in c.body:
                if lit.polarity == NAF and lit.predicate == self.target:
                    raise StratificationError("negation as failure over the target predicate")
        edges = defaultdict(set)
        defined = self.defined()
        for c in self.defaults + self.abnormals:
            for lit in c.body:
                if lit.predicate in defined:
                    edges[c.head].add(lit.predicate)
        state: Dict[str, int] = {}

        def visit(p):
            state[p] = 1
            for q in edges[p]:
                if state.get(q) == 1:
                    raise StratificationError(f"cyclic dependency through {q!r}")
                if q not in state:
                    visit(q)
            state[p] = 2

        for p in list(edges):
            if p not in state:
                visit(p)

    def clauses_for(self, predicate: str) -> List[Clause]:
        if predicate == self.target:
            return self.defaults
        return [c for c in self.abnormals if c.head == predicate]

    def facts_for(self, predicate: str) -> List[Const]:
        return [f.example for f in self.facts if f.predicate == predicate]

    def ab_predicates(self) -> List[str]:
        seen = []
        for c in self.abnormals:
            if c.head not in seen:
                seen.append(c.head)
        for f in self.facts:
            if f.predicate != self.target and f.predicate not in seen:
                seen.append(f.predicate)
        return seen

    def render(self, var: str = "X") -> str:
        lines = [c.render(var) for c in self.defaults]
        lines += [f.render() for f in self.facts if f.predicate == self.target]
        for ab in self.ab_predicates():
            lines += [c.render(var) for c in self.abnormals if c.head == ab]
            lines += [f.render() for f in self.facts if f.predicate == ab]
        return "\n".join(lines) + ("\n" if lines else "")

    def __str__(self):
        return self.render()


class FactIndex:
    """Extension of every (predicate, negated, constant) key over example ids."""

    def __init__(self, atoms: Iterable = ()):
        self._ext: Dict[Tuple[str, bool, Optional[Const]], Set[Const]] = defaultdict(set)
        self._by_example: Dict[Const, Set[Tuple[str, bool, Optional[Const]]]] = defaultdict(set)
        self.unary: Set[str] = set()
        for a in atoms:
            self.add(a)

    def add(self, atom) -> None:
        e = atom.args[0]
        c = atom.args[1] if len(atom.args) > 1 else None
        key = (atom.predicate, atom.negated, c)
        self._ext[key].add(e)
        self._by_example[e].add(key)
        if c is None and not atom.negated:
            self.unary.add(atom.predicate)

    def extension(self, key) -> Set[Const]:
        return self._ext.get(key, set())

    def keys_of(self, example) -> Set[Tuple[str, bool, Optional[Const]]]:
        return self._by_example.get(example, set())

    def keys(self):
        return self._ext.keys()


class Evaluator:
    """Bottom-up evaluation of a stratified hypothesis over a fact index."""

    def __init__(self, hypothesis: Hypothesis, index: FactIndex):
        self.h = hypothesis
        self.index = index
        self.defined = hypothesis.defined()

    def literal_holds(self, lit: Literal, examples: Set[Const]) -> Set[Const]:
        if lit.polarity == NAF:
            return examples - self.predicate_cover(lit.predicate, examples)
        if lit.predicate in self.defined:
            return self.predicate_cover(lit.predicate, examples)
        return examples & self.index.extension(lit.key)

    def clause_cover(self, clause: Clause, examples: Iterable[Const]) -> Set[Const]:
        out = set(examples)
        for lit in clause.body:
            if not out:
                break
            out = self.literal_holds(lit, out)
        return out

    def predicate_cover(self, predicate: str, examples: Set[Const]) -> Set[Const]:
        out = examples & set(self.h.facts_for(predicate))
        for c in self.h.clauses_for(predicate):
            out |= self.clause_cover(c, examples - out)
        return out


@dataclass
class CoverageResult:
    covered: Set[Const]
    uncovered: Set[Const]


def covers(what: Union[Hypothesis, Clause], examples: Iterable[Const], index: FactIndex,
           hypothesis: Optional[Hypothesis] = None) -> CoverageResult:
    """Which ``examples`` does a hypothesis (or one clause of it) derive?

    A bare clause is evaluated against ``hypothesis`` for its NAF literals.
    """
    examples = set(examples)
    if isinstance(what, Hypothesis):
        got = Evaluator(what, index).predicate_cover(what.target, examples)
    else:
        h = hypothesis or Hypothesis(what.head)
        got = Evaluator(h, index).clause_cover(what, examples)
    return CoverageResult(got, examples - got)
