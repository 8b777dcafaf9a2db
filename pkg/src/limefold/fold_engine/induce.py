"""Top-down clause induction: FOIL and FOLD (defaults with learned exceptions)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .logic import (NAF, NEG, POS, Clause, Const, Evaluator, FactIndex, GroundFact, Hypothesis,
                    Literal, const_key)

log = logging.getLogger(__name__)

NO_GAIN = -math.inf


def information_gain(p0: int, n0: int, p1: int, n1: int, t: int) -> float:
    """Weighted purity improvement of specializing a clause.

    ``p0``/``n0`` are positives/negatives covered before, ``p1``/``n1`` after,
    ``t`` the positives covered by both. Returns ``-inf`` when ``p1`` is 0.
    """
    if p1 == 0:
        return NO_GAIN
    return t * (math.log2(p1 / (p1 + n1)) - math.log2(p0 / (p0 + n0)))


@dataclass
class FoldParams:
    max_rule_length: int = 7
    max_exception_depth: int = 3
    literal_cost: float = 1.0
    constant_cost: float = 1.0  # extra cost per constant argument of a literal
    fact_cost: float = 1.0
    noise_tolerance: int = 0
    debug: bool = False


@dataclass
class _Candidate:
    literal: Literal
    gain: float
    pos: Set[Const]
    neg: Set[Const]

    def rank(self):
        # higher gain, then larger positive coverage, then name and constant
        lit = self.literal
        c = (0, 0, "") if lit.constant is None else const_key(lit.constant)
        return (-self.gain, -len(self.pos), lit.predicate, c, lit.polarity != POS)


class _Search:
    """Shared state for one induction run over a fixed instance."""

    def __init__(self, instance, params: FoldParams):
        self.target = instance.target
        self.params = params
        self.index: FactIndex = instance.index()
        self.restricted = instance.exception_only()
        self.unary = sorted(self.index.unary)
        self.ab_count = 0
        self.ab_clauses: List[Clause] = []
        self.facts: List[GroundFact] = []

    # -- candidate generation ----------------------------------------------
    def refine(self, body: Sequence[Literal], pos: Set[Const], exception_mode: bool) -> List[Literal]:
        """Literals worth adding to ``body``.

        Unary BK predicates are always proposed; constant-bearing literals are
        drawn only from facts of the currently covered positives. Facts from
        negatively weighted explanation pairs are admitted only in exception mode.
        """
        present = set(body)
        out = set()
        blocked = set()  # keys seen only through exception-only facts
        for e in pos:
            for key in self.index.keys_of(e):
                pred, neg, c = key
                if not exception_mode and (e, key) in self.restricted:
                    blocked.add(key)
                    continue
                out.add(Literal(pred, c, NEG if neg else POS))
        if pos:
            for p in self.unary:
                lit = Literal(p)
                if lit.key not in blocked or lit in out:
                    out.add(lit)
        return sorted((l for l in out if l not in present), key=Literal.sort_key)

    def best_literal(self, body, pos, neg, exception_mode, progress=False) -> Optional[_Candidate]:
        # progress: only literals that keep a positive and drop a negative
        best = None
        p0, n0 = len(pos), len(neg)
        for lit in self.refine(body, pos, exception_mode):
            ext = self.index.extension(lit.key)
            p1 = pos & ext
            n1 = neg & ext
            gain = information_gain(p0, n0, len(p1), len(n1), len(p1))
            if progress and (not p1 or len(n1) == n0):
                continue
            cand = _Candidate(lit, gain, p1, n1)
            if best is None or cand.rank() < best.rank():
                best = cand
        if best is not None and self.params.debug:
            self._check_gain(body, best, pos, neg)
        return best

    def _check_gain(self, body, cand, pos, neg):
        """Recompute the gain of ``cand`` from raw coverage of the extended clause."""
        h = Hypothesis(self.target, abnormals=list(self.ab_clauses),
                       facts=[f for f in self.facts if f.predicate != self.target])
        ev = Evaluator(h, self.index)
        before = Clause("_probe", tuple(body))
        after = before.extend(cand.literal)
        pb, nb = ev.clause_cover(before, pos), ev.clause_cover(before, neg)
        pa, na = ev.clause_cover(after, pos), ev.clause_cover(after, neg)
        g = information_gain(len(pb), len(nb), len(pa), len(na), len(pa & pb))
        assert g == cand.gain or (math.isinf(g) and math.isinf(cand.gain)), (g, cand.gain)

    # -- helpers ------------------------------------------------------------
    def ab_cover(self, name: str, examples: Set[Const]) -> Set[Const]:
        h = Hypothesis(self.target, abnormals=list(self.ab_clauses),
                       facts=[f for f in self.facts if f.predicate != self.target])
        return Evaluator(h, self.index).predicate_cover(name, examples)

    def body_cover(self, body: Sequence[Literal], examples: Set[Const]) -> Set[Const]:
        h = Hypothesis(self.target, abnormals=list(self.ab_clauses),
                       facts=[f for f in self.facts if f.predicate != self.target])
        return Evaluator(h, self.index).clause_cover(Clause("_probe", tuple(body)), examples)

    def description_cost(self, body) -> float:
        return description_cost(body, self.params)

    def enumeration_cost(self, pos) -> float:
        return len(pos) * self.params.fact_cost


def description_cost(body: Sequence[Literal], params: FoldParams) -> float:
    """Symbol count of a clause body: each literal plus each constant it carries."""
    return sum(params.literal_cost + (params.constant_cost if l.constant is not None else 0.0)
               for l in body)


@dataclass
class _Outcome:
    body: Optional[Tuple[Literal, ...]] = None  # learned clause body
    facts: Tuple[Const, ...] = ()  # enumerated examples
    deferred: FrozenSet[Const] = frozenset()  # abandoned, handed back to the caller


def enumerate_facts(body: Sequence[Literal], positives, params: FoldParams) -> Tuple[Optional[List[Const]], List[Const]]:
    """Ground out the positives a clause covers but cannot separate from negatives.

    Returns ``(facts, deferred)``: when listing the positives would cost more
    than the clause itself, the clause is abandoned and the positives are
    returned as ``deferred`` for the outer loop instead.
    """
    pos = sorted(positives, key=const_key)
    if not pos:
        return [], []
    if len(pos) * params.fact_cost > description_cost(body, params):
        return None, pos
    return pos, []


class FoldLearner(_Search):

    def fold(self, pos: Set[Const], neg: Set[Const], depth: int = 0) -> Tuple[List[Tuple[Literal, ...]], List[Const]]:
        """Sequential covering; returns (clause bodies, enumerated examples)."""
        bodies: List[Tuple[Literal, ...]] = []
        facts: List[Const] = []
        deferred: Set[Const] = set()
        pos = set(pos)
        while pos:
            out = self.specialize((), set(pos), set(neg), depth)
            if out.body is not None:
                bodies.append(out.body)
                pos -= self.body_cover(out.body, pos)
            elif out.facts:
                facts.extend(out.facts)
                pos -= set(out.facts)
            else:
                deferred |= out.deferred
                pos -= out.deferred
        if deferred:
            covered = set()
            for b in bodies:
                covered |= self.body_cover(b, deferred)
            facts.extend(sorted(deferred - covered, key=const_key))
        return bodies, facts

    def specialize(self, body, pos: Set[Const], neg: Set[Const], depth: int) -> _Outcome:
        p = self.params
        body = tuple(body)
        while neg and len(body) < p.max_rule_length:
            cand = self.best_literal(body, pos, neg, exception_mode=depth > 0)
            if cand is None or cand.gain <= 0:
                break
            body = body + (cand.literal,)
            pos, neg = cand.pos, cand.neg
            if self.description_cost(body) > self.enumeration_cost(pos):
                return _Outcome(facts=tuple(sorted(pos, key=const_key)))
        if not neg:
            return _Outcome(body=body)
        if depth < p.max_exception_depth:
            exc = self.exception(body, pos, neg, depth)
            if exc is not None:
                return _Outcome(body=exc)
        facts, deferred = enumerate_facts(body, pos, p)
        if facts is None:
            return _Outcome(deferred=frozenset(deferred))
        return _Outcome(facts=tuple(facts))

    def exception(self, body, pos: Set[Const], neg: Set[Const], depth: int):
        """Learn why the covered negatives are exceptions by swapping roles."""
        probe = self.best_literal((), neg, pos, exception_mode=True)
        if probe is None or probe.gain <= 0:
            return None
        bodies, facts = self.fold(neg, pos, depth + 1)
        if not bodies and len(facts) * self.params.fact_cost > self.enumeration_cost(pos):
            return None
        name = f"ab{self.ab_count}"
        self.ab_count += 1
        self.ab_clauses.extend(Clause(name, b) for b in bodies)
        self.facts.extend(GroundFact(name, e) for e in facts)
        return tuple(body) + (Literal(name, None, NAF),)


def fold(instance, params: Optional[FoldParams] = None) -> Hypothesis:
    """Induce a default theory whose target covers E+ and none of E-."""
    params = params or FoldParams()
    learner = FoldLearner(instance, params)
    bodies, facts = learner.fold(set(instance.e_plus), set(instance.e_minus))
    return _drop_orphans(Hypothesis(instance.target,
                      defaults=[Clause(instance.target, b) for b in bodies],
                      abnormals=learner.ab_clauses,
                      facts=[GroundFact(instance.target, e) for e in facts] + learner.facts))


def foil(instance, params: Optional[FoldParams] = None) -> Hypothesis:
    """Plain sequential covering with positive and classically negated literals.

    Each step adds the best-gain literal among those that keep a positive
    and exclude a negative, so separable data ends up fully covered with no
    negatives. A clause that runs out of such literals is kept as is; if it
    has no body at all, the remaining positives are left uncovered.
    """
    params = params or FoldParams()
    s = _Search(instance, params)
    pos = set(instance.e_plus)
    neg_all = set(instance.e_minus)
    defaults = []
    while pos:
        body: Tuple[Literal, ...] = ()
        cp, cn = set(pos), set(neg_all)
        while cn and len(body) < params.max_rule_length:
            cand = s.best_literal(body, cp, cn, exception_mode=True, progress=True)
            if cand is None:
                break
            body = body + (cand.literal,)
            cp, cn = cand.pos, cand.neg
        if not body and cn:
            break  # nothing separates the rest; leave them uncovered
        defaults.append(Clause(instance.target, body))
        pos -= cp
    return Hypothesis(instance.target, defaults=defaults)


# ---------------------------------------------------------------------------
# Post-processing
# ---------------------------------------------------------------------------

def _coverage(h: Hypothesis, index: FactIndex, pos, neg):
    ev = Evaluator(h, index)
    return ev.predicate_cover(h.target, set(pos)), ev.predicate_cover(h.target, set(neg))


def _drop_orphans(h: Hypothesis) -> Hypothesis:
    used = set()
    frontier = [l.predicate for c in h.defaults for l in c.body]
    while frontier:
        p = frontier.pop()
        if p in used:
            continue
        used.add(p)
        frontier.extend(l.predicate for c in h.abnormals if c.head == p for l in c.body)
    return Hypothesis(h.target, list(h.defaults),
                      [c for c in h.abnormals if c.head in used],
                      [f for f in h.facts if f.predicate == h.target or f.predicate in used])


def prune_hypothesis(h: Hypothesis, instance, tolerance: int = 0) -> Hypothesis:
    """Drop literals that do not keep negatives out, then redundant clauses.

    Literal removal is accepted when E+ coverage does not shrink and at most
    ``tolerance`` additional negatives become covered. Clauses are then tried
    for removal from the smallest positive coverage upward.
    """
    index = instance.index()
    pos, neg = set(instance.e_plus), set(instance.e_minus)
    base_pos, base_neg = _coverage(h, index, pos, neg)

    # pass 1: literals, defaults first then abnormality clauses
    defaults, abnormals = list(h.defaults), list(h.abnormals)
    for group in ("defaults", "abnormals"):
        clauses = defaults if group == "defaults" else abnormals
        for ci in range(len(clauses)):
            i = 0
            while i < len(clauses[ci].body):
                trial = list(clauses)
                trial[ci] = clauses[ci].without(i)
                cand = Hypothesis(h.target,
                                  trial if group == "defaults" else defaults,
                                  abnormals if group == "defaults" else trial,
                                  list(h.facts))
                cp, cn = _coverage(cand, index, pos, neg)
                if cp >= base_pos and len(cn - base_neg) <= tolerance:
                    clauses[ci] = trial[ci]
                    base_pos, base_neg = cp, cn
                else:
                    i += 1
    h = _drop_orphans(Hypothesis(h.target, _dedupe(defaults), _dedupe(abnormals), list(h.facts)))

    # pass 2: whole default clauses, ascending positive coverage
    ev = Evaluator(h, index)
    order = sorted(range(len(h.defaults)), key=lambda i: (len(ev.clause_cover(h.defaults[i], pos)), i))
    keep = list(h.defaults)
    for i in order:
        c = h.defaults[i]
        trial = [d for d in keep if d is not c]
        cand = Hypothesis(h.target, trial, list(h.abnormals), list(h.facts))
        cp, _ = _coverage(cand, index, pos, neg)
        if cp >= base_pos:
            keep = trial
    h = Hypothesis(h.target, keep, list(h.abnormals), list(h.facts))

    # enumerated target facts already derived by a clause
    ev = Evaluator(Hypothesis(h.target, h.defaults, h.abnormals,
                              [f for f in h.facts if f.predicate != h.target]), index)
    by_clause = ev.predicate_cover(h.target, pos | neg)
    facts = [f for f in h.facts if f.predicate != h.target or f.example not in by_clause]
    return _drop_orphans(Hypothesis(h.target, h.defaults, h.abnormals, facts))


def _dedupe(clauses: List[Clause]) -> List[Clause]:
    seen, out = set(), []
    for c in clauses:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out
