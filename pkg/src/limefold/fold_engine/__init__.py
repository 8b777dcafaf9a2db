from .logic import (NAF, NEG, POS, Clause, CoverageResult, Evaluator, FactIndex, GroundFact,
                    Hypothesis, Literal, StratificationError, covers)
from .induce import (FoldLearner, FoldParams, enumerate_facts, fold, foil, information_gain,
                     prune_hypothesis)

__all__ = [
    "NAF", "NEG", "POS", "Clause", "CoverageResult", "Evaluator", "FactIndex", "GroundFact",
    "Hypothesis", "Literal", "StratificationError", "covers", "FoldLearner", "FoldParams",
    "enumerate_facts", "fold", "foil", "information_gain", "prune_hypothesis",
]
