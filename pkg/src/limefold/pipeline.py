"""End-to-end LIME-FOLD: discretize, train, explain every row, transform, induce, prune."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import gbt
from .data_model import Dataset, DiscretizationMap, binary_columns, encode, fit_discretization
from .fold_engine import FoldParams, Hypothesis, fold, prune_hypothesis
from .ilp_transform import IlpInstance, predicate_name, transform
from .lime_explainer import Explanation, LimeConfig, TrainingStats, explain_all


def derive_seed(seed: int, *names) -> int:
    """Independent integer seed for a named sub-stream of ``seed``."""
    words = [seed] + [zlib.crc32(str(n).encode()) for n in names]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def target_name(dataset: Dataset) -> str:
    return dataset.schema.target or predicate_name(dataset.schema.label_name)


@dataclass
class PipelineConfig:
    gbt: gbt.GbtParams = field(default_factory=gbt.GbtParams)
    lime: LimeConfig = field(default_factory=LimeConfig)
    fold: FoldParams = field(default_factory=FoldParams)
    seed: int = 0


@dataclass
class LimeFoldResult:
    hypothesis: Hypothesis
    raw_hypothesis: Hypothesis
    instance: IlpInstance
    explanations: List[Explanation]
    dmap: DiscretizationMap
    model: gbt.GbtModel


def train_model(dataset: Dataset, params: Optional[gbt.GbtParams] = None) -> gbt.GbtModel:
    names = [c.name for c in binary_columns(dataset.schema)]
    return gbt.train(encode(dataset), dataset.labels, params, names)


def lime_fold(dataset: Dataset, model: gbt.GbtModel, lime_config: Optional[LimeConfig] = None,
              fold_params: Optional[FoldParams] = None, dmap: Optional[DiscretizationMap] = None,
              target: Optional[str] = None) -> LimeFoldResult:
    """Explain every row of ``dataset`` with ``model`` and induce a pruned default theory."""
    lime_config = lime_config or LimeConfig()
    fold_params = fold_params or FoldParams()
    dmap = dmap if dmap is not None else fit_discretization(dataset)
    stats = TrainingStats.from_dataset(dataset, dmap)
    explanations = explain_all(model, dataset, stats, lime_config)
    instance, _ = transform(dataset, model, explanations, target or target_name(dataset))
    raw = fold(instance, fold_params)
    pruned = prune_hypothesis(raw, instance, fold_params.noise_tolerance)
    return LimeFoldResult(pruned, raw, instance, explanations, dmap, model)


def run_lime_fold(dataset: Dataset, config: PipelineConfig, stream: str = "all") -> LimeFoldResult:
    """Discretize on ``dataset``, train the model, then :func:`lime_fold`."""
    dmap = fit_discretization(dataset)
    params = gbt.GbtParams(**{**config.gbt.__dict__, "seed": derive_seed(config.seed, stream, "gbt")})
    model = train_model(dataset, params)
    lime_cfg = LimeConfig(**{**config.lime.__dict__, "seed": derive_seed(config.seed, stream, "lime")})
    return lime_fold(dataset, model, lime_cfg, config.fold, dmap)
