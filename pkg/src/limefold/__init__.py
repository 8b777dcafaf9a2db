"""Rule induction from black-box explanations: GBT + LIME + FOLD."""
from .data_model import Dataset, DiscretizationMap, Schema, load_bundled, load_csv, load_schema
from .fold_engine import FoldParams, Hypothesis, fold, foil, prune_hypothesis
from .gbt import GbtModel, GbtParams
from .lime_explainer import LimeConfig
from .pipeline import PipelineConfig, lime_fold, run_lime_fold

__version__ = "0.1.0"
