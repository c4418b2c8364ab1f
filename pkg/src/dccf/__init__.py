"""Deconfounded collaborative filtering.

A front-door-adjusted preference estimator over implicit feedback, with
learned exposure models, popularity-skewed data splitting, synthetic
confounded-data generation, a discrete-SCM verification kernel, and
top-K ranking evaluation. See the ``dccf`` command line for the full
experiment pipeline.
"""

from .data import (DataError, InteractionRecord, InteractionTable, ItemFeatureTable,
                   SplitResult, load_interactions, load_item_features, rand_split,
                   skew_split)
from .evaluate import EvalProtocol, MetricsReport, evaluate
from .exposure import ExposureConfig, ExposureModel, propensity, train_exposure, untrained_exposure
from .model import (DccfModel, TrainConfig, bpr_pair_loss, create_model,
                    estimate_preference, oracle_estimate, train, train_mf_baseline)
from .numerics import DivergenceError
from .synthgen import SynthConfig, generate_world, sample_dataset

__all__ = [
    "DataError", "DivergenceError",
    "InteractionRecord", "InteractionTable", "ItemFeatureTable", "SplitResult",
    "load_interactions", "load_item_features", "rand_split", "skew_split",
    "SynthConfig", "generate_world", "sample_dataset",
    "ExposureConfig", "ExposureModel", "propensity", "train_exposure", "untrained_exposure",
    "DccfModel", "TrainConfig", "create_model", "estimate_preference",
    "oracle_estimate", "bpr_pair_loss", "train", "train_mf_baseline",
    "EvalProtocol", "MetricsReport", "evaluate",
]

__version__ = "0.1.0"
