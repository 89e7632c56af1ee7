"""Weakly-supervised domain adaptation for ordinal sequence labeling.

A self-contained reference implementation: a small reverse-mode autodiff
engine, soft ordinal label codes, multiple-instance bag pooling, an
adversarial domain-invariant feature extractor trained with gradient
reversal, agreement metrics, a synthetic two-domain data generator, and the
training/evaluation harness tying them together.
"""

from .autodiff import LOG_FLOOR, Tensor, affine, as_tensor, concat_rows, zero_gradients
from .bags import (POOLINGS, SOURCE_DOMAIN, TARGET_DOMAIN, Bag, Sequence,
                   adaptive_pool, make_bags, max_pool, mean_pool, pool_rows,
                   pooling_indices, relevant_frames)
from .estimator import WeakOrdinalDomainAdapter
from .labels import (DEFAULT_LEVELS, ENCODINGS, GaussianCode,
                     GaussianLabelEncoder, encode_labels, gaussian_encode,
                     level_from_continuous, one_hot, quantize_intensity)
from .losses import (LossReport, domain_loss, lambda_schedule, source_loss,
                     target_weak_loss)
from .metrics import MetricsReport, PairMetrics, evaluate, icc31, mae, pcc
from .network import CheckpointError, Network, NetworkConfig, uniform_init_bound
from .synthetic import (DomainSpec, generate_source, generate_target, load_csv,
                        make_shift, save_csv)
from .training import (DA_MODES, FoldResult, TrainConfig, TrainState,
                       TrainingDiverged, evaluate_bags, evaluate_frames, fit,
                       loso_evaluate, predict_intensity, predict_levels,
                       train_step, weighted_sampler)

__version__ = "0.1.0"

__all__ = [
    "LOG_FLOOR", "Tensor", "affine", "as_tensor", "concat_rows", "zero_gradients",
    "POOLINGS", "SOURCE_DOMAIN", "TARGET_DOMAIN", "Bag", "Sequence",
    "adaptive_pool", "make_bags", "max_pool", "mean_pool", "pool_rows",
    "pooling_indices", "relevant_frames",
    "WeakOrdinalDomainAdapter",
    "DEFAULT_LEVELS", "ENCODINGS", "GaussianCode", "GaussianLabelEncoder",
    "encode_labels", "gaussian_encode", "level_from_continuous", "one_hot",
    "quantize_intensity",
    "LossReport", "domain_loss", "lambda_schedule", "source_loss",
    "target_weak_loss",
    "MetricsReport", "PairMetrics", "evaluate", "icc31", "mae", "pcc",
    "CheckpointError", "Network", "NetworkConfig", "uniform_init_bound",
    "DomainSpec", "generate_source", "generate_target", "load_csv",
    "make_shift", "save_csv",
    "DA_MODES", "FoldResult", "TrainConfig", "TrainState", "TrainingDiverged",
    "evaluate_bags", "evaluate_frames", "fit", "loso_evaluate",
    "predict_intensity", "predict_levels", "train_step", "weighted_sampler",
    "__version__",
]
