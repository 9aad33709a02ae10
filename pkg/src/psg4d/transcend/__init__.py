"""Differentiable 2D-to-4D feature transcending at toy scale.

A depth estimator lifts RGB patch features toward depth features, and two
autoregressive temporal estimators roll single-frame features out over
time. Every loss term is gradient-checked against central finite
differences.
"""

from .bundle import TranscendModels, build_models
from .checkpoint import load_params, save_params
from .decoder import SceneDecoder
from .estimators import DepthEstimator, TemporalEstimator, init_from, pool_grid
from .features import FeatureGrid, FeatureSequence
from .gradcheck import GradCheckReport, grad_check
from .losses import (
    LOSS_NAMES,
    composite_loss,
    consistency_losses,
    regression_loss,
    token_cross_entropy,
    total_loss,
)
from .optim import AdamW, inverse_sqrt_schedule, train_step, warmup_cosine_schedule

__all__ = [
    "TranscendModels",
    "build_models",
    "load_params",
    "save_params",
    "SceneDecoder",
    "DepthEstimator",
    "TemporalEstimator",
    "init_from",
    "pool_grid",
    "FeatureGrid",
    "FeatureSequence",
    "GradCheckReport",
    "grad_check",
    "LOSS_NAMES",
    "composite_loss",
    "consistency_losses",
    "regression_loss",
    "token_cross_entropy",
    "total_loss",
    "AdamW",
    "inverse_sqrt_schedule",
    "train_step",
    "warmup_cosine_schedule",
]
