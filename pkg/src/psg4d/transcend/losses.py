"""Loss terms for the transcending estimators and the scene decoder.

The composite objective sums the scene-graph group (text cross-entropy
plus the three segmentation losses), the three estimator regressions, and
the two cross-path consistency terms. Weights default to 1 and are
configurable per term.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat, mean, stack
from ..masks import dice_loss, focal_loss, iou_loss
from .estimators import DepthEstimator, TemporalEstimator, pool_grid
from .features import FeatureGrid, FeatureSequence

__all__ = [
    "LOSS_NAMES",
    "SG_LOSSES",
    "regression_loss",
    "token_cross_entropy",
    "consistency_losses",
    "total_loss",
    "composite_loss",
]

SG_LOSSES = ("txt", "iou", "dice", "focal")
LOSS_NAMES = SG_LOSSES + ("de", "rte", "dte", "depth_rollout", "path_consistency")


def _values(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (FeatureGrid, FeatureSequence)):
        return Tensor(x.values)
    return Tensor(np.asarray(x, dtype=np.float64))


def regression_loss(pred, gold, mode: str = "mse"):
    """Elementwise regression distance; MSE by default, cosine optional."""
    p = _values(pred)
    g = _values(gold)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    if mode == "mse":
        diff = p - g
        return mean(diff * diff)
    if mode == "cosine":
        eps = 1e-12
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        dot = (flat_p * flat_g).sum()
        norm = ((flat_p * flat_p).sum() + eps) ** 0.5 * ((flat_g * flat_g).sum() + eps) ** 0.5
        return 1.0 - dot / norm
    raise ValueError(f"unknown regression mode {mode!r}")


def token_cross_entropy(logits, targets) -> Tensor:
    """Mean cross-entropy of integer targets under (steps, vocab) logits."""
    x = logits if isinstance(logits, Tensor) else Tensor(np.asarray(logits, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.int64)
    steps = x.shape[0]
    if targets.shape != (steps,):
        raise ValueError(f"targets shape {targets.shape} does not match {steps} steps")
    shift = np.max(x.data, axis=-1, keepdims=True)
    exps = (x - Tensor(shift)).exp()
    log_norm = exps.sum(axis=-1).log() + Tensor(shift[:, 0])
    picked = x[np.arange(steps), targets]
    return mean(log_norm - picked)


def consistency_losses(depth: DepthEstimator, rgb_temporal: TemporalEstimator,
                       depth_temporal: TemporalEstimator, h_rgb, h_depth_seq,
                       steps: int | None = None, mode: str = "mse"):
    """The two cross-path agreement terms.

    First: depth-lift each step of the RGB rollout and regress it onto the
    frame-aligned gold depth sequence. Second: the depth-temporal rollout
    conditioned on the lifted RGB frame must agree with the depth-lifted
    RGB rollout. Both rollouts are free-running (no teacher).
    """
    target = _values(h_depth_seq)
    if target.ndim == 3:
        target = pool_grid(target)
    if target.ndim == 1:
        if steps is None:
            raise ValueError("steps required when the depth target is a single frame")
        target = stack([target] * steps)
    n_steps = steps or target.shape[0]
    rgb_roll = rgb_temporal.rollout(h_rgb, n_steps)
    lifted_roll = depth.apply_sequence(rgb_roll)
    depth_rollout = regression_loss(lifted_roll, target[:n_steps], mode)
    depth_roll = depth_temporal.rollout(depth(h_rgb), n_steps)
    path_consistency = regression_loss(depth_roll, lifted_roll, mode)
    return depth_rollout, path_consistency


def total_loss(components: dict[str, Tensor | float],
               weights: dict[str, float] | None = None):
    """Weighted sum of loss components; every weight defaults to 1."""
    weights = weights or {}
    total = None
    for name in sorted(components):
        term = components[name] * float(weights.get(name, 1.0))
        total = term if total is None else total + term
    if total is None:
        return 0.0
    return total


def composite_loss(models, sample: dict, include=None,
                   weights: dict[str, float] | None = None,
                   mode: str = "mse"):
    """Assemble the full training objective from one sample.

    ``sample`` role keys: "rgb" and "depth" grids, "rgb_seq" and
    "depth_seq" gold sequences, "features" (combined decoder input),
    "tokens" targets, and "mask" gold volume. The scene-graph group runs
    on "features" when present, otherwise on features transcended from
    the RGB grid (free-running rollouts combined per step).

    Returns (total, components); components hold the individual terms.
    """
    include = set(include) if include is not None else set(LOSS_NAMES)
    components: dict[str, Tensor | float] = {}

    if "de" in include:
        components["de"] = regression_loss(models.depth(sample["rgb"]), sample["depth"], mode)
    if "rte" in include:
        gold = _values(sample["rgb_seq"])
        pred = models.rgb_temporal.rollout(sample["rgb"], gold.shape[0], teacher=gold.data)
        components["rte"] = regression_loss(pred, gold, mode)
    if "dte" in include:
        gold = _values(sample["depth_seq"])
        pred = models.depth_temporal.rollout(sample["depth"], gold.shape[0], teacher=gold.data)
        components["dte"] = regression_loss(pred, gold, mode)
    if "depth_rollout" in include or "path_consistency" in include:
        steps = _values(sample["depth_seq"]).shape[0] if "depth_seq" in sample else None
        depth_rollout, path_consistency = consistency_losses(
            models.depth, models.rgb_temporal, models.depth_temporal,
            sample["rgb"], sample.get("depth_seq", sample.get("depth")),
            steps=steps, mode=mode,
        )
        if "depth_rollout" in include:
            components["depth_rollout"] = depth_rollout
        if "path_consistency" in include:
            components["path_consistency"] = path_consistency

    sg_terms = [name for name in SG_LOSSES if name in include]
    if sg_terms:
        if "features" in sample:
            features = _values(sample["features"])
        else:
            steps = np.asarray(sample["tokens"]).shape[0]
            rgb_roll = models.rgb_temporal.rollout(sample["rgb"], steps)
            depth_roll = models.depth_temporal.rollout(models.depth(sample["rgb"]), steps)
            features = concat([rgb_roll, depth_roll], axis=-1)
        logits, mask_probs = models.decoder(features)
        if "txt" in sg_terms:
            components["txt"] = token_cross_entropy(logits, sample["tokens"])
        gold_mask = np.asarray(sample["mask"], dtype=np.float64)
        if "iou" in sg_terms:
            components["iou"] = iou_loss(mask_probs, gold_mask)
        if "dice" in sg_terms:
            components["dice"] = dice_loss(mask_probs, gold_mask)
        if "focal" in sg_terms:
            components["focal"] = focal_loss(mask_probs, gold_mask)

    return total_loss(components, weights), components
