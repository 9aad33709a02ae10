"""Run-length codec and mask-volume arithmetic.

Covers the bit-exact RLE interchange form, volumetric IoU between mask
tubes, and the three segmentation losses (soft IoU, Dice, focal). The loss
functions accept either plain arrays or autodiff tensors for the predicted
probabilities, so the same formulas serve evaluation and training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .scene import MaskTube

__all__ = [
    "CorruptRleError",
    "SoftMaskTube",
    "rle_encode",
    "rle_decode",
    "tube_iou",
    "iou_loss",
    "dice_loss",
    "focal_loss",
]


class CorruptRleError(ValueError):
    """Raised when frame run lengths do not sum to width * height."""


@dataclass(frozen=True, eq=False)
class SoftMaskTube:
    """Dense per-voxel foreground probabilities over frames x H x W."""

    values: np.ndarray | Tensor

    def __post_init__(self):
        data = self.values.data if isinstance(self.values, Tensor) else np.asarray(self.values)
        if data.ndim != 3:
            raise ValueError(f"expected a (frames, height, width) volume, got shape {data.shape}")
        if min(data.shape) <= 0:
            raise ValueError("dimensions must be positive")
        if not isinstance(self.values, Tensor):
            if np.min(data) < 0.0 or np.max(data) > 1.0:
                raise ValueError("probabilities must lie in [0, 1]")

    @property
    def shape(self) -> tuple[int, int, int]:
        data = self.values.data if isinstance(self.values, Tensor) else self.values
        return tuple(data.shape)


def _encode_frame(flat: np.ndarray) -> tuple[int, ...]:
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0] != 0:
        runs = [0] + runs
    return tuple(int(r) for r in runs)


def rle_encode(volume: np.ndarray) -> MaskTube:
    """Encode a dense binary (frames, height, width) volume."""
    volume = np.asarray(volume)
    if volume.ndim != 3 or min(volume.shape) <= 0:
        raise ValueError(f"expected a non-empty (frames, height, width) volume, got shape {volume.shape}")
    binary = (volume != 0).astype(np.uint8)
    frames, height, width = binary.shape
    runs = tuple(_encode_frame(binary[t].reshape(-1)) for t in range(frames))
    return MaskTube(frames=frames, width=width, height=height, runs=runs)


def rle_decode(tube: MaskTube) -> np.ndarray:
    """Decode back to a dense uint8 volume; round-trip inverse of encode."""
    area = tube.width * tube.height
    volume = np.zeros((tube.frames, tube.height, tube.width), dtype=np.uint8)
    for t, frame_runs in enumerate(tube.runs):
        if sum(frame_runs) != area:
            raise CorruptRleError(
                f"frame {t}: runs sum to {sum(frame_runs)}, expected {area}"
            )
        flat = np.zeros(area, dtype=np.uint8)
        position = 0
        value = 0
        for run in frame_runs:
            if value:
                flat[position:position + run] = 1
            position += run
            value = 1 - value
        volume[t] = flat.reshape(tube.height, tube.width)
    return volume


def tube_iou(a: MaskTube, b: MaskTube) -> float:
    """Voxel-count IoU of two tubes; 0.0 when both are empty."""
    if (a.frames, a.width, a.height) != (b.frames, b.width, b.height):
        raise ValueError(
            f"tube dimensions differ: {(a.frames, a.height, a.width)} vs {(b.frames, b.height, b.width)}"
        )
    da = rle_decode(a).astype(bool)
    db = rle_decode(b).astype(bool)
    union = int(np.count_nonzero(da | db))
    if union == 0:
        return 0.0
    return int(np.count_nonzero(da & db)) / union


# -- differentiable losses over soft predictions ------------------------

def _dense_pred(pred) -> np.ndarray | Tensor:
    if isinstance(pred, SoftMaskTube):
        return pred.values
    return pred


def _dense_gold(gold) -> np.ndarray:
    if isinstance(gold, MaskTube):
        return rle_decode(gold).astype(np.float64)
    return np.asarray(gold, dtype=np.float64)


def _check_shapes(p, g):
    p_shape = tuple(p.data.shape) if isinstance(p, Tensor) else tuple(np.shape(p))
    if p_shape != tuple(g.shape):
        raise ValueError(f"prediction shape {p_shape} does not match target shape {tuple(g.shape)}")


def _total(x):
    if isinstance(x, Tensor):
        return x.sum()
    return float(np.sum(x))


def _value(x) -> float:
    return x.item() if isinstance(x, Tensor) else float(x)


def iou_loss(pred, gold):
    """Soft IoU loss: 1 - sum(p*g) / sum(p + g - p*g).

    Differentiable in the prediction, which a thresholded IoU would not
    be. Returns 0.0 for the degenerate empty-vs-empty case.
    """
    p = _dense_pred(pred)
    g = _dense_gold(gold)
    _check_shapes(p, g)
    intersection = _total(p * g)
    union = _total(p) + float(np.sum(g)) - intersection
    if _value(union) == 0.0:
        return 0.0
    return 1.0 - intersection / union


def dice_loss(pred, gold, eps: float = 1.0):
    """Dice loss with smoothing in the denominator only.

    loss = 1 - 2 * sum(p*g) / (sum(p) + sum(g) + eps), and exactly 0.0
    when prediction and target are both empty.
    """
    p = _dense_pred(pred)
    g = _dense_gold(gold)
    _check_shapes(p, g)
    mass = _total(p) + float(np.sum(g))
    if _value(mass) == 0.0:
        return 0.0
    intersection = _total(p * g)
    return 1.0 - (2.0 * intersection) / (mass + eps)


def focal_loss(pred, gold, alpha: float = 0.25, gamma: float = 2.0, clip: float = 1e-7):
    """Mean focal loss: -alpha_t * (1 - p_t)^gamma * log(p_t).

    Probabilities are clipped to [clip, 1 - clip] before the log. With
    gamma=0 and alpha=0.5 this reduces to half the balanced cross-entropy.
    """
    p = _dense_pred(pred)
    g = _dense_gold(gold)
    _check_shapes(p, g)
    if isinstance(p, Tensor):
        p = p.clip(clip, 1.0 - clip)
        p_t = p * g + (1.0 - p) * (1.0 - g)
        alpha_t = alpha * g + (1.0 - alpha) * (1.0 - g)
        voxel_losses = -1.0 * alpha_t * (1.0 - p_t) ** gamma * p_t.log()
        return voxel_losses.mean()
    p = np.clip(np.asarray(p, dtype=np.float64), clip, 1.0 - clip)
    p_t = p * g + (1.0 - p) * (1.0 - g)
    alpha_t = alpha * g + (1.0 - alpha) * (1.0 - g)
    return float(np.mean(-alpha_t * (1.0 - p_t) ** gamma * np.log(p_t)))
