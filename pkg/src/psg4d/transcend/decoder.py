"""Toy scene decoder: per-step token logits and mask probabilities.

Desk-scale stand-in for the language-model and mask-decoder heads. It
consumes combined feature sequences (RGB and depth stacked per step) and
emits one token distribution plus one frame of foreground probabilities
per step, which is exactly enough surface for the text and segmentation
loss terms to train against.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, sigmoid

__all__ = ["SceneDecoder"]


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class SceneDecoder:
    def __init__(self, in_dim: int, vocab_size: int, mask_shape: tuple[int, int],
                 seed: int = 0):
        self.in_dim = in_dim
        self.vocab_size = vocab_size
        self.mask_shape = tuple(mask_shape)
        rng = np.random.default_rng(seed)
        area = self.mask_shape[0] * self.mask_shape[1]
        self.params: dict[str, Tensor] = {
            "token_w": Tensor(_xavier(rng, in_dim, vocab_size)),
            "token_b": Tensor(np.zeros(vocab_size)),
            "mask_w": Tensor(_xavier(rng, in_dim, area)),
            "mask_b": Tensor(np.zeros(area)),
        }

    def __call__(self, features) -> tuple[Tensor, Tensor]:
        """Map (steps, in_dim) features to logits and mask probabilities.

        Returns token logits of shape (steps, vocab) and mask
        probabilities of shape (steps, height, width).
        """
        x = features if isinstance(features, Tensor) else Tensor(np.asarray(features, dtype=np.float64))
        logits = x @ self.params["token_w"] + self.params["token_b"]
        mask_logits = x @ self.params["mask_w"] + self.params["mask_b"]
        steps = x.shape[0]
        probs = sigmoid(mask_logits).reshape(steps, *self.mask_shape)
        return logits, probs
