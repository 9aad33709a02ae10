"""AdamW with decoupled weight decay and warmup learning-rate schedules.

Updates are deterministic given the parameter values and gradients; no
randomness lives here. The cosine schedule is the default; an inverse
square root schedule is available behind configuration.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..autodiff import Tensor

__all__ = ["warmup_cosine_schedule", "inverse_sqrt_schedule", "AdamW", "train_step"]

Schedule = Callable[[int], float]


def warmup_cosine_schedule(peak_lr: float, warmup_steps: int, total_steps: int,
                           min_lr: float = 0.0) -> Schedule:
    """Linear warmup to the peak, then cosine decay to ``min_lr``."""

    def schedule(step: int) -> float:
        if warmup_steps > 0 and step < warmup_steps:
            return peak_lr * (step + 1) / warmup_steps
        if total_steps <= warmup_steps:
            return peak_lr
        progress = (step - warmup_steps) / (total_steps - warmup_steps)
        progress = min(1.0, max(0.0, progress))
        return min_lr + 0.5 * (peak_lr - min_lr) * (1.0 + math.cos(math.pi * progress))

    return schedule


def inverse_sqrt_schedule(peak_lr: float, warmup_steps: int) -> Schedule:
    """Linear warmup, then decay proportional to 1/sqrt(step)."""

    def schedule(step: int) -> float:
        if warmup_steps > 0 and step < warmup_steps:
            return peak_lr * (step + 1) / warmup_steps
        reference = max(warmup_steps, 1)
        return peak_lr * math.sqrt(reference / (step + 1))

    return schedule


class AdamW:
    """Adam with decoupled weight decay over a named parameter dict."""

    def __init__(self, params: dict[str, Tensor], lr: float | Schedule = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def current_lr(self) -> float:
        if callable(self.lr):
            return float(self.lr(self.step_count))
        return float(self.lr)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self):
        lr = self.current_lr()
        self.step_count += 1
        b1, b2 = self.betas
        correct1 = 1.0 - b1 ** self.step_count
        correct2 = 1.0 - b2 ** self.step_count
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[name] = b1 * self.m[name] + (1.0 - b1) * grad
            self.v[name] = b2 * self.v[name] + (1.0 - b2) * grad * grad
            m_hat = self.m[name] / correct1
            v_hat = self.v[name] / correct2
            p.data -= lr * (m_hat / (np.sqrt(v_hat) + self.eps) + self.weight_decay * p.data)


def train_step(optimizer: AdamW, loss_fn: Callable[[], Tensor]) -> float:
    """One optimization step: forward, backward, update. Returns the loss."""
    optimizer.zero_grad()
    loss = loss_fn()
    if not isinstance(loss, Tensor):
        raise TypeError("loss_fn must return a scalar tensor")
    loss.backward()
    optimizer.step()
    return loss.item()
