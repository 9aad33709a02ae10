"""Central-difference verification of analytic gradients.

The loss closure rebuilds its graph on every call, so perturbing a
parameter in place and re-evaluating gives the numerical derivative of
the exact same computation the analytic pass differentiated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..autodiff import Tensor, no_grad

__all__ = ["GradCheckReport", "grad_check"]


@dataclass
class GradCheckReport:
    max_relative_error: float
    per_param: dict[str, float]

    def worst(self) -> tuple[str, float]:
        name = max(self.per_param, key=self.per_param.get)
        return name, self.per_param[name]


def _relative_error(analytic: float, numeric: float) -> float:
    scale = max(abs(analytic), abs(numeric), 1e-6)
    return abs(analytic - numeric) / scale


def grad_check(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
               h: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients with central differences, per element.

    Returns the maximum relative error per parameter and overall. Elements
    whose analytic and numeric values are both below the error floor count
    as exact.
    """
    for p in params.values():
        p.grad = None
    loss = loss_fn()
    if not isinstance(loss, Tensor):
        raise TypeError("loss_fn must return a scalar tensor")
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    per_param: dict[str, float] = {}
    with no_grad():
        for name, p in params.items():
            worst = 0.0
            flat = p.data.reshape(-1)
            grads = analytic[name].reshape(-1)
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + h
                up = loss_fn().item()
                flat[i] = saved - h
                down = loss_fn().item()
                flat[i] = saved
                numeric = (up - down) / (2.0 * h)
                worst = max(worst, _relative_error(float(grads[i]), numeric))
            per_param[name] = worst

    overall = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(max_relative_error=overall, per_param=per_param)
