"""Feature containers flowing through the transcending estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["FeatureGrid", "FeatureSequence"]


@dataclass(frozen=True, eq=False)
class FeatureGrid:
    """Patch-grid features of shape (rows, cols, dim).

    Rows and cols are the image extent divided by the patch size; the
    divisibility is the caller's concern since grids here come from
    fixture providers rather than real encoders.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f"expected (rows, cols, dim), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid features must be finite")
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    """Per-frame pooled feature vectors of shape (steps, dim)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ValueError(f"expected (steps >= 1, dim), got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sequence features must be finite")
        object.__setattr__(self, "values", values)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]
