"""Bundle of the trainable components plus parameter plumbing."""

from __future__ import annotations

from dataclasses import dataclass

from ..autodiff import Tensor
from .decoder import SceneDecoder
from .estimators import DepthEstimator, TemporalEstimator

__all__ = ["TranscendModels", "build_models"]

COMPONENT_NAMES = ("depth", "rgb_temporal", "depth_temporal", "decoder")


@dataclass
class TranscendModels:
    depth: DepthEstimator
    rgb_temporal: TemporalEstimator
    depth_temporal: TemporalEstimator
    decoder: SceneDecoder

    def component(self, name: str):
        if name not in COMPONENT_NAMES:
            raise KeyError(f"unknown component {name!r}")
        return getattr(self, name)

    def params(self, components=COMPONENT_NAMES) -> dict[str, Tensor]:
        """Merged parameter dict with component-name prefixes."""
        merged: dict[str, Tensor] = {}
        for name in components:
            for key, tensor in self.component(name).params.items():
                merged[f"{name}/{key}"] = tensor
        return merged

    def load_values(self, values: dict[str, "object"]) -> None:
        """Overwrite parameters in place from a name -> array mapping."""
        own = self.params()
        for name, array in values.items():
            if name not in own:
                raise KeyError(f"checkpoint has unknown parameter {name!r}")
            if own[name].data.shape != array.shape:
                raise ValueError(f"{name}: shape {array.shape} does not match {own[name].data.shape}")
            own[name].data = array.copy()


def build_models(dim: int = 32, layers: int = 2, heads: int = 4,
                 vocab_size: int = 16, mask_shape: tuple[int, int] = (6, 6),
                 ff_mult: int = 2, seed: int = 0) -> TranscendModels:
    """Construct the component set with seed-derived initializations."""
    rgb_temporal = TemporalEstimator(dim, layers, heads, ff_mult, seed=seed + 1)
    depth_temporal = TemporalEstimator(dim, layers, heads, ff_mult, seed=seed + 2)
    return TranscendModels(
        depth=DepthEstimator(dim, seed=seed),
        rgb_temporal=rgb_temporal,
        depth_temporal=depth_temporal,
        decoder=SceneDecoder(2 * dim, vocab_size, mask_shape, seed=seed + 3),
    )
