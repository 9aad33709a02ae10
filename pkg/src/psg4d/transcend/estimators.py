"""The three feature estimators: depth lifting and temporal rollout.

The depth estimator is a 3x3 convolution over the patch grid followed by
a 1x1 projection. The temporal estimators are small pre-norm transformers
with causal masked attention over [condition prefix, step tokens]; the
additive mask uses -inf so masked positions get exactly zero weight,
which makes causality a bit-exact property rather than a numerical one.
"""

from __future__ import annotations

import numpy as np

from ..autodiff import Tensor, concat, gelu, mean, pad2d, softmax, stack
from .features import FeatureGrid, FeatureSequence

__all__ = ["DepthEstimator", "TemporalEstimator", "init_from", "pool_grid"]


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (FeatureGrid, FeatureSequence)):
        return Tensor(x.values)
    return Tensor(np.asarray(x, dtype=np.float64))


def _xavier(rng: np.random.Generator, *shape) -> np.ndarray:
    fan_in, fan_out = shape[-2], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def pool_grid(x) -> Tensor:
    """Mean-pool a (rows, cols, dim) grid to a single (dim,) vector."""
    t = _as_tensor(x)
    if t.ndim == 1:
        return t
    if t.ndim != 3:
        raise ValueError(f"expected a grid or a vector, got shape {t.shape}")
    return mean(t.reshape(-1, t.shape[-1]), axis=0)


def _sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    positions = np.arange(length)[:, None]
    terms = np.exp(-np.log(10000.0) * (2 * (np.arange(dim) // 2)) / dim)
    angles = positions * terms[None, :]
    encoding = np.zeros((length, dim))
    encoding[:, 0::2] = np.sin(angles[:, 0::2])
    encoding[:, 1::2] = np.cos(angles[:, 1::2])
    return encoding


def _causal_mask(n: int) -> np.ndarray:
    mask = np.zeros((n, n))
    mask[np.triu_indices(n, k=1)] = -np.inf
    return mask


class DepthEstimator:
    """3x3 convolution (stride 1, zero padding 1) plus 1x1 projection.

    Applied per step to a feature sequence, each vector acts as a 1x1
    grid, so only the center kernel tap contributes.
    """

    def __init__(self, dim: int, out_dim: int | None = None, seed: int = 0):
        self.dim = dim
        self.out_dim = out_dim or dim
        rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {
            "conv_w": Tensor(_xavier(rng, 3 * 3 * dim, dim).reshape(3, 3, dim, dim)),
            "conv_b": Tensor(np.zeros(dim)),
            "proj_w": Tensor(_xavier(rng, dim, self.out_dim)),
            "proj_b": Tensor(np.zeros(self.out_dim)),
        }

    def __call__(self, grid) -> Tensor:
        x = _as_tensor(grid)
        if x.ndim == 1:
            x = x.reshape(1, 1, x.shape[0])
        rows, cols, _ = x.shape
        padded = pad2d(x, 1)
        conv = None
        for di in range(3):
            for dj in range(3):
                tap = self.params["conv_w"][di, dj]
                window = padded[di:di + rows, dj:dj + cols, :]
                term = window @ tap
                conv = term if conv is None else conv + term
        conv = conv + self.params["conv_b"]
        return conv @ self.params["proj_w"] + self.params["proj_b"]

    def apply_sequence(self, sequence) -> Tensor:
        """Run each step vector through the estimator as a 1x1 grid."""
        seq = _as_tensor(sequence)
        outputs = [self(seq[j]).reshape(self.out_dim) for j in range(seq.shape[0])]
        return stack(outputs)


class TemporalEstimator:
    """Autoregressive transformer predicting the next step's features.

    Position 0 holds the pooled condition; the output at position j is the
    prediction for step j+1, so predictions depend only on the condition
    and strictly earlier steps.
    """

    MAX_POSITIONS = 64

    def __init__(self, dim: int, layers: int = 2, heads: int = 4,
                 ff_mult: int = 2, seed: int = 0):
        if dim % heads != 0:
            raise ValueError(f"head count {heads} must divide dim {dim}")
        self.dim = dim
        self.layers = layers
        self.heads = heads
        self.head_dim = dim // heads
        hidden = ff_mult * dim
        rng = np.random.default_rng(seed)
        params: dict[str, Tensor] = {}
        for layer in range(layers):
            prefix = f"layer{layer}."
            for name in ("wq", "wk", "wv", "wo"):
                params[prefix + name] = Tensor(_xavier(rng, dim, dim))
                params[prefix + name.replace("w", "b")] = Tensor(np.zeros(dim))
            params[prefix + "ff_w1"] = Tensor(_xavier(rng, dim, hidden))
            params[prefix + "ff_b1"] = Tensor(np.zeros(hidden))
            params[prefix + "ff_w2"] = Tensor(_xavier(rng, hidden, dim))
            params[prefix + "ff_b2"] = Tensor(np.zeros(dim))
            params[prefix + "ln1_g"] = Tensor(np.ones(dim))
            params[prefix + "ln1_b"] = Tensor(np.zeros(dim))
            params[prefix + "ln2_g"] = Tensor(np.ones(dim))
            params[prefix + "ln2_b"] = Tensor(np.zeros(dim))
        params["ln_out_g"] = Tensor(np.ones(dim))
        params["ln_out_b"] = Tensor(np.zeros(dim))
        self.params = params
        self._positions = _sinusoidal_positions(self.MAX_POSITIONS, dim)

    def _layernorm(self, x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
        mu = mean(x, axis=-1, keepdims=True)
        centered = x - mu
        var = mean(centered * centered, axis=-1, keepdims=True)
        normed = centered * (var + eps) ** -0.5
        return normed * gamma + beta

    def _attention(self, x: Tensor, layer: int, mask: np.ndarray) -> Tensor:
        p = self.params
        prefix = f"layer{layer}."
        q = x @ p[prefix + "wq"] + p[prefix + "bq"]
        k = x @ p[prefix + "wk"] + p[prefix + "bk"]
        v = x @ p[prefix + "wv"] + p[prefix + "bv"]
        scale = 1.0 / np.sqrt(self.head_dim)
        head_outputs = []
        for h in range(self.heads):
            cols = slice(h * self.head_dim, (h + 1) * self.head_dim)
            scores = (q[:, cols] @ k[:, cols].T) * scale + Tensor(mask)
            weights = softmax(scores, axis=-1)
            head_outputs.append(weights @ v[:, cols])
        merged = concat(head_outputs, axis=-1)
        return merged @ p[prefix + "wo"] + p[prefix + "bo"]

    def forward_tokens(self, tokens: Tensor) -> Tensor:
        """Causal transformer pass over (n, dim) tokens."""
        n = tokens.shape[0]
        if n > self.MAX_POSITIONS:
            raise ValueError(f"sequence length {n} exceeds {self.MAX_POSITIONS}")
        mask = _causal_mask(n)
        h = tokens + Tensor(self._positions[:n])
        p = self.params
        for layer in range(self.layers):
            prefix = f"layer{layer}."
            attended = self._attention(
                self._layernorm(h, p[prefix + "ln1_g"], p[prefix + "ln1_b"]), layer, mask
            )
            h = h + attended
            ff_in = self._layernorm(h, p[prefix + "ln2_g"], p[prefix + "ln2_b"])
            ff = gelu(ff_in @ p[prefix + "ff_w1"] + p[prefix + "ff_b1"])
            h = h + (ff @ p[prefix + "ff_w2"] + p[prefix + "ff_b2"])
        return self._layernorm(h, p["ln_out_g"], p["ln_out_b"])

    def rollout(self, condition, steps: int, teacher=None) -> Tensor:
        """Predict ``steps`` feature vectors conditioned on one frame.

        With a teacher the pass is parallel (token j is the gold step j,
        offset by one). Without one, generation proceeds step by step via
        fixed-length forwards padded with zeros; the causal mask makes the
        padded positions irrelevant, so the final pass is bit-identical to
        a teacher-forced pass over the model's own outputs.
        """
        if steps < 1:
            raise ValueError("steps must be >= 1")
        prefix = pool_grid(condition)
        if teacher is not None:
            teach = _as_tensor(teacher)
            if teach.shape[0] < steps:
                raise ValueError(f"teacher has {teach.shape[0]} steps, need {steps}")
            tokens = stack([prefix] + [teach[j] for j in range(steps - 1)])
            return self.forward_tokens(tokens)
        zero = Tensor(np.zeros(self.dim))
        generated: list[Tensor] = []
        for step in range(steps):
            padding = [zero] * (steps - 1 - step)
            tokens = stack([prefix] + generated + padding)
            outputs = self.forward_tokens(tokens)
            generated.append(outputs[step])
        return stack(generated)


def init_from(target: TemporalEstimator, source: TemporalEstimator) -> None:
    """Copy parameters from one estimator into another, value-wise.

    Subsequent updates to either stay independent.
    """
    if set(target.params) != set(source.params):
        raise ValueError("estimators have different parameter sets")
    for name, tensor in source.params.items():
        if target.params[name].data.shape != tensor.data.shape:
            raise ValueError(f"shape mismatch for {name}")
        target.params[name].data = tensor.data.copy()
