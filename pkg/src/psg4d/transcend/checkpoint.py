"""Sectioned binary parameter container.

Layout: 4 magic bytes, a version word, the block count, then per block a
length-prefixed UTF-8 name, the dimension count, the dimensions, and the
values as little-endian 32-bit floats. Blocks are written sorted by name
so identical parameter sets always serialize to identical bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..autodiff import Tensor

__all__ = ["MAGIC", "VERSION", "save_params", "load_params", "CheckpointError"]

MAGIC = b"P4DC"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


def _coerce(value) -> np.ndarray:
    data = value.data if isinstance(value, Tensor) else np.asarray(value)
    return np.ascontiguousarray(data, dtype="<f4")


def save_params(path: str | Path, params: dict[str, "np.ndarray | Tensor"]) -> None:
    path = Path(path)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name in sorted(params):
        encoded = name.encode("utf-8")
        block = _coerce(params[name])
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", block.ndim))
        chunks.append(struct.pack(f"<{block.ndim}I", *block.shape))
        chunks.append(block.tobytes())
    path.write_bytes(b"".join(chunks))


def load_params(path: str | Path) -> dict[str, np.ndarray]:
    """Read a container back; values come out as float64 arrays."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes")
    offset = 4
    try:
        version, count = struct.unpack_from("<II", raw, offset)
        offset += 8
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_length,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset:offset + name_length].decode("utf-8")
            offset += name_length
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            if offset + 4 * size > len(raw):
                raise CheckpointError(f"{path}: truncated container")
            block = np.frombuffer(raw, dtype="<f4", count=size, offset=offset)
            offset += 4 * size
            params[name] = block.reshape(shape).astype(np.float64)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated container") from exc
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return params
