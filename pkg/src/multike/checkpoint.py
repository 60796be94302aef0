"""Binary checkpoint format.

Layout (little-endian)::

    magic   4 bytes  b"MKE1"
    version uint32
    dim     uint32   embedding dimension d
    count   uint32   number of tensors
    then per tensor:
        name_len uint16, name utf-8
        ndim     uint8,  dims uint32 * ndim
        payload  float32 * prod(dims), row-major
"""

from __future__ import annotations

import os
import struct
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

MAGIC = b"MKE1"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


class CheckpointError(ValueError):
    pass


def save_checkpoint(tensors: Mapping[str, np.ndarray], path, dim: int) -> None:
    """Write ``tensors`` (in mapping order) to ``path``."""
    chunks = [_HEADER.pack(MAGIC, VERSION, int(dim), len(tensors))]
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_checkpoint(path, expected_shapes: Optional[Mapping[str, Tuple[int, ...]]] = None,
                    expected_dim: Optional[int] = None) -> Tuple[int, Dict[str, np.ndarray]]:
    """Read a checkpoint; returns ``(dim, tensors)`` with float64 arrays.

    When ``expected_shapes`` is given, every named tensor present in both
    must match, otherwise a :class:`CheckpointError` names the tensor.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    if expected_dim is not None and dim != expected_dim:
        raise CheckpointError(f"{path}: dimension {dim} != expected {expected_dim}")
    offset = _HEADER.size
    tensors: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", data, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            end = offset + 4 * size
            if end > len(data):
                raise CheckpointError(f"{path}: truncated payload for tensor {name!r}")
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(shape)
            offset = end
            tensors[name] = arr.astype(np.float64)
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated file") from exc
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    if expected_shapes:
        for name, shape in expected_shapes.items():
            if name in tensors and tuple(tensors[name].shape) != tuple(shape):
                raise CheckpointError(
                    f"tensor {name!r} has shape {tensors[name].shape}, expected {tuple(shape)}")
    return dim, tensors
