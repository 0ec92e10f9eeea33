# FILE: app/nn/checkpoint.py
# ============================================================================
"""Flat binary parameter checkpoints.

Layout, all integers little-endian:

    magic          8 bytes  b"QLABCKPT"
    version        uint32
    variant        uint32 length + UTF-8 bytes
    frame_index    uint64
    tensor_count   uint32
    per tensor:    uint32 name length, UTF-8 name, uint32 ndim, ndim x uint64 dims
    data           every tensor's values as float64 (<f8), in table order
"""
from pathlib import Path
from typing import Dict, NamedTuple, Union

import numpy as np

from app.exceptions import InvalidArgumentError

MAGIC = b"QLABCKPT"
VERSION = 1

_U32 = np.dtype("<u4")
_U64 = np.dtype("<u8")
_F64 = np.dtype("<f8")


class Checkpoint(NamedTuple):
    variant: str
    frame_index: int
    tensors: Dict[str, np.ndarray]


def _u32(value: int) -> bytes:
    return np.array([value], dtype=_U32).tobytes()


def _text(value: str) -> bytes:
    raw = value.encode("utf-8")
    return _u32(len(raw)) + raw


def encode_checkpoint(variant: str, frame_index: int, tensors: Dict[str, np.ndarray]) -> bytes:
    header = [MAGIC, _u32(VERSION), _text(variant)]
    header.append(np.array([frame_index], dtype=_U64).tobytes())
    header.append(_u32(len(tensors)))
    for name, value in tensors.items():
        header.append(_text(name))
        header.append(_u32(value.ndim))
        header.append(np.array(value.shape, dtype=_U64).tobytes())
    data = [np.ascontiguousarray(value, dtype=_F64).tobytes() for value in tensors.values()]
    return b"".join(header + data)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.blob):
            raise InvalidArgumentError("checkpoint is truncated")
        chunk = self.blob[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def array(self, dtype: np.dtype, count: int) -> np.ndarray:
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype)

    def u32(self) -> int:
        return int(self.array(_U32, 1)[0])

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def decode_checkpoint(blob: bytes) -> Checkpoint:
    reader = _Reader(blob)
    if reader.take(len(MAGIC)) != MAGIC:
        raise InvalidArgumentError("not a checkpoint file")
    version = reader.u32()
    if version != VERSION:
        raise InvalidArgumentError(f"unsupported checkpoint version {version}")
    variant = reader.text()
    frame_index = int(reader.array(_U64, 1)[0])
    table = []
    for _ in range(reader.u32()):
        name = reader.text()
        ndim = reader.u32()
        table.append((name, tuple(int(d) for d in reader.array(_U64, ndim))))
    tensors = {}
    for name, shape in table:
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = reader.array(_F64, count).reshape(shape).astype(float)
    if reader.offset != len(blob):
        raise InvalidArgumentError("checkpoint has trailing bytes")
    return Checkpoint(variant=variant, frame_index=frame_index, tensors=tensors)


def save_checkpoint(
    path: Union[str, Path],
    variant: str,
    frame_index: int,
    tensors: Dict[str, np.ndarray],
) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(variant, frame_index, tensors))


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())
