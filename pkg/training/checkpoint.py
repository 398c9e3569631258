"""Binary checkpoint container.

Layout (little-endian): b"SADL", u32 version, u32 tensor count, then per
tensor u16 name length, name bytes, u8 rank, rank × u32 dims, float32
payload; everything after the last tensor is UTF-8 JSON metadata.
"""
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ValidationError

from errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"SADL"
VERSION = 1
_HEADER = struct.Struct("<4sII")
_NAME_LEN = struct.Struct("<H")
_RANK = struct.Struct("<B")
_DIM = struct.Struct("<I")


class CheckpointMeta(BaseModel):
    kind: str = "pretrain"
    preset: str = "desk"
    epoch: int = 0
    seed: int = 0
    config_digest: str = ""
    extra: dict[str, float | int | str] = {}


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    meta: CheckpointMeta = field(default_factory=CheckpointMeta)

    def subset(self, prefix: str) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.tensors.items() if k.startswith(prefix)}


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, len(ckpt.tensors))]
    for name, value in ckpt.tensors.items():
        raw_name = name.encode("utf-8")
        arr = np.asarray(value, dtype="<f4")
        if len(raw_name) > 0xFFFF or arr.ndim > 0xFF:
            raise CheckpointError(f"tensor {name!r} cannot be stored (name too long or rank too high)")
        parts.append(_NAME_LEN.pack(len(raw_name)))
        parts.append(raw_name)
        parts.append(_RANK.pack(arr.ndim))
        parts.extend(_DIM.pack(d) for d in arr.shape)
        parts.append(arr.tobytes(order="C"))
    parts.append(ckpt.meta.model_dump_json().encode("utf-8"))
    return b"".join(parts)


def _take(data: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    if offset + size > len(data):
        raise CheckpointError(f"checkpoint truncated while reading {what}")
    return data[offset : offset + size], offset + size


def decode_checkpoint(data: bytes) -> Checkpoint:
    chunk, offset = _take(data, 0, _HEADER.size, "header")
    magic, version, count = _HEADER.unpack(chunk)
    if magic != MAGIC:
        raise CheckpointError(f"not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        chunk, offset = _take(data, offset, _NAME_LEN.size, "name length")
        (name_len,) = _NAME_LEN.unpack(chunk)
        chunk, offset = _take(data, offset, name_len, "name")
        name = chunk.decode("utf-8")
        chunk, offset = _take(data, offset, _RANK.size, f"{name} rank")
        (rank,) = _RANK.unpack(chunk)
        chunk, offset = _take(data, offset, _DIM.size * rank, f"{name} dims")
        shape = tuple(struct.unpack(f"<{rank}I", chunk))
        size = int(np.prod(shape, dtype=np.int64))
        chunk, offset = _take(data, offset, 4 * size, f"{name} payload")
        tensors[name] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float32)

    try:
        meta = CheckpointMeta.model_validate_json(data[offset:].decode("utf-8") or "{}")
    except (UnicodeDecodeError, ValidationError) as e:
        raise CheckpointError(f"unreadable checkpoint metadata: {e}") from None
    return Checkpoint(tensors=tensors, meta=meta)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))
    logger.debug("saved %d tensors to %s", len(ckpt.tensors), path)
    return path


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes())


def expected_size(tensors: dict[str, np.ndarray], meta_bytes: int) -> int:
    total = _HEADER.size + meta_bytes
    for name, value in tensors.items():
        total += _NAME_LEN.size + len(name.encode("utf-8")) + _RANK.size
        total += _DIM.size * np.ndim(value) + 4 * int(np.size(value))
    return total
