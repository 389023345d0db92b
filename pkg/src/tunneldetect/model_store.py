"""Versioned binary persistence for trained models.

File layout (all integers little-endian):

    magic        8 bytes  b"DNSTCNN\\x01"
    version      u32
    hyperparams  6 x u32  (nf, ks, sl, d, l, hn)
    vocabulary   u32 byte length + UTF-8 literal characters (indices 2..)
    block count  u32
    per block    u8 name length + ASCII name,
                 u8 ndim + ndim x u32 dims,
                 float64 LE values
    checksum     u32 CRC-32 over all preceding bytes

Weights are stored as raw 64-bit floats so save/load round-trips are
bitwise exact. Every corruption class raises its own error type.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .network import Hyperparams, ModelParams, expected_shapes
from .tokenizer import Vocabulary

MAGIC = b"DNSTCNN\x01"
VERSION = 1


class ModelFormatError(Exception):
    """Base class for model-file problems."""


class TruncatedModelError(ModelFormatError):
    """File ends before the declared content."""


class BadMagicError(ModelFormatError):
    """File does not start with the model magic tag."""


class UnsupportedVersionError(ModelFormatError):
    """Format version is not one this reader understands."""


class ChecksumError(ModelFormatError):
    """Stored CRC-32 does not match the file contents."""


class ShapeMismatchError(ModelFormatError):
    """Declared shapes disagree with the declared hyperparameters."""


def _pack_array(name: str, arr: np.ndarray) -> bytes:
    encoded = name.encode("ascii")
    parts = [struct.pack("<B", len(encoded)), encoded, struct.pack("<B", arr.ndim)]
    parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def save(params: ModelParams, hp: Hyperparams, vocab: Vocabulary, path) -> None:
    """Write the model file; byte output is deterministic."""
    shapes = expected_shapes(hp, vocab.size)
    for name, arr in params.arrays():
        if arr.shape != shapes[name]:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shapes[name]} for these hyperparameters")

    body = [MAGIC, struct.pack("<I", VERSION)]
    body.append(struct.pack("<6I", hp.nf, hp.ks, hp.sl, hp.d, hp.l, hp.hn))
    literals = vocab.literals.encode("utf-8")
    body.append(struct.pack("<I", len(literals)))
    body.append(literals)
    blocks = list(params.arrays())
    body.append(struct.pack("<I", len(blocks)))
    for name, arr in blocks:
        body.append(_pack_array(name, arr))
    payload = b"".join(body)
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedModelError(
                f"file ends at byte {len(self.data)}, needed {self.pos + n}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def load(path) -> tuple[ModelParams, Hyperparams, Vocabulary]:
    """Read a model file back; weights are bitwise what save() wrote."""
    with open(path, "rb") as fh:
        data = fh.read()

    cur = _Cursor(data)
    if cur.take(len(MAGIC)) != MAGIC:
        raise BadMagicError(f"not a model file: bad magic in {path}")
    version = cur.u32()
    if version != VERSION:
        raise UnsupportedVersionError(f"model format version {version}, reader supports {VERSION}")

    nf, ks, sl, d, l, hn = (cur.u32() for _ in range(6))
    try:
        hp = Hyperparams(nf=nf, ks=ks, sl=sl, d=d, l=l, hn=hn)
    except ValueError as exc:
        raise ShapeMismatchError(f"invalid stored hyperparameters: {exc}") from None
    literals = cur.take(cur.u32()).decode("utf-8")
    vocab = Vocabulary(literals)

    arrays: dict[str, np.ndarray] = {}
    for _ in range(cur.u32()):
        name = cur.take(cur.u8()).decode("ascii")
        ndim = cur.u8()
        shape = tuple(cur.u32() for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        raw = cur.take(count * 8)
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)

    body_end = cur.pos
    stored = cur.u32()
    if cur.pos != len(data):
        raise TruncatedModelError(f"{len(data) - cur.pos} unexpected trailing bytes")
    if stored != zlib.crc32(data[:body_end]):
        raise ChecksumError(f"checksum mismatch in {path}")

    shapes = expected_shapes(hp, vocab.size)
    if set(arrays) != set(shapes):
        raise ShapeMismatchError(
            f"weight blocks {sorted(arrays)} do not match expected {sorted(shapes)}"
        )
    for name, want in shapes.items():
        if arrays[name].shape != want:
            raise ShapeMismatchError(
                f"{name} stored as {arrays[name].shape}, hyperparameters imply {want}"
            )

    return ModelParams(**arrays), hp, vocab
