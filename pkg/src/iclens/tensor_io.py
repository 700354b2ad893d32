"""Binary tensor container (`.iclt`) used for every dense array on disk.

Layout, all little-endian:

    bytes 0..3   magic ``ICLT``
    byte  4      format version (1)
    byte  5      dtype code: 1 = float32, 2 = float16
    byte  6      rank (number of extents)
    byte  7      padding, must be 0
    next  8*rank u64 extents
    rest         row-major payload

float16 payloads are widened to float32 on load; in-memory values of an
f16 tensor are kept exactly f16-representable so write(read(b)) == b.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import BinaryIO

import numpy as np

from .errors import FormatError

MAGIC = b"ICLT"
VERSION = 1

DTYPE_CODES = {"f32": 1, "f16": 2}
CODE_DTYPES = {v: k for k, v in DTYPE_CODES.items()}
_NP_DTYPES = {"f32": np.dtype("<f4"), "f16": np.dtype("<f2")}

_MAX_ELEMENTS = 1 << 48  # refuse absurd shapes before allocating


@dataclass(frozen=True)
class Tensor:
    """Dense n-dimensional array with an explicit storage dtype.

    ``values`` is always float32 in memory; ``dtype`` records how the
    payload is stored on disk.
    """

    dtype: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.dtype not in DTYPE_CODES:
            raise FormatError(f"unsupported dtype {self.dtype!r}")
        arr = np.asarray(self.values)
        if self.dtype == "f16":
            # quantize so the f32 view is exactly what the file will hold
            arr = arr.astype(np.float16).astype(np.float32)
        else:
            arr = arr.astype(np.float32)
        # note: ascontiguousarray would promote 0-d shapes to 1-d
        object.__setattr__(self, "values", np.asarray(arr, order="C"))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def __eq__(self, other) -> bool:
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.shape == other.shape
            and np.array_equal(self.values, other.values)
        )


def write_tensor(t: Tensor, destination: BinaryIO) -> None:
    """Serialize ``t`` to a byte sink in the container layout above."""
    rank = len(t.shape)
    if rank > 255:
        raise FormatError(f"rank {rank} exceeds container limit of 255")
    if any(e < 0 for e in t.shape):
        raise FormatError(f"negative extent in shape {t.shape}")
    if int(np.prod(t.shape, dtype=object) or 1) > _MAX_ELEMENTS:
        raise FormatError(f"extent overflow: shape {t.shape}")
    header = MAGIC + bytes([VERSION, DTYPE_CODES[t.dtype], rank, 0])
    destination.write(header)
    for extent in t.shape:
        destination.write(struct.pack("<Q", extent))
    payload = t.values.astype(_NP_DTYPES[t.dtype])
    destination.write(payload.tobytes(order="C"))


def read_tensor(source: BinaryIO) -> Tensor:
    """Read one tensor from a byte stream, validating the header."""
    header = source.read(8)
    if len(header) < 8:
        raise FormatError("truncated header")
    if header[:4] != MAGIC:
        raise FormatError(f"bad magic {header[:4]!r}, expected {MAGIC!r}")
    version, dtype_code, rank, pad = header[4], header[5], header[6], header[7]
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if dtype_code not in CODE_DTYPES:
        raise FormatError(f"unknown dtype code {dtype_code}")
    if pad != 0:
        raise FormatError("nonzero padding byte")
    raw = source.read(8 * rank)
    if len(raw) < 8 * rank:
        raise FormatError("truncated extents")
    shape = struct.unpack(f"<{rank}Q", raw) if rank else ()
    n_elems = 1
    for extent in shape:
        n_elems *= extent
    if n_elems > _MAX_ELEMENTS:
        raise FormatError(f"extent overflow: shape {shape}")
    dtype = CODE_DTYPES[dtype_code]
    width = _NP_DTYPES[dtype].itemsize
    payload = source.read(n_elems * width)
    if len(payload) < n_elems * width:
        raise FormatError(
            f"truncated payload: expected {n_elems * width} bytes, got {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=_NP_DTYPES[dtype]).reshape(shape)
    return Tensor(dtype, arr.astype(np.float32))


def write_tensor_file(t: Tensor, path) -> None:
    from ._util import atomic_write_bytes
    import io

    buf = io.BytesIO()
    write_tensor(t, buf)
    atomic_write_bytes(path, buf.getvalue())


def read_tensor_file(path) -> Tensor:
    with open(path, "rb") as f:
        t = read_tensor(f)
        if f.read(1):
            raise FormatError(f"trailing bytes after tensor payload in {path}")
    return t
