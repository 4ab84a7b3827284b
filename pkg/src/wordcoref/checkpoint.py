"""Flat binary container of named tensors.

Layout: magic ``WLCKPT1``, u32 LE tensor count, then per tensor:
u32 LE name length, UTF-8 name, u32 LE rank, u32 LE dims, float32 LE values.
Values are stored in 32-bit for interchange; in memory everything is float64.
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"WLCKPT1"


class CheckpointError(ValueError):
    pass


def save(path, tensors):
    """Write an ordered mapping of name -> ndarray."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr)
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.astype("<f4").tobytes(order="C"))


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def load(path):
    """Read back a dict of name -> float64 ndarray."""
    path = Path(path)
    tensors = {}
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(
                f"{path}: bad magic {magic!r}, expected {MAGIC!r}"
            )
        (count,) = struct.unpack("<I", _read_exact(f, 4, "tensor count"))
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, "rank"))
            shape = tuple(
                struct.unpack("<I", _read_exact(f, 4, "dim"))[0]
                for _ in range(rank)
            )
            n_values = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = _read_exact(f, 4 * n_values, f"values of {name}")
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float64)
            tensors[name] = arr.reshape(shape)
    return tensors
