"""Flat binary container for named float64 tensors.

Layout (all little-endian): 8-byte magic, u32 tensor count, then per
tensor: u16 name length, utf-8 name, u8 ndim, u64 dims, raw float64 data
in C order. Names are written sorted so identical dicts produce identical
bytes.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"NTCK0001"


def save_tensors(path, tensors: dict) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<Q", dim))
            fh.write(arr.tobytes(order="C"))


def load_tensors(path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a tensor container")
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<Q", fh.read(8))[0] for _ in range(ndim))
            n_bytes = int(np.prod(shape, dtype=np.int64)) * 8
            data = np.frombuffer(fh.read(n_bytes), dtype="<f8")
            tensors[name] = data.reshape(shape).astype(np.float64).copy()
        return tensors
