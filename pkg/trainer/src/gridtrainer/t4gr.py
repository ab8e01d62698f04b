"""Minimal T4GR container support: the interchange format this trainer
shares with the pipeline tooling.

Layout: magic `T4GR`, version u8 (=1), dtype u8 (0=u8, 1=f32 LE),
ndim u8, reserved u8, then ndim little-endian u32 extents, then the
row-major payload.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"T4GR"
VERSION = 1
_HEADER = struct.Struct("<4sBBBB")
_DTYPES = {0: np.dtype(np.uint8), 1: np.dtype("<f4")}
_CODES = {np.dtype(np.uint8): 0, np.dtype(np.float32): 1}


class T4grError(ValueError):
    """Malformed or unreadable tensor container."""


def to_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr, order="C")  # ascontiguousarray would promote 0-d to 1-d
    if arr.dtype not in _CODES:
        raise T4grError(f"dtype {arr.dtype} is not u8/f32")
    if any(d > 0xFFFFFFFF for d in arr.shape):
        raise T4grError(f"extent overflows u32: {arr.shape}")
    header = _HEADER.pack(MAGIC, VERSION, _CODES[arr.dtype], arr.ndim, 0)
    extents = struct.pack(f"<{arr.ndim}I", *arr.shape)
    if arr.dtype == np.float32:
        arr = arr.astype("<f4", copy=False)
    return header + extents + arr.tobytes(order="C")


def from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise T4grError(f"blob of {len(blob)} bytes is shorter than the header")
    magic, version, dtype_code, ndim, _ = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise T4grError(f"bad magic {magic!r}")
    if version != VERSION:
        raise T4grError(f"unsupported version {version}")
    if dtype_code not in _DTYPES:
        raise T4grError(f"unknown dtype code {dtype_code}")
    dtype = _DTYPES[dtype_code]
    offset = _HEADER.size + 4 * ndim
    if len(blob) < offset:
        raise T4grError("truncated extents table")
    shape = struct.unpack_from(f"<{ndim}I", blob, _HEADER.size)
    expected = offset + int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(blob) != expected:
        raise T4grError(f"payload is {len(blob) - offset} bytes, expected {expected - offset}")
    arr = np.frombuffer(blob, dtype=dtype, offset=offset).reshape(shape)
    return arr.astype(np.float32) if dtype_code == 1 else arr.copy()


def write(arr: np.ndarray, path) -> None:
    Path(path).write_bytes(to_bytes(arr))


def read(path) -> np.ndarray:
    return from_bytes(Path(path).read_bytes())


def read_movie(path) -> tuple[np.ndarray, str, tuple[int, ...]]:
    """Load a [T, C, H, W] movie plus its `.meta` sidecar (city, frame ids)."""
    frames = read(path)
    if frames.ndim != 4:
        raise T4grError(f"{path}: movie needs dims [T, C, H, W], got {frames.shape}")
    city = Path(path).stem
    frame_ids = tuple(range(frames.shape[0]))
    meta = Path(str(path) + ".meta")
    if meta.exists():
        for line in meta.read_text().splitlines():
            if "=" not in line:
                continue
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "city":
                city = value
            elif key == "frame_ids":
                frame_ids = tuple(int(v) for v in value.split())
    return frames, city, frame_ids


def read_slot_inputs(path) -> tuple[np.ndarray, tuple[str, ...]]:
    """Load test inputs [N, K, H, W] plus the `.slots` sidecar (one id/line)."""
    values = read(path)
    if values.ndim != 4:
        raise T4grError(f"{path}: inputs need dims [N, K, H, W], got {values.shape}")
    slots = tuple(f"{i:03d}" for i in range(values.shape[0]))
    sidecar = Path(str(path) + ".slots")
    if sidecar.exists():
        listed = tuple(s for s in sidecar.read_text().splitlines() if s.strip())
        if len(listed) == values.shape[0]:
            slots = listed
    return values, slots
