"""Canonical tensor types and the bit-exact T4GR container format.

Every artifact the pipeline persists (movies, masks, lambda maps,
prediction sets) is a T4GR file:

    magic   4 bytes  b"T4GR"
    version u8       1
    dtype   u8       0 = u8, 1 = f32 (little-endian IEEE-754)
    ndim    u8
    reserved u8      written as 0, ignored on read
    extents ndim x u32 little-endian
    payload row-major element bytes

Movies and prediction sets carry a small plain-text sidecar next to the
tensor file (frame ids / slot ids); the tensor payload itself stays
bit-exact and self-contained.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    AlignmentError,
    DimsOverflowError,
    ShapeError,
    TensorFormatError,
    TruncatedPayloadError,
    VersionMismatchError,
)

MAGIC = b"T4GR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sBBBB")
_MAX_EXTENT = 0xFFFF_FFFF

_DTYPE_CODE = {"u8": 0, "f32": 1}
_CODE_DTYPE = {code: name for name, code in _DTYPE_CODE.items()}
_NP_DTYPE = {"u8": np.dtype(np.uint8), "f32": np.dtype("<f4")}


@dataclass(frozen=True, eq=False)
class Tensor:
    """Immutable row-major array restricted to u8 or f32 elements.

    The wrapped buffer is always a private, C-contiguous, read-only copy;
    f32 payloads must be finite (NaN/Inf are rejected at construction).
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype == np.uint8:
            pass
        elif arr.dtype == np.float32:
            if not np.all(np.isfinite(arr)):
                raise TensorFormatError("f32 tensor must be finite (no NaN/Inf)")
        else:
            raise TensorFormatError(
                f"unsupported dtype {arr.dtype}; pass uint8 or float32 explicitly"
            )
        arr = arr.copy(order="C")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def _adopt(cls, arr: np.ndarray) -> "Tensor":
        # Fast path for freshly computed arrays we own outright. Caller
        # guarantees dtype is uint8/float32, C order, and finiteness.
        obj = object.__new__(cls)
        arr.flags.writeable = False
        object.__setattr__(obj, "data", arr)
        return obj

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> str:
        return "u8" if self.data.dtype == np.uint8 else "f32"

    @property
    def size(self) -> int:
        return int(self.data.size)

    def digest(self) -> str:
        """sha256 over dtype, dims, and payload; stable identity for audits."""
        h = hashlib.sha256()
        h.update(self.dtype.encode())
        h.update(repr(self.dims).encode())
        h.update(self.data.tobytes(order="C"))
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (
            self.dtype == other.dtype
            and self.dims == other.dims
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"Tensor(dims={self.dims}, dtype={self.dtype})"


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry and window lengths for one city's traffic raster."""

    height: int = 495
    width: int = 436
    channels: int = 8
    t_in: int = 12
    t_out: int = 6

    def __post_init__(self):
        for name in ("height", "width", "channels", "t_in", "t_out"):
            if getattr(self, name) < 1:
                raise ValueError(f"GridSpec.{name} must be >= 1")
        if self.channels % 2:
            raise ValueError("GridSpec.channels must be even (volume/speed pairs)")

    @property
    def input_channels(self) -> int:
        return self.t_in * self.channels

    @property
    def output_channels(self) -> int:
        return self.t_out * self.channels


CANONICAL_SPEC = GridSpec()


@dataclass(frozen=True, eq=True)
class TrafficMovie:
    """One city's frame sequence: [T, C, H, W] u8 plus time-bin indices."""

    spec: GridSpec
    frames: Tensor
    city: str
    frame_ids: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "frame_ids", tuple(int(i) for i in self.frame_ids))
        if self.frames.dtype != "u8":
            raise TensorFormatError("movie frames must be u8")
        expected = (
            len(self.frame_ids),
            self.spec.channels,
            self.spec.height,
            self.spec.width,
        )
        if self.frames.dims != expected:
            raise ShapeError(
                f"movie frames dims {self.frames.dims} != expected {expected}"
            )
        if any(b <= a for a, b in zip(self.frame_ids, self.frame_ids[1:])):
            raise AlignmentError("frame_ids must be strictly increasing")

    @property
    def frame_count(self) -> int:
        return len(self.frame_ids)


def default_slots(n: int) -> tuple[str, ...]:
    """Zero-padded positional slot ids: '000', '001', ..."""
    width = max(3, len(str(max(n - 1, 0))))
    return tuple(str(i).zfill(width) for i in range(n))


@dataclass(frozen=True, eq=True)
class PredictionSet:
    """Model outputs for N test slots: values [N, t_out*C, H, W], u8 or f32."""

    spec: GridSpec
    slots: tuple[str, ...]
    values: Tensor

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(str(s) for s in self.slots))
        if len(set(self.slots)) != len(self.slots):
            raise AlignmentError("slot identifiers must be unique")
        expected = (
            len(self.slots),
            self.spec.output_channels,
            self.spec.height,
            self.spec.width,
        )
        if self.values.dims != expected:
            raise ShapeError(
                f"prediction values dims {self.values.dims} != expected {expected}"
            )

    @property
    def slot_count(self) -> int:
        return len(self.slots)


# ---------------------------------------------------------------------------
# shape transforms
# ---------------------------------------------------------------------------


def reshape_for_model(window: Tensor) -> Tensor:
    """Collapse a [T, C, H, W] window into the model layout [T*C, H, W].

    Output element (t*C + c, h, w) equals input element (t, c, h, w);
    `unshape` inverts it exactly.
    """
    if len(window.dims) != 4:
        raise ShapeError(f"expected dims [T, C, H, W], got {window.dims}")
    t, c, h, w = window.dims
    return Tensor._adopt(window.data.reshape(t * c, h, w).copy())


def unshape(t: Tensor, frames: int) -> Tensor:
    """Inverse of `reshape_for_model`: split [K, H, W] into [frames, K/frames, H, W]."""
    if len(t.dims) != 3:
        raise ShapeError(f"expected dims [K, H, W], got {t.dims}")
    k, h, w = t.dims
    if frames < 1 or k % frames:
        raise ShapeError(f"channel axis {k} does not split into {frames} frames")
    return Tensor._adopt(t.data.reshape(frames, k // frames, h, w).copy())


def pad(t: Tensor, target_h: int, target_w: int, fill: int | float = 0) -> Tensor:
    """Grow the last two axes to target_h x target_w; content stays top-left."""
    if len(t.dims) < 2:
        raise ShapeError(f"need at least 2 dims to pad, got {t.dims}")
    h, w = t.dims[-2:]
    if target_h < h or target_w < w:
        raise ShapeError(
            f"pad target {target_h}x{target_w} smaller than source {h}x{w}"
        )
    widths = [(0, 0)] * (len(t.dims) - 2) + [(0, target_h - h), (0, target_w - w)]
    arr = np.pad(t.data, widths, constant_values=fill)
    return Tensor._adopt(np.ascontiguousarray(arr))


def crop(t: Tensor, height: int, width: int) -> Tensor:
    """Take the top-left height x width corner of the last two axes."""
    if len(t.dims) < 2:
        raise ShapeError(f"need at least 2 dims to crop, got {t.dims}")
    h, w = t.dims[-2:]
    if height > h or width > w:
        raise ShapeError(f"crop {height}x{width} larger than source {h}x{w}")
    arr = t.data[..., :height, :width]
    return Tensor._adopt(np.ascontiguousarray(arr))


def quantize_u8(t: Tensor) -> Tensor:
    """Clip to [0, 255] then round half-up to u8 (the one rounding rule)."""
    if t.dtype == "u8":
        return t
    # +0.5 in f64 is exact for any f32 input, so floor() implements a true
    # half-up rule with no spurious carries at .5 boundaries.
    arr = np.clip(t.data.astype(np.float64), 0.0, 255.0)
    return Tensor._adopt(np.floor(arr + 0.5).astype(np.uint8))


# ---------------------------------------------------------------------------
# T4GR container
# ---------------------------------------------------------------------------


def tensor_to_bytes(t: Tensor) -> bytes:
    """Serialize to the T4GR wire format."""
    dims = t.dims
    if len(dims) > 0xFF:
        raise DimsOverflowError(f"ndim {len(dims)} exceeds the u8 field")
    for d in dims:
        if d > _MAX_EXTENT:
            raise DimsOverflowError(f"extent {d} exceeds the u32 field")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, _DTYPE_CODE[t.dtype], len(dims), 0)
    extents = struct.pack(f"<{len(dims)}I", *dims)
    payload = np.ascontiguousarray(t.data, dtype=_NP_DTYPE[t.dtype]).tobytes()
    return header + extents + payload


def tensor_from_bytes(blob: bytes) -> Tensor:
    """Parse the T4GR wire format; raises a distinct error per defect."""
    if len(blob) < 4:
        raise TruncatedPayloadError(f"file is {len(blob)} bytes, shorter than the magic")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < _HEADER.size:
        raise TruncatedPayloadError("file ends inside the fixed header")
    _, version, dtype_code, ndim, _reserved = _HEADER.unpack_from(blob)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"version {version}, reader supports {FORMAT_VERSION}")
    if dtype_code not in _CODE_DTYPE:
        raise TensorFormatError(f"unknown dtype code {dtype_code}")
    dtype = _CODE_DTYPE[dtype_code]
    offset = _HEADER.size + 4 * ndim
    if len(blob) < offset:
        raise TruncatedPayloadError("file ends inside the extents table")
    dims = struct.unpack_from(f"<{ndim}I", blob, _HEADER.size)
    count = 1
    for d in dims:
        count *= d
    expected = offset + count * _NP_DTYPE[dtype].itemsize
    if len(blob) < expected:
        raise TruncatedPayloadError(
            f"payload truncated: have {len(blob) - offset} bytes, need {expected - offset}"
        )
    if len(blob) > expected:
        raise TensorFormatError(f"{len(blob) - expected} trailing bytes after payload")
    arr = np.frombuffer(blob, dtype=_NP_DTYPE[dtype], count=count, offset=offset)
    arr = arr.reshape(dims)
    try:
        return Tensor(arr)
    except ValueError as exc:  # non-finite f32 payload
        raise TensorFormatError(str(exc)) from exc


def write_tensor(t: Tensor, path) -> None:
    Path(path).write_bytes(tensor_to_bytes(t))


def read_tensor(path) -> Tensor:
    return tensor_from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# movie / prediction-set files (tensor + text sidecar)
# ---------------------------------------------------------------------------


def _sidecar(path, kind: str) -> Path:
    return Path(str(path) + "." + kind)


def write_movie(movie: TrafficMovie, path) -> None:
    """Persist frames as T4GR plus a `<path>.meta` sidecar (city, frame ids)."""
    write_tensor(movie.frames, path)
    lines = [
        f"city = {movie.city}",
        "frame_ids = " + " ".join(str(i) for i in movie.frame_ids),
        "",
    ]
    _sidecar(path, "meta").write_text("\n".join(lines))


def read_movie(path, spec: GridSpec | None = None) -> TrafficMovie:
    """Load a movie; missing sidecar means contiguous ids and filename city."""
    frames = read_tensor(path)
    if len(frames.dims) != 4:
        raise TensorFormatError(f"{path}: movie needs dims [T, C, H, W], got {frames.dims}")
    t, c, h, w = frames.dims
    if spec is None:
        spec = GridSpec(height=h, width=w, channels=c)
    city = Path(path).stem
    frame_ids = tuple(range(t))
    meta = _sidecar(path, "meta")
    if meta.exists():
        for line in meta.read_text().splitlines():
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "city":
                city = value
            elif key == "frame_ids":
                try:
                    frame_ids = tuple(int(v) for v in value.split())
                except ValueError:
                    raise TensorFormatError(
                        f"{meta}: frame_ids must be integers, got {value!r}"
                    ) from None
    return TrafficMovie(spec=spec, frames=frames, city=city, frame_ids=frame_ids)


def write_prediction_set(ps: PredictionSet, path) -> None:
    """Persist values as T4GR plus a `<path>.slots` sidecar (one id per line)."""
    write_tensor(ps.values, path)
    _sidecar(path, "slots").write_text("\n".join(ps.slots) + "\n")


def read_prediction_set(path, spec: GridSpec | None = None) -> PredictionSet:
    """Load a prediction set; missing sidecar means positional slot ids."""
    values = read_tensor(path)
    if len(values.dims) != 4:
        raise TensorFormatError(
            f"{path}: prediction set needs dims [N, K, H, W], got {values.dims}"
        )
    n, k, h, w = values.dims
    if spec is None:
        if k % 6 or (k // 6) % 2:
            raise TensorFormatError(
                f"{path}: channel axis {k} is not 6 output frames of even channels"
            )
        spec = GridSpec(height=h, width=w, channels=k // 6)
    slots = default_slots(n)
    sidecar = _sidecar(path, "slots")
    if sidecar.exists():
        listed = tuple(s for s in sidecar.read_text().splitlines() if s.strip())
        if len(listed) != n:
            raise TensorFormatError(
                f"{path}: sidecar lists {len(listed)} slots for {n} rows"
            )
        slots = listed
    return PredictionSet(spec=spec, slots=slots, values=values)
