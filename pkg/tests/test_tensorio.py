import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridcast.errors import (
    AlignmentError,
    BadMagicError,
    DimsOverflowError,
    ShapeError,
    TensorFormatError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from gridcast.tensorio import (
    GridSpec,
    PredictionSet,
    Tensor,
    TrafficMovie,
    crop,
    default_slots,
    pad,
    quantize_u8,
    read_movie,
    read_prediction_set,
    read_tensor,
    reshape_for_model,
    tensor_from_bytes,
    tensor_to_bytes,
    unshape,
    write_movie,
    write_prediction_set,
    write_tensor,
)

from conftest import toy_spec


# ---------------------------------------------------------------------------
# Tensor type invariants
# ---------------------------------------------------------------------------


def test_tensor_rejects_nan_and_inf():
    with pytest.raises(TensorFormatError):
        Tensor(np.array([1.0, np.nan], dtype=np.float32))
    with pytest.raises(TensorFormatError):
        Tensor(np.array([np.inf], dtype=np.float32))


def test_tensor_rejects_other_dtypes():
    with pytest.raises(TensorFormatError):
        Tensor(np.zeros(3, dtype=np.int64))
    with pytest.raises(TensorFormatError):
        Tensor(np.zeros(3, dtype=np.float64))


def test_tensor_is_immutable_and_detached():
    src = np.zeros((2, 2), dtype=np.uint8)
    t = Tensor(src)
    src[0, 0] = 9
    assert t.data[0, 0] == 0
    with pytest.raises(ValueError):
        t.data[0, 0] = 1


def test_grid_spec_validation():
    spec = GridSpec()
    assert (spec.height, spec.width, spec.channels) == (495, 436, 8)
    assert (spec.t_in, spec.t_out) == (12, 6)
    assert spec.input_channels == 96 and spec.output_channels == 48
    with pytest.raises(ValueError):
        GridSpec(channels=7)
    with pytest.raises(ValueError):
        GridSpec(height=0)


def test_movie_validation():
    spec = toy_spec(h=2, w=2, c=2)
    frames = Tensor(np.zeros((3, 2, 2, 2), dtype=np.uint8))
    movie = TrafficMovie(spec=spec, frames=frames, city="a", frame_ids=(0, 1, 5))
    assert movie.frame_count == 3
    with pytest.raises(AlignmentError):
        TrafficMovie(spec=spec, frames=frames, city="a", frame_ids=(0, 1, 1))
    with pytest.raises(ShapeError):
        TrafficMovie(spec=spec, frames=frames, city="a", frame_ids=(0, 1))


def test_prediction_set_validation():
    spec = toy_spec(h=2, w=2, c=2, t_out=3)
    values = Tensor(np.zeros((2, 6, 2, 2), dtype=np.uint8))
    ps = PredictionSet(spec=spec, slots=("a", "b"), values=values)
    assert ps.slot_count == 2
    with pytest.raises(AlignmentError):
        PredictionSet(spec=spec, slots=("a", "a"), values=values)
    with pytest.raises(ShapeError):
        PredictionSet(spec=spec, slots=("a",), values=values)


# ---------------------------------------------------------------------------
# reshape / unshape
# ---------------------------------------------------------------------------


def test_reshape_canonical_dims():
    window = Tensor(np.zeros((12, 8, 495, 436), dtype=np.uint8))
    assert reshape_for_model(window).dims == (96, 495, 436)


def test_reshape_identity_case():
    window = Tensor(np.array([[[[1, 2], [3, 4]]]], dtype=np.uint8))
    out = reshape_for_model(window)
    assert out.dims == (1, 2, 2)
    assert np.array_equal(out.data, [[[1, 2], [3, 4]]])


def test_reshape_flattening_order():
    # 2x2x1x1 with flattened values [1,2,3,4]: out[t*C + c] == in[t, c]
    window = Tensor(np.array([1, 2, 3, 4], dtype=np.uint8).reshape(2, 2, 1, 1))
    out = reshape_for_model(window)
    assert out.dims == (4, 1, 1)
    assert list(out.data.ravel()) == [1, 2, 3, 4]


def test_reshape_index_formula_oracle(rng):
    t, c, h, w = 3, 4, 2, 5
    window = Tensor(rng.integers(0, 256, size=(t, c, h, w), dtype=np.uint8))
    out = reshape_for_model(window)
    for ti in range(t):
        for ci in range(c):
            for hi in range(h):
                for wi in range(w):
                    assert out.data[ti * c + ci, hi, wi] == window.data[ti, ci, hi, wi]


def test_reshape_rejects_wrong_rank():
    with pytest.raises(ShapeError) as err:
        reshape_for_model(Tensor(np.zeros((2, 2, 2), dtype=np.uint8)))
    assert "(2, 2, 2)" in str(err.value)


@settings(max_examples=50, deadline=None)
@given(
    t=st.integers(1, 4),
    c=st.integers(1, 4),
    h=st.integers(1, 4),
    w=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_reshape_unshape_round_trip(t, c, h, w, seed):
    rng = np.random.default_rng(seed)
    window = Tensor(rng.integers(0, 256, size=(t, c, h, w), dtype=np.uint8))
    assert unshape(reshape_for_model(window), t) == window
    flat = Tensor(rng.uniform(0, 1, size=(t * c, h, w)).astype(np.float32))
    assert reshape_for_model(unshape(flat, t)) == flat


# ---------------------------------------------------------------------------
# pad / crop
# ---------------------------------------------------------------------------


def test_pad_canonical_resolution():
    frame = Tensor(np.ones((495, 436), dtype=np.uint8))
    out = pad(frame, 496, 448, fill=0)
    assert out.dims == (496, 448)
    assert np.all(out.data[:495, :436] == 1)
    assert np.all(out.data[495:, :] == 0)
    assert np.all(out.data[:, 436:] == 0)


def test_pad_wide_resolution():
    frame = Tensor(np.ones((495, 436), dtype=np.uint8))
    assert pad(frame, 512, 448).dims == (512, 448)


def test_pad_noop_is_bitwise_equal():
    t = Tensor(np.arange(12, dtype=np.uint8).reshape(3, 4))
    assert pad(t, 3, 4, fill=7) == t


def test_pad_crop_inverts(rng):
    t = Tensor(rng.integers(0, 256, size=(2, 3, 5, 4), dtype=np.uint8))
    for fill in (0, 1, 255):
        padded = pad(t, 9, 6, fill=fill)
        assert crop(padded, 5, 4) == t


def test_pad_rejects_shrinking():
    t = Tensor(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ShapeError):
        pad(t, 3, 8)
    with pytest.raises(ShapeError):
        crop(t, 5, 4)


def test_quantize_u8_half_up():
    t = Tensor(np.array([0.4, 0.5, 2.5, 254.6, 300.0, -4.0], dtype=np.float32))
    assert list(quantize_u8(t).data) == [0, 1, 3, 255, 255, 0]


# ---------------------------------------------------------------------------
# T4GR container
# ---------------------------------------------------------------------------

GOLDEN_2X2 = bytes.fromhex("54344752" "01000200" "02000000" "02000000" "00ff072a")


def test_golden_bytes_u8():
    t = Tensor(np.array([[0, 255], [7, 42]], dtype=np.uint8))
    assert tensor_to_bytes(t) == GOLDEN_2X2
    assert tensor_from_bytes(GOLDEN_2X2) == t


def test_file_round_trip(tmp_path, rng):
    path = tmp_path / "t.t4gr"
    for dtype in ("u8", "f32"):
        if dtype == "u8":
            t = Tensor(rng.integers(0, 256, size=(3, 4, 5), dtype=np.uint8))
        else:
            t = Tensor(rng.normal(size=(3, 4, 5)).astype(np.float32))
        write_tensor(t, path)
        back = read_tensor(path)
        assert back == t and back.dtype == t.dtype


@settings(max_examples=60, deadline=None)
@given(
    dims=st.lists(st.integers(0, 5), min_size=0, max_size=4),
    dtype=st.sampled_from(["u8", "f32"]),
    seed=st.integers(0, 2**32 - 1),
)
def test_round_trip_property(dims, dtype, seed):
    rng = np.random.default_rng(seed)
    if dtype == "u8":
        t = Tensor(rng.integers(0, 256, size=dims, dtype=np.uint8))
    else:
        t = Tensor(rng.normal(size=dims).astype(np.float32))
    blob = tensor_to_bytes(t)
    assert tensor_from_bytes(blob) == t
    assert tensor_to_bytes(tensor_from_bytes(blob)) == blob


def test_bad_magic():
    with pytest.raises(BadMagicError):
        tensor_from_bytes(b"XXXX" + GOLDEN_2X2[4:])


def test_version_mismatch():
    blob = bytearray(GOLDEN_2X2)
    blob[4] = 2
    with pytest.raises(VersionMismatchError):
        tensor_from_bytes(bytes(blob))


def test_truncations():
    with pytest.raises(TruncatedPayloadError):
        tensor_from_bytes(b"T4")
    with pytest.raises(TruncatedPayloadError):
        tensor_from_bytes(GOLDEN_2X2[:6])
    with pytest.raises(TruncatedPayloadError):
        tensor_from_bytes(GOLDEN_2X2[:10])  # inside extents table
    with pytest.raises(TruncatedPayloadError):
        tensor_from_bytes(GOLDEN_2X2[:-1])  # inside payload


def test_trailing_garbage():
    with pytest.raises(TensorFormatError):
        tensor_from_bytes(GOLDEN_2X2 + b"\x00")


def test_unknown_dtype_code():
    blob = bytearray(GOLDEN_2X2)
    blob[5] = 9
    with pytest.raises(TensorFormatError):
        tensor_from_bytes(bytes(blob))


def test_dims_overflow_on_write():
    t = Tensor(np.zeros((2**32, 0), dtype=np.uint8))
    with pytest.raises(DimsOverflowError):
        tensor_to_bytes(t)


def test_non_finite_payload_rejected():
    good = tensor_to_bytes(Tensor(np.zeros(1, dtype=np.float32)))
    bad = good[:-4] + np.float32(np.nan).tobytes()
    with pytest.raises(TensorFormatError):
        tensor_from_bytes(bad)


def test_ops_do_not_mutate_inputs(rng):
    t = Tensor(rng.integers(0, 256, size=(2, 3, 4, 4), dtype=np.uint8))
    before = t.digest()
    reshape_for_model(t)
    pad(t, 6, 6)
    crop(t, 2, 2)
    tensor_to_bytes(t)
    assert t.digest() == before


# ---------------------------------------------------------------------------
# sidecar files
# ---------------------------------------------------------------------------


def test_movie_file_round_trip(tmp_path, rng):
    arr = rng.integers(0, 256, size=(4, 2, 3, 3), dtype=np.uint8)
    spec = toy_spec(h=3, w=3, c=2)
    movie = TrafficMovie(
        spec=spec, frames=Tensor(arr), city="berlin", frame_ids=(0, 1, 2, 7)
    )
    path = tmp_path / "m.t4gr"
    write_movie(movie, path)
    back = read_movie(path, spec)
    assert back.city == "berlin"
    assert back.frame_ids == (0, 1, 2, 7)
    assert back.frames == movie.frames


def test_movie_without_sidecar(tmp_path):
    path = tmp_path / "melbourne.t4gr"
    write_tensor(Tensor(np.zeros((2, 2, 3, 3), dtype=np.uint8)), path)
    movie = read_movie(path)
    assert movie.city == "melbourne"
    assert movie.frame_ids == (0, 1)


def test_prediction_set_round_trip(tmp_path, rng):
    spec = toy_spec(h=3, w=3, c=2, t_out=2)
    values = Tensor(rng.integers(0, 256, size=(2, 4, 3, 3), dtype=np.uint8))
    ps = PredictionSet(spec=spec, slots=("s1", "s2"), values=values)
    path = tmp_path / "p.t4gr"
    write_prediction_set(ps, path)
    back = read_prediction_set(path, spec)
    assert back.slots == ("s1", "s2")
    assert back.values == values


def test_prediction_set_default_slots(tmp_path):
    path = tmp_path / "p.t4gr"
    write_tensor(Tensor(np.zeros((2, 48, 3, 3), dtype=np.uint8)), path)
    ps = read_prediction_set(path)
    assert ps.slots == ("000", "001")
    assert default_slots(2) == ("000", "001")


def test_read_movie_rejects_garbage_frame_ids(tmp_path):
    path = tmp_path / "m.t4gr"
    write_tensor(Tensor(np.zeros((2, 2, 3, 3), dtype=np.uint8)), path)
    (tmp_path / "m.t4gr.meta").write_text("frame_ids = 0 oops\n")
    with pytest.raises(TensorFormatError):
        read_movie(path)


def test_read_prediction_set_rejects_odd_channel_inference(tmp_path):
    # 6 total channels would mean 1 channel per frame; channels come in pairs
    path = tmp_path / "p.t4gr"
    write_tensor(Tensor(np.zeros((2, 6, 3, 3), dtype=np.uint8)), path)
    with pytest.raises(TensorFormatError):
        read_prediction_set(path)


def test_read_prediction_set_pinned_spec_mismatch_is_shape_error(tmp_path):
    path = tmp_path / "p.t4gr"
    write_tensor(Tensor(np.zeros((2, 12, 3, 3), dtype=np.uint8)), path)
    with pytest.raises(ShapeError):
        read_prediction_set(path, toy_spec(h=4, w=4, c=2))
