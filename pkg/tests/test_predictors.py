import numpy as np
import pytest

from gridcast.errors import (
    AlignmentError,
    ConfigError,
    ProtocolError,
    ShapeError,
    TensorFormatError,
)
from gridcast.predictors import (
    PredictorKind,
    PredictorSpec,
    build_pseudo_labels,
    predict_historical_mean,
    predict_persistence,
    protocol_path,
    run_external,
)
from gridcast.tda import MeanMap
from gridcast.tensorio import Tensor, write_tensor

from conftest import random_prediction_set, toy_spec


# ---------------------------------------------------------------------------
# predictor specs
# ---------------------------------------------------------------------------


def test_spec_parse_round_trip():
    for text in ("persistence", "historical_mean", "external:/tmp/preds"):
        spec = PredictorSpec.parse(text)
        assert str(spec) == text
    assert PredictorSpec.parse("persistence").kind is PredictorKind.PERSISTENCE
    assert PredictorSpec.parse("external: /x ").protocol_dir == "/x"


def test_spec_parse_rejects_unknown():
    with pytest.raises(ConfigError):
        PredictorSpec.parse("oracle")


def test_spec_protocol_dir_rules():
    with pytest.raises(ConfigError):
        PredictorSpec(kind=PredictorKind.EXTERNAL)
    with pytest.raises(ConfigError):
        PredictorSpec(kind=PredictorKind.PERSISTENCE, protocol_dir="/x")


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def test_persistence_repeats_last_frame(rng):
    c, h, w = 2, 3, 3
    inputs = Tensor(rng.integers(0, 256, size=(8, h, w), dtype=np.uint8))
    out = predict_persistence(inputs, t_out=4, channels=c)
    assert out.dims == (4 * c, h, w)
    last = inputs.data[-c:]
    for k in range(4):
        assert np.array_equal(out.data[k * c : (k + 1) * c], last)


def test_persistence_preserves_dtype(rng):
    inputs = Tensor(rng.uniform(0, 255, (4, 2, 2)).astype(np.float32))
    assert predict_persistence(inputs, t_out=2, channels=2).dtype == "f32"


def test_persistence_shape_errors():
    with pytest.raises(ShapeError):
        predict_persistence(Tensor(np.zeros((3, 2, 2), dtype=np.uint8)), channels=2)
    with pytest.raises(ShapeError):
        predict_persistence(Tensor(np.zeros((4, 2), dtype=np.uint8)), channels=2)


# ---------------------------------------------------------------------------
# historical mean
# ---------------------------------------------------------------------------


def test_historical_mean_tiles_climatology():
    mean = MeanMap(
        values=Tensor(np.array([[[1.4]], [[2.6]]], dtype=np.float32)),
        frame_count=10,
        year_label="2019",
    )
    out = predict_historical_mean(mean, t_out=3)
    assert out.dims == (6, 1, 1)
    assert out.dtype == "f32"
    assert list(out.data.ravel()) == pytest.approx([1.4, 2.6] * 3)
    q = predict_historical_mean(mean, t_out=3, quantize=True)
    assert q.dtype == "u8"
    assert list(q.data.ravel()) == [1, 3] * 3


# ---------------------------------------------------------------------------
# external protocol
# ---------------------------------------------------------------------------


def write_protocol_files(tmp_path, spec, preds):
    for slot, arr in preds.items():
        write_tensor(Tensor(arr), protocol_path(tmp_path, slot))


def test_run_external_assembles_in_slot_order(tmp_path, rng):
    spec = toy_spec(h=3, w=3, c=2, t_out=2)
    shape = (spec.output_channels, 3, 3)
    preds = {s: rng.integers(0, 256, size=shape, dtype=np.uint8) for s in ("b", "a")}
    write_protocol_files(tmp_path, spec, preds)
    out = run_external(["a", "b"], tmp_path, spec)
    assert out.slots == ("a", "b")
    assert np.array_equal(out.values.data[0], preds["a"])
    assert np.array_equal(out.values.data[1], preds["b"])
    assert out.values.dtype == "u8"


def test_run_external_ignores_unrelated_files(tmp_path, rng):
    spec = toy_spec(h=2, w=2, c=2, t_out=1)
    shape = (spec.output_channels, 2, 2)
    write_protocol_files(tmp_path, spec, {"a": np.zeros(shape, dtype=np.uint8)})
    (tmp_path / "notes.txt").write_text("scratch\n")
    (tmp_path / "zz.t4gr").write_bytes(b"junk")
    out = run_external(["a"], tmp_path, spec)
    assert out.slots == ("a",)


def test_run_external_missing_slots_lists_them(tmp_path, rng):
    spec = toy_spec(h=2, w=2, c=2, t_out=1)
    shape = (spec.output_channels, 2, 2)
    write_protocol_files(tmp_path, spec, {"b": np.zeros(shape, dtype=np.uint8)})
    with pytest.raises(ProtocolError) as err:
        run_external(["a", "b", "c"], tmp_path, spec)
    msg = str(err.value)
    assert "a" in msg and "c" in msg and " b" not in msg.replace("slots: ", " ")


def test_run_external_wrong_dims_names_file(tmp_path):
    spec = toy_spec(h=2, w=2, c=2, t_out=1)
    write_protocol_files(tmp_path, spec, {"a": np.zeros((2, 3, 2), dtype=np.uint8)})
    with pytest.raises(TensorFormatError) as err:
        run_external(["a"], tmp_path, spec)
    assert "a.t4gr" in str(err.value)


def test_run_external_mixed_dtypes_widen(tmp_path, rng):
    spec = toy_spec(h=2, w=2, c=2, t_out=1)
    shape = (spec.output_channels, 2, 2)
    write_protocol_files(
        tmp_path,
        spec,
        {
            "a": rng.integers(0, 256, size=shape, dtype=np.uint8),
            "b": rng.uniform(0, 255, shape).astype(np.float32),
        },
    )
    out = run_external(["a", "b"], tmp_path, spec)
    assert out.values.dtype == "f32"


# ---------------------------------------------------------------------------
# pseudo-labels
# ---------------------------------------------------------------------------


def test_build_pseudo_labels_quantizes_targets(rng):
    spec = toy_spec(h=2, w=2, c=2, t_out=2)
    preds = random_prediction_set(rng, spec, n=2, dtype="f32", slots=("a", "b"))
    windows = [
        (s, Tensor(rng.integers(0, 256, size=(spec.input_channels, 2, 2), dtype=np.uint8)))
        for s in ("a", "b")
    ]
    labels = build_pseudo_labels(windows, preds, source_model="unet-v1")
    assert labels.source_model == "unet-v1"
    assert len(labels.pairs) == 2
    for (slot, window), (inp, target) in zip(windows, labels.pairs):
        assert inp == window
        assert target.dtype == "u8"
    expect = np.clip(preds.values.data, 0, 255)
    expect = np.floor(expect.astype(np.float64) + 0.5).astype(np.uint8)
    assert np.array_equal(labels.pairs[0][1].data, expect[0])


def test_build_pseudo_labels_slot_mismatch(rng):
    spec = toy_spec(h=2, w=2, c=2, t_out=2)
    preds = random_prediction_set(rng, spec, n=2, dtype="u8", slots=("a", "b"))
    windows = [
        (s, Tensor(np.zeros((spec.input_channels, 2, 2), dtype=np.uint8)))
        for s in ("b", "a")
    ]
    with pytest.raises(AlignmentError):
        build_pseudo_labels(windows, preds)
