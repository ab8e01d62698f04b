from dataclasses import replace

import numpy as np
import pytest
import torch

from gridtrainer.infer import infer_to_protocol, predict_one
from gridtrainer.t4gr import read as read_t4gr
from gridtrainer.train import (
    DivergenceError,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from gridtrainer.unet import build_model

from conftest import TOY, constant_batches, toy_batch


def test_overfit_single_batch(rng):
    batch = toy_batch(rng)
    cfg = replace(TOY, warmup_steps=10, learning_rate=1e-2, width_mult=1 / 8)
    result = train(constant_batches(batch), cfg, steps=200)
    assert result.losses[-1] <= 0.1 * result.losses[0]


def test_zero_target_converges(rng):
    inputs, _ = toy_batch(rng)
    zeros = np.zeros((2, TOY.out_channels, 8, 8), dtype=np.float32)
    cfg = replace(TOY, warmup_steps=20, learning_rate=3e-3)
    result = train(constant_batches((inputs, zeros)), cfg, steps=200)
    assert result.losses[-1] < 0.01 * max(result.losses[0], 1e-9)


def test_divergence_aborts_with_last_finite_loss(rng):
    batch = toy_batch(rng)
    cfg = replace(TOY, warmup_steps=0, learning_rate=1e18)
    with pytest.raises(DivergenceError) as err:
        train(constant_batches(batch), cfg, steps=200)
    assert np.isfinite(err.value.last_finite_loss)
    assert err.value.step > 0


def test_checkpoint_reload_identical_eval(tmp_path, rng):
    batch = toy_batch(rng)
    result = train(constant_batches(batch), TOY, steps=20)
    val_batches = [toy_batch(rng) for _ in range(2)]
    before = evaluate(result.model, val_batches)
    path = tmp_path / "ckpt.pt"
    save_checkpoint(result.model, path, step=20)
    reloaded = load_checkpoint(path)
    after = evaluate(reloaded, val_batches)
    assert abs(after - before) <= 1e-6 * max(abs(before), 1.0)
    assert reloaded.cfg == TOY


def test_best_validation_state_kept(rng):
    batch = toy_batch(rng)
    val = [toy_batch(rng)]
    cfg = replace(TOY, warmup_steps=10, learning_rate=3e-3)
    result = train(constant_batches(batch), cfg, steps=100, val_batches=val)
    assert result.best_val_loss is not None
    assert result.best_state is not None
    result.model.load_state_dict(result.best_state)
    assert evaluate(result.model, val) == pytest.approx(result.best_val_loss, rel=1e-6)


def test_predict_one_pads_crops_and_clips(rng):
    model = build_model(TOY, seed=0)
    window = rng.uniform(0, 255, (TOY.in_channels, 7, 5)).astype(np.float32)
    out = predict_one(model, window)  # 7x5 pads to 8x6... divisor 2 at depth 2
    assert out.shape == (TOY.out_channels, 7, 5)
    assert out.dtype == np.float32
    assert out.min() >= 0.0 and out.max() <= 255.0


def test_infer_to_protocol_files(tmp_path, rng):
    model = build_model(TOY, seed=0)
    inputs = rng.uniform(0, 255, (3, TOY.in_channels, 8, 8)).astype(np.float32)
    written = infer_to_protocol(model, inputs, ("a", "b", "c"), tmp_path / "proto")
    assert [p.name for p in written] == ["a.t4gr", "b.t4gr", "c.t4gr"]
    for i, path in enumerate(written):
        arr = read_t4gr(path)
        assert arr.shape == (TOY.out_channels, 8, 8)
        assert np.array_equal(arr, predict_one(model, inputs[i]))


def test_infer_slot_count_mismatch(tmp_path, rng):
    model = build_model(TOY, seed=0)
    inputs = rng.uniform(0, 255, (2, TOY.in_channels, 8, 8)).astype(np.float32)
    with pytest.raises(ValueError):
        infer_to_protocol(model, inputs, ("only",), tmp_path / "proto")
