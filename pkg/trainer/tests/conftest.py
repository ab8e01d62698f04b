import numpy as np
import pytest

from gridtrainer.unet import TrainConfig

TOY = TrainConfig(
    depth=2,
    width_mult=1 / 16,
    pad_to=(8, 8),
    in_channels=4,
    out_channels=4,
    batch_size=2,
    steps=10,
)


def toy_batch(rng, cfg=TOY, n=2, h=8, w=8):
    inputs = rng.uniform(0, 1, (n, cfg.in_channels, h, w)).astype(np.float32)
    targets = rng.uniform(0, 1, (n, cfg.out_channels, h, w)).astype(np.float32)
    return inputs, targets


def constant_batches(batch):
    while True:
        yield batch


@pytest.fixture
def rng():
    return np.random.default_rng(20210914)


# one "PASS/FAIL  <criterion>" line per acceptance test, echoed after the
# run so the checklist survives pytest's output capture
CHECKLIST: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CHECKLIST:
        terminalreporter.section("acceptance checklist")
        for line in CHECKLIST:
            terminalreporter.write_line(line)
