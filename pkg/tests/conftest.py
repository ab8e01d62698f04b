import numpy as np
import pytest

from gridcast.tensorio import (
    GridSpec,
    PredictionSet,
    Tensor,
    TrafficMovie,
    default_slots,
)


def toy_spec(h=8, w=8, c=8, t_in=12, t_out=6) -> GridSpec:
    return GridSpec(height=h, width=w, channels=c, t_in=t_in, t_out=t_out)


def movie_from_array(arr, city="toy", spec=None, frame_ids=None) -> TrafficMovie:
    arr = np.asarray(arr, dtype=np.uint8)
    t, c, h, w = arr.shape
    if spec is None:
        spec = GridSpec(height=h, width=w, channels=c)
    if frame_ids is None:
        frame_ids = tuple(range(t))
    return TrafficMovie(spec=spec, frames=Tensor(arr), city=city, frame_ids=frame_ids)


def random_movie(rng, spec, frames, city="toy", frame_ids=None) -> TrafficMovie:
    arr = rng.integers(
        0, 256, size=(frames, spec.channels, spec.height, spec.width), dtype=np.uint8
    )
    return movie_from_array(arr, city=city, spec=spec, frame_ids=frame_ids)


def random_prediction_set(rng, spec, n, dtype="f32", slots=None) -> PredictionSet:
    shape = (n, spec.output_channels, spec.height, spec.width)
    if dtype == "u8":
        values = Tensor(rng.integers(0, 256, size=shape, dtype=np.uint8))
    else:
        values = Tensor(rng.uniform(0, 255, size=shape).astype(np.float32))
    return PredictionSet(
        spec=spec, slots=slots if slots is not None else default_slots(n), values=values
    )


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
