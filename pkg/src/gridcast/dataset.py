"""Sample enumeration, window extraction, and the seeded 4-fold split.

A sample is a 12-frame input window plus six target frames at 5, 10, 15,
30, 45, and 60 minutes past the window end (offsets 1, 2, 3, 6, 9, 12 in
5-minute bins). Windows that span a gap in the movie's time-bin ids are
excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .tensorio import Tensor, TrafficMovie, reshape_for_model

TARGET_OFFSETS = (1, 2, 3, 6, 9, 12)
FOLD_COUNT = 4


@dataclass(frozen=True, order=True)
class SampleIndex:
    movie_id: str
    start_frame: int


def sample_span(movie: TrafficMovie) -> int:
    """Frames one sample consumes: the input window plus the last offset."""
    return movie.spec.t_in + TARGET_OFFSETS[-1]


def enumerate_samples(movie: TrafficMovie) -> list[SampleIndex]:
    """All stride-1 start frames whose window and targets are contiguous.

    A movie shorter than the span yields an empty list, not an error.
    """
    span = sample_span(movie)
    if movie.frame_count < span:
        return []
    ids = np.asarray(movie.frame_ids, dtype=np.int64)
    # ids are strictly increasing, so a span is gap-free iff its end-to-end
    # id distance equals span - 1.
    gap_free = ids[span - 1 :] - ids[: movie.frame_count - span + 1] == span - 1
    return [
        SampleIndex(movie_id=movie.city, start_frame=int(s))
        for s in np.nonzero(gap_free)[0]
    ]


def extract_sample(movie: TrafficMovie, s: SampleIndex) -> tuple[Tensor, Tensor]:
    """One training pair: input [t_in*C, H, W] and target [t_out*C, H, W].

    Target frame k holds the movie frame at start + t_in - 1 + offset_k.
    """
    t_in = movie.spec.t_in
    span = sample_span(movie)
    start = s.start_frame
    if start < 0 or start + span > movie.frame_count:
        raise IndexError(
            f"sample start {start} out of range for {movie.frame_count}-frame movie"
        )
    ids = movie.frame_ids
    if ids[start + span - 1] - ids[start] != span - 1:
        raise IndexError(f"sample start {start} spans a frame-id gap")
    frames = movie.frames.data
    window = Tensor._adopt(frames[start : start + t_in].copy())
    target_rows = [start + t_in - 1 + off for off in TARGET_OFFSETS]
    target = Tensor._adopt(np.ascontiguousarray(frames[target_rows]))
    return reshape_for_model(window), reshape_for_model(target)


@dataclass(frozen=True)
class FoldSplit:
    """Deterministic partition of samples into FOLD_COUNT balanced folds."""

    fold_of_sample: dict[SampleIndex, int]
    seed: int
    validation_fold: int = 0

    def samples_in_fold(self, fold: int) -> list[SampleIndex]:
        return sorted(s for s, f in self.fold_of_sample.items() if f == fold)

    def training_samples(self) -> list[SampleIndex]:
        return sorted(
            s for s, f in self.fold_of_sample.items() if f != self.validation_fold
        )

    def validation_samples(self) -> list[SampleIndex]:
        return self.samples_in_fold(self.validation_fold)

    def to_text(self) -> str:
        """Audit manifest: one `movie_id start_frame fold` line per sample."""
        lines = [f"# seed = {self.seed}", f"# validation_fold = {self.validation_fold}"]
        for s in sorted(self.fold_of_sample):
            lines.append(f"{s.movie_id} {s.start_frame} {self.fold_of_sample[s]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FoldSplit":
        seed = 0
        validation_fold = 0
        fold_of_sample: dict[SampleIndex, int] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                if key.strip() == "seed":
                    seed = int(value)
                elif key.strip() == "validation_fold":
                    validation_fold = int(value)
                continue
            movie_id, start, fold = line.rsplit(None, 2)
            fold_of_sample[SampleIndex(movie_id, int(start))] = int(fold)
        return cls(fold_of_sample=fold_of_sample, seed=seed, validation_fold=validation_fold)


def make_folds(samples: list[SampleIndex], seed: int, validation_fold: int = 0) -> FoldSplit:
    """Seeded shuffle, then round-robin into FOLD_COUNT folds.

    Same (samples, seed) always produces the same map; fold sizes differ
    by at most one.
    """
    if not samples:
        raise ConfigError("cannot split an empty sample list")
    if not 0 <= validation_fold < FOLD_COUNT:
        raise ConfigError(f"validation_fold must be in [0, {FOLD_COUNT})")
    order = np.random.default_rng(seed).permutation(len(samples))
    fold_of_sample = {samples[int(idx)]: i % FOLD_COUNT for i, idx in enumerate(order)}
    if len(fold_of_sample) != len(samples):
        raise ConfigError("duplicate samples in input list")
    return FoldSplit(fold_of_sample=fold_of_sample, seed=seed, validation_fold=validation_fold)
