"""Training pairs from T4GR movies and fold manifests.

A sample is a t_in-frame window flattened to [t_in*C, H, W] plus six
target frames at offsets {1, 2, 3, 6, 9, 12} bins past the window end,
flattened to [6*C, H, W]. Windows spanning a gap in the frame-id
sequence are skipped, mirroring the pipeline tooling's contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .t4gr import T4grError, read_movie

TARGET_OFFSETS = (1, 2, 3, 6, 9, 12)


@dataclass(frozen=True)
class SampleRef:
    movie_id: str
    start_frame: int


@dataclass
class MovieStore:
    """In-memory movies keyed by id, with window extraction."""

    frames: dict[str, np.ndarray]
    frame_ids: dict[str, tuple[int, ...]]
    t_in: int

    @classmethod
    def load(cls, paths, t_in: int = 12) -> "MovieStore":
        frames = {}
        ids = {}
        for path in paths:
            movie, city, frame_ids = read_movie(path)
            frames[city] = movie
            ids[city] = frame_ids
        return cls(frames=frames, frame_ids=ids, t_in=t_in)

    @property
    def span(self) -> int:
        return self.t_in + TARGET_OFFSETS[-1]

    def enumerate_samples(self) -> list[SampleRef]:
        refs = []
        for movie_id in sorted(self.frames):
            ids = np.asarray(self.frame_ids[movie_id], dtype=np.int64)
            count = len(ids)
            for start in range(count - self.span + 1):
                if ids[start + self.span - 1] - ids[start] == self.span - 1:
                    refs.append(SampleRef(movie_id, start))
        return refs

    def extract(self, ref: SampleRef) -> tuple[np.ndarray, np.ndarray]:
        movie = self.frames[ref.movie_id]
        t, c, h, w = movie.shape
        start = ref.start_frame
        window = movie[start : start + self.t_in].reshape(self.t_in * c, h, w)
        rows = [start + self.t_in - 1 + off for off in TARGET_OFFSETS]
        target = movie[rows].reshape(len(rows) * c, h, w)
        return window.astype(np.float32), target.astype(np.float32)


def parse_fold_manifest(text: str) -> tuple[dict[SampleRef, int], int, int]:
    """`movie_id start_frame fold` lines with `# seed =` / `# validation_fold =`
    headers; returns (assignment, seed, validation_fold)."""
    seed = 0
    validation_fold = 0
    folds: dict[SampleRef, int] = {}
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
        folds[SampleRef(movie_id, int(start))] = int(fold)
    return folds, seed, validation_fold


def split_samples(
    store: MovieStore, fold_manifest_path=None
) -> tuple[list[SampleRef], list[SampleRef]]:
    """(train, validation) sample lists; no manifest means everything trains."""
    samples = store.enumerate_samples()
    if fold_manifest_path is None:
        return samples, []
    folds, _, validation_fold = parse_fold_manifest(
        Path(fold_manifest_path).read_text()
    )
    known = [s for s in samples if s in folds]
    if not known:
        raise T4grError("fold manifest covers none of the enumerated samples")
    train = [s for s in known if folds[s] != validation_fold]
    val = [s for s in known if folds[s] == validation_fold]
    return train, val


def batch_iterator(store: MovieStore, samples, batch_size: int, seed: int):
    """Endless shuffled batches: (inputs [B,K,H,W] f32, targets [B,K',H,W] f32)."""
    if not samples:
        raise T4grError("no samples to train on")
    rng = np.random.default_rng(seed)
    while True:
        order = rng.permutation(len(samples))
        for i in range(0, len(order), batch_size):
            chunk = [samples[int(j)] for j in order[i : i + batch_size]]
            pairs = [store.extract(ref) for ref in chunk]
            yield (
                np.stack([p[0] for p in pairs]),
                np.stack([p[1] for p in pairs]),
            )
