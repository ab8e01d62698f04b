"""Manifest-driven pipeline execution.

Per city, stages run in a fixed order: mask build/union, optional domain
scaling fit, scale inputs, invoke predictors, inverse-scale predictions,
apply the road mask, ensemble, then score. Every intermediate artifact is
persisted as T4GR (written via a `.partial` temp name, renamed on
completion) and its sha256 is logged to `digests.txt`.

Cities are independent jobs; this runner executes them sequentially so a
rerun of an unchanged manifest is reproducible byte for byte.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import predictors as pr
from . import roadmap, tda
from .ensemble import ensemble
from .errors import ConfigError, GridcastError, PipelineError, ShapeError
from .evaluate import ScoreReport, format_report, report_to_json, score_run
from .manifest import CityJob, PipelineManifest
from .tensorio import (
    GridSpec,
    PredictionSet,
    Tensor,
    TrafficMovie,
    default_slots,
    read_movie,
    read_prediction_set,
    read_tensor,
    tensor_to_bytes,
)


@dataclass(frozen=True)
class InputSet:
    """Test-slot input windows: values [N, t_in*C, H, W], one row per slot."""

    spec: GridSpec
    slots: tuple[str, ...]
    values: Tensor

    def __post_init__(self):
        expected = (
            len(self.slots),
            self.spec.input_channels,
            self.spec.height,
            self.spec.width,
        )
        if self.values.dims != expected:
            raise ShapeError(f"input values dims {self.values.dims} != {expected}")


def read_input_set(path, spec: GridSpec | None = None) -> InputSet:
    """Load slot inputs; channels, t_in, and slots come from the file itself
    unless a spec pins them."""
    values = read_tensor(path)
    if len(values.dims) != 4:
        raise ConfigError(f"{path}: input set needs dims [N, K, H, W], got {values.dims}")
    n, k, h, w = values.dims
    if spec is None:
        channels = 8 if k % 8 == 0 else 2
        if k % channels:
            raise ConfigError(f"{path}: channel axis {k} fits no even channel count")
        spec = GridSpec(height=h, width=w, channels=channels, t_in=k // channels)
    slots = default_slots(n)
    sidecar = Path(str(path) + ".slots")
    if sidecar.exists():
        listed = tuple(s for s in sidecar.read_text().splitlines() if s.strip())
        if len(listed) == n:
            slots = listed
    return InputSet(spec=spec, slots=slots, values=values)


def _atomic_write(path: Path, blob: bytes) -> str:
    """Write via `<path>.partial` then rename; returns the content sha256."""
    partial = Path(str(path) + ".partial")
    partial.write_bytes(blob)
    os.replace(partial, path)
    return hashlib.sha256(blob).hexdigest()


class _Artifacts:
    """Collects artifact digests as stages complete."""

    def __init__(self, root: Path):
        self.root = root
        self.digests: dict[str, str] = {}

    def save_tensor(self, t: Tensor, relpath: str) -> None:
        path = self.root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        self.digests[relpath] = _atomic_write(path, tensor_to_bytes(t))

    def save_text(self, text: str, relpath: str) -> None:
        path = self.root / relpath
        path.parent.mkdir(parents=True, exist_ok=True)
        self.digests[relpath] = _atomic_write(path, text.encode())

    def save_prediction_set(self, ps: PredictionSet, relpath: str) -> None:
        self.save_tensor(ps.values, relpath)
        self.save_text("\n".join(ps.slots) + "\n", relpath + ".slots")

    def write_digest_log(self) -> None:
        lines = [f"{digest}  {rel}" for rel, digest in sorted(self.digests.items())]
        self.save_text("\n".join(lines) + "\n", "digests.txt")


def _inputs_as_movie(inputs: InputSet, city: str) -> TrafficMovie:
    """View slot windows as one frame stack so masks can include test data."""
    if inputs.values.dtype != "u8":
        raise ConfigError(f"{city}: mask building needs u8 test inputs")
    n, k, h, w = inputs.values.dims
    c = inputs.spec.channels
    frames = inputs.values.data.reshape(n * (k // c), c, h, w)
    return TrafficMovie(
        spec=GridSpec(height=h, width=w, channels=c, t_in=inputs.spec.t_in),
        frames=Tensor(frames),
        city=f"{city}-test-inputs",
        frame_ids=tuple(range(frames.shape[0])),
    )


def validate_manifest(m: PipelineManifest, root: Path) -> None:
    """Check every referenced path and wiring rule before any stage runs."""
    problems = []
    for city in m.cities:
        prefix = f"city {city.name}"
        if not city.predictors:
            problems.append(f"{prefix}: no predictor configured")
        if city.test is None:
            problems.append(f"{prefix}: no test input file")
        needs_train = (
            m.mask_source in ("generated", "generated_plus_test")
            or (m.tda and city.lambda_path is None)
            or any(p.kind is pr.PredictorKind.HISTORICAL_MEAN for p in city.predictors)
        )
        if needs_train and not city.train:
            problems.append(f"{prefix}: stage wiring requires train movies")
        if m.mask_source == "organizer" and city.organizer_mask is None:
            problems.append(f"{prefix}: mask_source=organizer needs organizer_mask")
        for path in city.train:
            if not (root / path).exists():
                problems.append(f"{prefix}: train movie missing: {path}")
        for label, path in (
            ("test", city.test),
            ("target", city.target),
            ("lambda", city.lambda_path),
            ("organizer_mask", city.organizer_mask),
        ):
            if path is not None and not (root / path).exists():
                problems.append(f"{prefix}: {label} file missing: {path}")
        for p in city.predictors:
            if p.kind is pr.PredictorKind.EXTERNAL and not (root / p.protocol_dir).is_dir():
                problems.append(f"{prefix}: protocol dir missing: {p.protocol_dir}")
    if problems:
        raise ConfigError("manifest validation failed:\n  " + "\n  ".join(problems))


def plan_stages(m: PipelineManifest) -> list[str]:
    """Human-readable stage plan, exactly what run_pipeline would execute."""
    plan = []
    for city in m.cities:
        c = city.name
        plan.append(f"{c}: mask [{m.mask_source}] -> {c}/mask.t4gr")
        if m.tda:
            source = city.lambda_path or "fit from train + test means"
            plan.append(f"{c}: tda_fit [{source}] -> {c}/lambda.t4gr")
            plan.append(f"{c}: tda_apply inputs -> {c}/inputs_scaled.t4gr")
        for i, p in enumerate(city.predictors):
            plan.append(f"{c}: predict [{p}] -> {c}/pred_{i}_{p.name}.t4gr")
            if m.tda:
                plan.append(f"{c}: tda_invert -> {c}/pred_{i}_{p.name}_domain.t4gr")
            plan.append(f"{c}: mask_apply -> {c}/pred_{i}_{p.name}_masked.t4gr")
        if len(city.predictors) > 1:
            plan.append(f"{c}: ensemble [{m.ensemble_agg}] -> {c}/final.t4gr")
        else:
            plan.append(f"{c}: finalize -> {c}/final.t4gr")
        if city.target is not None:
            plan.append(f"{c}: score against {city.target}")
    plan.append("write digests.txt" + (" and report.txt/report.json" if any(
        c.target is not None for c in m.cities) else ""))
    return plan


def _run_stage(city: str, stage: str, fn):
    try:
        return fn()
    except GridcastError as exc:
        raise PipelineError(f"stage {stage} ({city}): {exc}") from exc


def _run_city(
    m: PipelineManifest, city: CityJob, root: Path, artifacts: _Artifacts
) -> tuple[PredictionSet, PredictionSet | None]:
    c = city.name
    train_movies = [
        _run_stage(c, "load_train", lambda p=p: read_movie(root / p))
        for p in city.train
    ]
    spec_hint = None
    if train_movies:
        s = train_movies[0].spec
        spec_hint = GridSpec(height=s.height, width=s.width, channels=s.channels)
    inputs = _run_stage(c, "load_inputs", lambda: read_input_set(root / city.test, None))
    if spec_hint is not None:
        k = inputs.values.dims[1]
        if k % spec_hint.channels:
            raise PipelineError(
                f"stage load_inputs ({c}): input channel axis {k} does not match "
                f"train movie channels {spec_hint.channels}"
            )
        spec_hint = GridSpec(
            height=spec_hint.height,
            width=spec_hint.width,
            channels=spec_hint.channels,
            t_in=k // spec_hint.channels,
        )
        inputs = InputSet(spec=spec_hint, slots=inputs.slots, values=inputs.values)
    spec = inputs.spec

    # mask build/union
    def build():
        if m.mask_source == "organizer":
            return roadmap.import_external_mask(root / city.organizer_mask)
        mask = roadmap.build_mask(train_movies)
        if m.mask_source == "generated_plus_test":
            test_mask = roadmap.build_mask([_inputs_as_movie(inputs, c)])
            mask = roadmap.union_masks(mask, test_mask)
        return mask

    mask = _run_stage(c, "mask", build)
    artifacts.save_tensor(mask.grid, f"{c}/mask.t4gr")

    # domain scaling
    lam = None
    model_inputs = inputs
    if m.tda:
        def fit():
            if city.lambda_path is not None:
                return tda.read_lambda(root / city.lambda_path)
            m_train = tda.mean_map(train_movies, year_label="train")
            m_test = tda.mean_map([_inputs_as_movie(inputs, c)], year_label="test")
            return tda.compute_lambda(m_train, m_test)

        lam = _run_stage(c, "tda_fit", fit)
        artifacts.save_tensor(lam.values, f"{c}/lambda.t4gr")

        def scale():
            values = tda.apply_lambda(inputs.values, lam, quantize=m.quantize_u8)
            return InputSet(spec=spec, slots=inputs.slots, values=values)

        model_inputs = _run_stage(c, "tda_apply", scale)
        artifacts.save_tensor(model_inputs.values, f"{c}/inputs_scaled.t4gr")
        artifacts.save_text("\n".join(model_inputs.slots) + "\n",
                            f"{c}/inputs_scaled.t4gr.slots")

    # predictors
    finals = []
    for i, p in enumerate(city.predictors):
        tag = f"pred_{i}_{p.name}"

        def predict(p=p):
            if p.kind is pr.PredictorKind.PERSISTENCE:
                rows = [
                    pr.predict_persistence(
                        Tensor(model_inputs.values.data[j]),
                        t_out=spec.t_out,
                        channels=spec.channels,
                    ).data
                    for j in range(len(model_inputs.slots))
                ]
                return PredictionSet(
                    spec=spec, slots=model_inputs.slots, values=Tensor(np.stack(rows))
                )
            if p.kind is pr.PredictorKind.HISTORICAL_MEAN:
                mean = tda.mean_map(train_movies, year_label="train")
                frame = pr.predict_historical_mean(mean, t_out=spec.t_out)
                stack = np.broadcast_to(
                    frame.data, (len(model_inputs.slots),) + frame.dims
                ).copy()
                return PredictionSet(
                    spec=spec, slots=model_inputs.slots, values=Tensor(stack)
                )
            return pr.run_external(model_inputs.slots, root / p.protocol_dir, spec)

        ps = _run_stage(c, f"predict[{i}:{p.name}]", predict)
        artifacts.save_prediction_set(ps, f"{c}/{tag}.t4gr")
        if m.tda:
            ps = _run_stage(
                c,
                f"tda_invert[{i}:{p.name}]",
                lambda ps=ps: tda.apply_inverse_lambda(ps, lam, quantize=m.quantize_u8),
            )
            artifacts.save_prediction_set(ps, f"{c}/{tag}_domain.t4gr")
        ps = _run_stage(c, f"mask_apply[{i}:{p.name}]", lambda ps=ps: roadmap.apply_mask(ps, mask))
        artifacts.save_prediction_set(ps, f"{c}/{tag}_masked.t4gr")
        finals.append(ps)

    if len(finals) > 1:
        final = _run_stage(c, "ensemble", lambda: ensemble(finals, m.ensemble_agg))
    else:
        final = finals[0]
    artifacts.save_prediction_set(final, f"{c}/final.t4gr")

    target = None
    if city.target is not None:
        target = _run_stage(
            c, "load_target", lambda: read_prediction_set(root / city.target, spec)
        )
    return final, target


def run_pipeline(m: PipelineManifest, root=".") -> ScoreReport | None:
    """Validate, execute every city job, persist artifacts, score if targets exist.

    Returns the ScoreReport when at least one city has targets, else None.
    """
    root = Path(root)
    validate_manifest(m, root)
    out_root = root / m.output_dir
    out_root.mkdir(parents=True, exist_ok=True)
    artifacts = _Artifacts(out_root)

    finals: dict[str, PredictionSet] = {}
    targets: dict[str, PredictionSet] = {}
    for city in m.cities:
        final, target = _run_city(m, city, root, artifacts)
        finals[city.name] = final
        if target is not None:
            targets[city.name] = target

    report = None
    if targets:
        scored = {name: finals[name] for name in targets}
        report = _run_stage("*", "score", lambda: score_run(scored, targets, masked=True))
        artifacts.save_text(format_report(report), "report.txt")
        artifacts.save_text(report_to_json(report), "report.json")
    artifacts.write_digest_log()
    return report
