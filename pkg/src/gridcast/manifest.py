"""Declarative run description: a diff-friendly `key = value` text format
with `[section]` headers, one `[city <name>]` section per city.

Example:

    [pipeline]
    output_dir = out
    seed = 7
    tda = on
    quantize_u8 = off
    mask_source = generated_plus_test
    ensemble = mean

    [city berlin]
    train = berlin_train.t4gr
    test = berlin_test_inputs.t4gr
    target = berlin_targets.t4gr
    predictor = persistence

Serialization round-trips losslessly: parse(serialize(m)) == m.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError
from .predictors import PredictorSpec

MASK_SOURCES = ("generated", "generated_plus_test", "organizer")
ENSEMBLE_AGGREGATORS = ("mean", "median")


@dataclass(frozen=True, eq=True)
class CityJob:
    """Inputs and predictor wiring for one city."""

    name: str
    train: tuple[str, ...] = ()
    test: str | None = None
    target: str | None = None
    predictors: tuple[PredictorSpec, ...] = ()
    lambda_path: str | None = None
    organizer_mask: str | None = None


@dataclass(frozen=True, eq=True)
class PipelineManifest:
    output_dir: str
    cities: tuple[CityJob, ...]
    seed: int = 0
    tda: bool = False
    quantize_u8: bool = False
    mask_source: str = "generated"
    ensemble_agg: str = "mean"

    def __post_init__(self):
        if self.mask_source not in MASK_SOURCES:
            raise ConfigError(
                f"mask_source {self.mask_source!r} not in {MASK_SOURCES}"
            )
        if self.ensemble_agg not in ENSEMBLE_AGGREGATORS:
            raise ConfigError(
                f"ensemble {self.ensemble_agg!r} not in {ENSEMBLE_AGGREGATORS}"
            )
        if not self.cities:
            raise ConfigError("manifest lists no cities")
        names = [c.name for c in self.cities]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate city sections")


def _flag(value: bool) -> str:
    return "on" if value else "off"


def _parse_flag(value: str, key: str) -> bool:
    if value == "on":
        return True
    if value == "off":
        return False
    raise ConfigError(f"{key} must be 'on' or 'off', got {value!r}")


def serialize_manifest(m: PipelineManifest) -> str:
    lines = [
        "[pipeline]",
        f"output_dir = {m.output_dir}",
        f"seed = {m.seed}",
        f"tda = {_flag(m.tda)}",
        f"quantize_u8 = {_flag(m.quantize_u8)}",
        f"mask_source = {m.mask_source}",
        f"ensemble = {m.ensemble_agg}",
    ]
    for city in m.cities:
        lines.append("")
        lines.append(f"[city {city.name}]")
        for path in city.train:
            lines.append(f"train = {path}")
        if city.test is not None:
            lines.append(f"test = {city.test}")
        if city.target is not None:
            lines.append(f"target = {city.target}")
        for spec in city.predictors:
            lines.append(f"predictor = {spec}")
        if city.lambda_path is not None:
            lines.append(f"lambda = {city.lambda_path}")
        if city.organizer_mask is not None:
            lines.append(f"organizer_mask = {city.organizer_mask}")
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> PipelineManifest:
    pipeline: dict[str, str] = {}
    cities: list[dict] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            header = line[1:-1].strip()
            if header == "pipeline":
                section = pipeline
            elif header.startswith("city "):
                name = header[len("city ") :].strip()
                if not name:
                    raise ConfigError(f"line {lineno}: city section needs a name")
                cities.append(
                    {
                        "name": name,
                        "train": [],
                        "test": None,
                        "target": None,
                        "predictors": [],
                        "lambda": None,
                        "organizer_mask": None,
                    }
                )
                section = cities[-1]
            else:
                raise ConfigError(f"line {lineno}: unknown section [{header}]")
            continue
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any section")
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if section is pipeline:
            if key not in (
                "output_dir",
                "seed",
                "tda",
                "quantize_u8",
                "mask_source",
                "ensemble",
            ):
                raise ConfigError(f"line {lineno}: unknown pipeline key {key!r}")
            if key in pipeline:
                raise ConfigError(f"line {lineno}: duplicate pipeline key {key!r}")
            pipeline[key] = value
        else:
            if key == "train":
                section["train"].append(value)
            elif key == "predictor":
                section["predictors"].append(PredictorSpec.parse(value))
            elif key in ("test", "target", "lambda", "organizer_mask"):
                if section[key] is not None:
                    raise ConfigError(f"line {lineno}: duplicate city key {key!r}")
                section[key] = value
            else:
                raise ConfigError(f"line {lineno}: unknown city key {key!r}")
    if "output_dir" not in pipeline:
        raise ConfigError("manifest is missing pipeline.output_dir")
    jobs = tuple(
        CityJob(
            name=c["name"],
            train=tuple(c["train"]),
            test=c["test"],
            target=c["target"],
            predictors=tuple(c["predictors"]),
            lambda_path=c["lambda"],
            organizer_mask=c["organizer_mask"],
        )
        for c in cities
    )
    return PipelineManifest(
        output_dir=pipeline["output_dir"],
        cities=jobs,
        seed=int(pipeline.get("seed", "0")),
        tda=_parse_flag(pipeline.get("tda", "off"), "tda"),
        quantize_u8=_parse_flag(pipeline.get("quantize_u8", "off"), "quantize_u8"),
        mask_source=pipeline.get("mask_source", "generated"),
        ensemble_agg=pipeline.get("ensemble", "mean"),
    )


def load_manifest(path) -> PipelineManifest:
    from pathlib import Path

    return parse_manifest(Path(path).read_text())


def save_manifest(m: PipelineManifest, path) -> None:
    from pathlib import Path

    Path(path).write_text(serialize_manifest(m))
