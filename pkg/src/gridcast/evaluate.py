"""MSE scoring over prediction/target pairs, per city and overall.

All accumulation is f64 regardless of tensor dtype: a full-size city sums
495*436*48*N squared differences, which visibly loses precision in f32.
Reports print 5 decimals and sort ascending (lower is better).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import AlignmentError
from .tensorio import PredictionSet

REPORT_DECIMALS = 5


def mse(pred: PredictionSet, target: PredictionSet) -> float:
    """Mean over all N*K*H*W elements of the squared difference, in f64."""
    if pred.slots != target.slots:
        divergent = sorted(set(pred.slots) ^ set(target.slots)) or ["(order differs)"]
        raise AlignmentError("slots diverge: " + ", ".join(divergent))
    if pred.values.dims != target.values.dims:
        raise AlignmentError(
            f"dims diverge: {pred.values.dims} vs {target.values.dims}"
        )
    diff = pred.values.data.astype(np.float64) - target.values.data.astype(np.float64)
    return float(np.mean(diff * diff))


@dataclass(frozen=True)
class ScoreReport:
    """Per-city MSE plus the element-count-weighted overall score."""

    per_city: dict[str, float]
    per_city_elements: dict[str, int]
    overall: float
    element_count: int
    masked: bool = False

    def __post_init__(self):
        if set(self.per_city) != set(self.per_city_elements):
            raise ValueError("per_city and per_city_elements must cover the same cities")
        total = sum(self.per_city_elements.values())
        if total != self.element_count:
            raise ValueError("element_count must equal the sum of per-city counts")
        weighted = (
            sum(self.per_city[c] * self.per_city_elements[c] for c in self.per_city)
            / total
        )
        if not np.isclose(self.overall, weighted, rtol=1e-9, atol=0.0):
            raise ValueError(
                f"overall {self.overall!r} != element-weighted mean {weighted!r}"
            )

    @classmethod
    def from_city_scores(
        cls,
        per_city: Mapping[str, float],
        per_city_elements: Mapping[str, int],
        masked: bool = False,
    ) -> "ScoreReport":
        total = sum(per_city_elements.values())
        overall = sum(per_city[c] * per_city_elements[c] for c in per_city) / total
        return cls(
            per_city=dict(per_city),
            per_city_elements=dict(per_city_elements),
            overall=overall,
            element_count=total,
            masked=masked,
        )


def score_run(
    predictions: Mapping[str, PredictionSet],
    targets: Mapping[str, PredictionSet],
    masked: bool = False,
) -> ScoreReport:
    """Score every city; predictions and targets must cover the same universe."""
    gaps = []
    for city in sorted(set(predictions) | set(targets)):
        if city not in predictions:
            gaps.extend((city, slot, "prediction") for slot in targets[city].slots)
        elif city not in targets:
            gaps.extend((city, slot, "target") for slot in predictions[city].slots)
        else:
            p, t = predictions[city], targets[city]
            for slot in sorted(set(p.slots) ^ set(t.slots)):
                side = "target" if slot in p.slots else "prediction"
                gaps.append((city, slot, side))
    if gaps:
        listing = ", ".join(f"({c}, {s}) missing {side}" for c, s, side in gaps)
        raise AlignmentError(f"coverage gaps: {listing}")
    per_city = {}
    per_city_elements = {}
    for city in sorted(predictions):
        per_city[city] = mse(predictions[city], targets[city])
        per_city_elements[city] = predictions[city].values.size
    return ScoreReport.from_city_scores(per_city, per_city_elements, masked=masked)


def format_report(report: ScoreReport) -> str:
    """Line-oriented table, best (lowest) MSE first, 5 decimals."""
    rows = sorted(report.per_city.items(), key=lambda kv: (kv[1], kv[0]))
    width = max([len("overall")] + [len(c) for c in report.per_city])
    lines = [f"{'city'.ljust(width)}  {'elements':>12}  {'mse':>14}"]
    for city, value in rows:
        lines.append(
            f"{city.ljust(width)}  {report.per_city_elements[city]:>12}  "
            f"{value:>14.{REPORT_DECIMALS}f}"
        )
    lines.append(
        f"{'overall'.ljust(width)}  {report.element_count:>12}  "
        f"{report.overall:>14.{REPORT_DECIMALS}f}"
    )
    if report.masked:
        lines.append("(scored after road-mask post-processing)")
    return "\n".join(lines) + "\n"


def report_to_json(report: ScoreReport) -> str:
    doc = {
        "per_city": report.per_city,
        "per_city_elements": report.per_city_elements,
        "overall": report.overall,
        "element_count": report.element_count,
        "masked": report.masked,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> ScoreReport:
    doc = json.loads(text)
    return ScoreReport(
        per_city=dict(doc["per_city"]),
        per_city_elements={k: int(v) for k, v in doc["per_city_elements"].items()},
        overall=float(doc["overall"]),
        element_count=int(doc["element_count"]),
        masked=bool(doc["masked"]),
    )
