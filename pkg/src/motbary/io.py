"""Measure, plan and report persistence: JSON, CSV and grayscale images.

Measure JSON: ``{"dim": d, "points": [[...]], "weights": [...]}``.
Measure CSV: ``d`` coordinate columns followed by one weight column, with
a header row ``x0,...,x{d-1},weight``.
Plan JSON: ``{"num_marginals": N, "atoms": [{"indices": [...], "mass": m}]}``.
Numbers round-trip exactly (shortest-roundtrip float serialization).

Grayscale images (8-bit PNG or PGM) load as measures: every pixel with
positive intensity becomes an atom at ``(col / width, row / height)``
(origin top-left, y growing downwards) with weight proportional to its
intensity.  The pixel-to-point convention is stated here because image
containers do not carry one.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .measures import DiscreteMeasure, MultiMarginalPlan

__all__ = [
    "load_measure",
    "save_measure",
    "load_plan",
    "load_plan_atoms",
    "save_plan",
    "save_report",
    "detect_format",
]

_IMAGE_SUFFIXES = {".png", ".pgm"}


def detect_format(path, fmt: str | None = None) -> str:
    if fmt is not None:
        if fmt not in ("json", "csv", "image"):
            raise ValueError(f"unknown format {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "json"
    if suffix == ".csv":
        return "csv"
    if suffix in _IMAGE_SUFFIXES:
        return "image"
    raise ValueError(f"cannot infer format from {path}; pass format explicitly")


def load_measure(path, fmt: str | None = None) -> DiscreteMeasure:
    """Read a measure from a JSON, CSV or 8-bit grayscale image file."""
    fmt = detect_format(path, fmt)
    if fmt == "json":
        with open(path) as fh:
            data = json.load(fh)
        try:
            points = np.asarray(data["points"], dtype=float)
            weights = np.asarray(data["weights"], dtype=float)
            dim = int(data["dim"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed measure file {path}: {exc}") from exc
        if points.ndim == 1:
            points = points[:, None]
        if points.shape[1] != dim:
            raise ValueError(
                f"{path}: declared dim {dim} does not match points of "
                f"dimension {points.shape[1]}"
            )
        return DiscreteMeasure(points, weights)
    if fmt == "csv":
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row:
                    continue
                try:
                    rows.append([float(x) for x in row])
                except ValueError:
                    if lineno == 1:  # header row
                        continue
                    raise ValueError(f"malformed row {lineno} in {path}") from None
        if not rows:
            raise ValueError(f"no data rows in {path}")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError(f"{path}: rows have inconsistent column counts")
        arr = np.asarray(rows)
        if arr.shape[1] < 2:
            raise ValueError(f"{path}: need at least one coordinate and a weight")
        return DiscreteMeasure(arr[:, :-1], arr[:, -1])
    return _measure_from_image(path)


def _measure_from_image(path) -> DiscreteMeasure:
    with Image.open(path) as img:
        gray = np.asarray(img.convert("L"), dtype=float)
    h, w = gray.shape
    rows, cols = np.nonzero(gray > 0)
    if rows.size == 0:
        raise ValueError(f"{path}: image has zero total mass")
    points = np.column_stack([cols / w, rows / h])
    return DiscreteMeasure(points, gray[rows, cols])


def save_measure(measure: DiscreteMeasure, path, fmt: str | None = None) -> None:
    """Write a measure as JSON or CSV."""
    fmt = detect_format(path, fmt)
    if fmt == "image":
        raise ValueError("measures with free support cannot be saved as images")
    if fmt == "json":
        payload = {
            "dim": measure.dim,
            "points": measure.points.tolist(),
            "weights": measure.weights.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(measure.dim)] + ["weight"])
        for pt, wt in zip(measure.points, measure.weights):
            writer.writerow([repr(float(c)) for c in pt] + [repr(float(wt))])


def save_plan(plan: MultiMarginalPlan, path) -> None:
    payload = {
        "num_marginals": plan.num_marginals,
        "atoms": [
            {"indices": [int(i) for i in idx], "mass": float(m)}
            for idx, m in zip(plan.indices, plan.masses)
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_plan_atoms(path) -> tuple[int, np.ndarray, np.ndarray]:
    """Read a plan file without binding it to measures."""
    with open(path) as fh:
        data = json.load(fh)
    try:
        n = int(data["num_marginals"])
        indices = np.asarray([a["indices"] for a in data["atoms"]], dtype=np.intp)
        masses = np.asarray([a["mass"] for a in data["atoms"]], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed plan file {path}: {exc}") from exc
    if indices.size == 0:
        indices = indices.reshape(0, n)
    if indices.shape[1] != n:
        raise ValueError(f"{path}: atom arity does not match num_marginals")
    return n, indices, masses


def load_plan(path, measures, *, validate: bool = True) -> MultiMarginalPlan:
    """Read a plan file and bind it to its marginal measures."""
    n, indices, masses = load_plan_atoms(path)
    measures = tuple(measures)
    if len(measures) != n:
        raise ValueError(
            f"{path} declares {n} marginals but {len(measures)} measures given"
        )
    return MultiMarginalPlan(measures, indices, masses, validate=validate)


def save_report(report, path) -> None:
    with open(path, "w") as fh:
        fh.write(report.to_json())
        fh.write("\n")
