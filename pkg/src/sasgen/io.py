"""Run artifacts: archive CSVs, replay data, metrics, dataset, manifest and heatmaps."""
from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path

import numpy as np

from .qd.archive import Archive, ArchiveSpec, Elite, cell_index, unravel

FIXED_COLUMNS = ("cell_i", "cell_j", "measure_0", "measure_1", "objective")
BACKGROUND = (255, 255, 255)
# Perceptually ordered ramp (dark blue to yellow), linearly interpolated.
_RAMP = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]],
                 dtype=np.float64)


class ArtifactError(ValueError):
    """Malformed or missing run artifact."""


def _fmt(x: float) -> str:
    return f"{float(x):.9g}"


def archive_rows(archive: Archive):
    """Rows of ``(cell_i, cell_j, m0, m1, f, theta)`` in cell order."""
    out = []
    for idx, e in archive.elites():
        i, j = unravel(archive.spec, idx)
        out.append((i, j, e.m[0], e.m[1], e.f, e.theta))
    return out


def format_archive_csv(rows, n_theta: int | None = None) -> str:
    if n_theta is None:
        n_theta = len(rows[0][5]) if rows else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(FIXED_COLUMNS) + [f"theta_{k}" for k in range(n_theta)])
    for i, j, m0, m1, f, theta in rows:
        w.writerow([int(i), int(j), _fmt(m0), _fmt(m1), _fmt(f)] + [_fmt(t) for t in theta])
    return buf.getvalue()


def write_archive_csv(archive: Archive, path, n_theta: int | None = None) -> None:
    rows = archive_rows(archive)
    if n_theta is None and not rows:
        n_theta = 0
    Path(path).write_text(format_archive_csv(rows, n_theta))


def parse_archive_csv(text: str):
    """Parse archive CSV text into rows; raises ``ArtifactError`` on schema problems."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ArtifactError("empty archive CSV") from None
    if tuple(header[:5]) != FIXED_COLUMNS:
        raise ArtifactError(f"archive CSV header must start with {','.join(FIXED_COLUMNS)}")
    n_theta = len(header) - 5
    if header[5:] != [f"theta_{k}" for k in range(n_theta)]:
        raise ArtifactError("parameter columns must be theta_0..theta_{n-1}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if len(rec) != len(header):
            raise ArtifactError(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            i, j = int(rec[0]), int(rec[1])
            vals = [float(v) for v in rec[2:]]
        except ValueError:
            raise ArtifactError(f"line {lineno}: non-numeric field") from None
        if i < 0 or j < 0:
            raise ArtifactError(f"line {lineno}: negative cell index")
        rows.append((i, j, vals[0], vals[1], vals[2], np.array(vals[3:])))
    return rows, n_theta


def read_archive_csv(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}") from None
    return parse_archive_csv(text)


def archive_from_rows(rows, spec: ArchiveSpec) -> Archive:
    archive = Archive(spec)
    for i, j, m0, m1, f, theta in rows:
        if i >= spec.bins[0] or j >= spec.bins[1]:
            raise ArtifactError(f"cell ({i}, {j}) outside a {spec.bins[0]}x{spec.bins[1]} archive")
        archive.cells[i * spec.bins[1] + j] = Elite(theta, f, np.array([m0, m1]))
    return archive


# -- replay data ----------------------------------------------------------------
def write_replay(archive: Archive, path) -> None:
    """Full-precision elites with their evaluation seeds."""
    items = archive.elites()
    n = len(items[0][1].theta) if items else 0
    np.savez(path,
             cells=np.array([i for i, _ in items], dtype=np.int64),
             theta=np.array([e.theta for _, e in items]).reshape(len(items), n),
             f=np.array([e.f for _, e in items], dtype=np.float64),
             m=np.array([e.m for _, e in items]).reshape(len(items), -1),
             seed=np.array([e.meta.get("seed", 0) for _, e in items], dtype=np.uint64))


def read_replay(path) -> dict:
    with np.load(path) as z:
        return {k: z[k] for k in z.files}


# -- run records ----------------------------------------------------------------
def write_metrics_csv(metrics, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["evals", "wall_clock", "qd_score", "cells"])
        for row in metrics:
            w.writerow([row["evals"], f"{row['wall_clock']:.6f}", _fmt(row["qd_score"]), row["cells"]])


def read_metrics_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{"evals": int(r["evals"]), "wall_clock": float(r["wall_clock"]),
                 "qd_score": float(r["qd_score"]), "cells": int(r["cells"])}
                for r in csv.DictReader(fh)]


DATASET_SCHEMA = 1


def write_dataset(dataset, path) -> None:
    """Labelled samples as compressed arrays, tagged with ``DATASET_SCHEMA``."""
    if dataset:
        arrays = dict(theta=np.array([d.theta for d in dataset]),
                      f=np.array([d.f for d in dataset]),
                      m=np.array([d.m for d in dataset]),
                      grids=np.array([d.grids for d in dataset]))
    else:
        arrays = dict(theta=np.zeros((0, 0)), f=np.zeros(0), m=np.zeros((0, 0)),
                      grids=np.zeros((0, 0, 0, 0)))
    np.savez_compressed(path, schema=np.int64(DATASET_SCHEMA), **arrays)


def read_dataset(path):
    from .surrogate import Sample
    with np.load(path) as z:
        if "schema" not in z.files or int(z["schema"]) != DATASET_SCHEMA:
            raise ArtifactError(f"{path}: unsupported dataset schema")
        return [Sample(z["theta"][i], float(z["f"][i]), z["m"][i], z["grids"][i])
                for i in range(len(z["f"]))]


def write_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"cannot read manifest in {run_dir}: {exc}") from None


# -- heatmaps -----------------------------------------------------------------------
def colour(value: float, cap: float) -> tuple:
    """Ramp colour for ``value`` clipped to ``[0, cap]``."""
    u = 0.0 if cap <= 0 else min(max(value / cap, 0.0), 1.0)
    pos = u * (len(_RAMP) - 1)
    k = min(int(pos), len(_RAMP) - 2)
    c = _RAMP[k] + (pos - k) * (_RAMP[k + 1] - _RAMP[k])
    return tuple(int(round(v)) for v in c)


def heatmap_pixels(rows, bins, cap: float, block: int = 4) -> np.ndarray:
    """(H, W, 3) uint8 image: measure 0 left to right, measure 1 bottom to top."""
    ni, nj = bins
    img = np.empty((nj, ni, 3), dtype=np.uint8)
    img[:] = BACKGROUND
    for i, j, _, _, f, _ in rows:
        if i >= ni or j >= nj:
            raise ArtifactError(f"cell ({i}, {j}) outside a {ni}x{nj} archive")
        img[nj - 1 - j, i] = colour(f, cap)
    return np.repeat(np.repeat(img, block, axis=0), block, axis=1)


def write_ppm(img: np.ndarray, path) -> None:
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    # Exactly one whitespace byte separates the max value from the pixels.
    head = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if head is None:
        raise ArtifactError("not a binary PPM")
    w, h = int(head.group(1)), int(head.group(2))
    body = data[head.end():]
    if len(body) < w * h * 3:
        raise ArtifactError("truncated PPM")
    return np.frombuffer(body, dtype=np.uint8)[: w * h * 3].reshape(h, w, 3)


def heatmap_sidecar(spec: ArchiveSpec, cap: float, block: int) -> str:
    lines = [f"cells: {spec.bins[0]} x {spec.bins[1]}",
             f"block_pixels: {block}",
             f"x_axis: {spec.names[0]} [{_fmt(spec.lows[0])}, {_fmt(spec.highs[0])}] left to right",
             f"y_axis: {spec.names[1]} [{_fmt(spec.lows[1])}, {_fmt(spec.highs[1])}] bottom to top",
             f"colour: objective over [0, {_fmt(cap)}], dark blue low, yellow high",
             "background: white marks empty cells"]
    return "\n".join(lines) + "\n"


__all__ = ["ArtifactError", "archive_from_rows", "archive_rows", "cell_index", "colour",
           "format_archive_csv", "heatmap_pixels", "heatmap_sidecar", "parse_archive_csv",
           "read_archive_csv", "read_dataset", "read_manifest", "read_metrics_csv", "read_ppm",
           "read_replay", "write_archive_csv", "write_dataset", "write_jsonl", "write_manifest",
           "write_metrics_csv", "write_ppm", "write_replay"]
