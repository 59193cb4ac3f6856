"""Command-line front end: ``sasgen run|heatmap|summarize|replay``."""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, from_flat, load_config
from .domains import make_domain
from .io import (ArtifactError, heatmap_pixels, heatmap_sidecar, read_archive_csv, read_manifest,
                 read_replay, write_archive_csv, write_dataset, write_manifest, write_metrics_csv,
                 write_jsonl, write_ppm, write_replay)
from .pipeline import run_experiment
from .qd.archive import PRESETS

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
BLOCK = 4


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _err(msg: str) -> None:
    print(f"sasgen: {msg}", file=sys.stderr)


def _domain_spec(domain_name: str):
    d = make_domain(domain_name)
    return d.archive, d.cap


def render_heatmap(csv_path, image_path, spec, cap) -> list[str]:
    rows, _ = read_archive_csv(csv_path)
    write_ppm(heatmap_pixels(rows, spec.bins, cap, BLOCK), image_path)
    sidecar = Path(str(image_path) + ".txt")
    sidecar.write_text(heatmap_sidecar(spec, cap, BLOCK))
    return [str(image_path), str(sidecar)]


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
            cfg = from_flat(cfg.to_flat())
    except ConfigError as exc:
        for p in exc.problems:
            _err(f"config error: {p}")
        return EXIT_USAGE
    out = Path(args.output)
    started = _now()
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        result = run_experiment(cfg, out)
        domain = cfg.make_domain()
        files = {
            "archive_final": "archive_final.csv",
            "archive_training": "archive_training.csv",
            "replay": "replay.npz",
            "metrics": "metrics.csv",
            "dataset": "dataset.npz",
            "heatmap": "heatmap_final.ppm",
            "repairs": "repairs.jsonl",
        }
        write_archive_csv(result.final, out / files["archive_final"], domain.dim)
        write_archive_csv(result.training, out / files["archive_training"], domain.dim)
        write_replay(result.final, out / files["replay"])
        write_metrics_csv(result.metrics, out / files["metrics"])
        write_dataset(result.dataset, out / files["dataset"])
        write_jsonl(result.repairs, out / files["repairs"])
        artifacts = list(files.values())
        artifacts += [Path(p).name for p in render_heatmap(
            out / files["archive_final"], out / files["heatmap"], domain.archive, domain.cap)][1:]
        if result.model is not None:
            result.model.save(out / "model_final.npz")
            artifacts.append("model_final.npz")
        artifacts += result.artifacts
        manifest = {
            "config": cfg.to_flat(),
            "seed": cfg.seed,
            "code_version": __version__,
            "started": started,
            "finished": _now(),
            "wall_clock_seconds": round(time.perf_counter() - t0, 3),
            "evaluations": result.evals,
            "failures": result.failures,
            "qd_score": result.qd_score,
            "cells": len(result.final),
            "files": files,
            "artifacts": artifacts + ["manifest.json"],
        }
        write_manifest(manifest, out / "manifest.json")
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        _err(f"run failed: {exc}")
        return EXIT_RUNTIME
    print(f"{cfg.algorithm} on {cfg.domain}: {result.evals} evaluations, "
          f"QD-score {result.qd_score:.3f}, {len(result.final)} cells -> {out}")
    return EXIT_OK


def cmd_heatmap(args) -> int:
    csv_path = Path(args.archive)
    spec, cap = None, args.cap
    domain = args.domain
    if domain is None and (csv_path.parent / "manifest.json").exists():
        try:
            domain = read_manifest(csv_path.parent)["config"]["domain"]
        except (ArtifactError, KeyError) as exc:
            _err(str(exc))
            return EXIT_USAGE
    if domain is None:
        _err("cannot infer the archive layout; pass --domain")
        return EXIT_USAGE
    try:
        spec, dcap = _domain_spec(domain)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    cap = dcap if cap is None else cap
    try:
        render_heatmap(csv_path, args.image, spec, cap)
    except ArtifactError as exc:
        _err(f"malformed archive: {exc}")
        return EXIT_USAGE
    except OSError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    return EXIT_OK


def summarize_runs(run_dirs):
    """``{(algorithm, domain): (mean qd, se qd, mean cells, se cells, n)}``."""
    groups = {}
    domains = set()
    for d in run_dirs:
        man = read_manifest(d)
        cfg = man["config"]
        rows, _ = read_archive_csv(Path(d) / man["files"]["archive_final"])
        score = math.fsum(r[4] for r in sorted(rows, key=lambda r: (r[0], r[1])))
        domains.add(cfg["domain"])
        groups.setdefault((cfg["algorithm"], cfg["domain"]), []).append((score, len(rows)))
    if len(domains) > 1:
        raise ArtifactError(f"runs mix domains: {', '.join(sorted(domains))}")

    def mse(x):
        x = np.asarray(x, dtype=np.float64)
        se = float(x.std(ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0
        return float(x.mean()), se

    out = {}
    for key in sorted(groups):
        vals = np.array(groups[key])
        out[key] = (*mse(vals[:, 0]), *mse(vals[:, 1]), len(vals))
    return out


def cmd_summarize(args) -> int:
    try:
        table = summarize_runs(args.runs)
    except (ArtifactError, KeyError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    print(f"{'algorithm':<12} {'domain':<22} {'runs':>4} {'QD-score':>22} {'cells':>18}")
    for (alg, dom), (q, qse, c, cse, n) in table.items():
        print(f"{alg:<12} {dom:<22} {n:>4} {q:>12.3f} ± {qse:<7.3f} {c:>9.2f} ± {cse:<6.2f}")
    return EXIT_OK


def _parse_cell(text: str, bins) -> int:
    if "," in text:
        i, j = (int(v) for v in text.split(","))
        if not (0 <= i < bins[0] and 0 <= j < bins[1]):
            raise ValueError(f"cell ({i}, {j}) outside the archive")
        return i * bins[1] + j
    return int(text)


def cmd_replay(args) -> int:
    run = Path(args.run_dir)
    if not run.is_dir():
        _err(f"no run directory {run}")
        return EXIT_USAGE
    try:
        man = read_manifest(run)
        cfg = from_flat(man["config"])
        domain = cfg.make_domain()
        cell = _parse_cell(args.cell, domain.archive.bins)
        data = read_replay(run / man["files"]["replay"])
    except (ArtifactError, ConfigError, KeyError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    hit = np.nonzero(data["cells"] == cell)[0]
    if len(hit) == 0:
        _err(f"cell {cell} is empty")
        return EXIT_USAGE
    k = int(hit[0])
    theta, seed, stored = data["theta"][k], int(data["seed"][k]), float(data["f"][k])
    try:
        outcome = domain.simulate(theta, seed, record=True)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        _err(f"replay failed: {exc}")
        return EXIT_RUNTIME
    f = domain.objective(outcome)
    path = Path(args.out) if args.out else run / f"replay_cell_{cell}.jsonl"
    with open(path, "w") as fh:
        fh.write(json.dumps({"cell": cell, "seed": seed, "theta": theta.tolist(),
                             "objective": f, "stored_objective": stored,
                             "ticks": len(outcome.trace)}) + "\n")
        for row in outcome.trace:
            fh.write(json.dumps(row) + "\n")
    print(f"cell {cell}: replayed objective {f:.9g} (stored {stored:.9g}), "
          f"{len(outcome.trace)} ticks -> {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sasgen", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a YAML config")
    r.add_argument("config")
    r.add_argument("output")
    r.add_argument("--seed", type=int, default=None, help="override the master seed")
    r.set_defaults(func=cmd_run)
    h = sub.add_parser("heatmap", help="render an archive CSV as a PPM image")
    h.add_argument("archive")
    h.add_argument("image")
    h.add_argument("--domain", default=None, choices=sorted({*PRESETS} | {"teleop-blend",
                   "collab-I-human-search", "collab-I-success"}))
    h.add_argument("--cap", type=float, default=None, help="objective mapped to the top colour")
    h.set_defaults(func=cmd_heatmap)
    s = sub.add_parser("summarize", help="mean and standard error over run directories")
    s.add_argument("runs", nargs="+")
    s.set_defaults(func=cmd_summarize)
    rp = sub.add_parser("replay", help="re-simulate one elite and dump its per-tick trace")
    rp.add_argument("run_dir")
    rp.add_argument("cell", help="flat cell index or 'i,j'")
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
