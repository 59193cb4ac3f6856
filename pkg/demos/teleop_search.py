"""A short gradient-assisted search on the teleoperation domain.

Runs the surrogate pipeline for a few hundred simulations, compares it with
random search at the same budget and writes both archives as heatmaps.

    python demos/teleop_search.py [budget] [output_dir]
"""
import sys
from pathlib import Path

from sasgen.config import ExperimentConfig
from sasgen.io import heatmap_pixels, write_archive_csv, archive_rows, write_ppm
from sasgen.pipeline import run_experiment

budget = int(sys.argv[1]) if len(sys.argv) > 1 else 300
out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("demo_teleop")
out.mkdir(parents=True, exist_ok=True)

# Fewer inner iterations and epochs than the defaults so this finishes in minutes.
fast = dict(budget=budget, seed=0, n_exploit=30, epochs=30)
for alg in ("dsas", "random"):
    res = run_experiment(ExperimentConfig("teleop", alg, **fast))
    spec = res.final.spec
    write_archive_csv(res.final, out / f"{alg}.csv")
    write_ppm(heatmap_pixels(archive_rows(res.final), spec.bins, 10.0, 4), out / f"{alg}.ppm")
    print(f"{alg:>6}: QD-score {res.qd_score:9.2f}, {len(res.final):4d} cells, "
          f"{res.evals} simulations")
    if res.losses:
        occ, down = res.losses[-1]
        print(f"        last training call: occupancy loss {occ[-1]:.4f}, "
              f"downstream loss {down[-1]:.4f}")
print(f"archives and heatmaps in {out}/")
