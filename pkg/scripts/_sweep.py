"""Shared driver for the error-vs-depth sweeps."""

import argparse
from pathlib import Path

from mmqcels.bench import crossing_depth, inverse_fit_constant, loglog_slope, median_curve, write_csv, write_gnuplot


def parse(doc, trials=10):
    ap = argparse.ArgumentParser(description=doc)
    ap.add_argument("--trials", type=int, default=trials)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--target", type=float, default=1e-3)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    return ap.parse_args()


def report(records, name, out_dir, target):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(records, out_dir / f"{name}.csv")
    write_gnuplot(records, out_dir / name)
    for method in sorted({r.method for r in records}):
        tm, err, tot = median_curve(records, method)
        print(
            f"{name} {method:8s} slope={loglog_slope(tm, err):+.3f} c={inverse_fit_constant(tm, err):.3f} "
            f"T_max@{target:g}={crossing_depth(tm, err, target):.1f}"
        )
