"""Command line entry point: ``mmqcels <command> --config cfg.json --seed S --out path``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench
from .bench import ConfigError, ExperimentConfig
from .estimator import DegenerateModeError, ScheduleError, mm_qcels
from .qpe import QpeConfig, qpe_estimate_min
from .sampling import TimeDensity, generate_dataset, substream
from .spectral import DimensionError, spectrum_stats

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("spectrum", "generate", "estimate", "qpe", "landscape", "bench")


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def cmd_spectrum(cfg: ExperimentConfig, seed: int, out) -> dict:
    sp = cfg.build_spectrum()
    _write(out, sp.to_json())
    st = spectrum_stats(sp, cfg.dominant_spec())
    return {"M": sp.M, "p_min": st.p_min_K, "gap": st.delta_lambda_K, "residual": st.residual_R_K}


def cmd_generate(cfg: ExperimentConfig, seed: int, out) -> dict:
    sp = cfg.build_spectrum()
    d = cfg.data
    data = generate_dataset(sp, TimeDensity(d.T, d.gamma), d.N, seed=seed, repeats=d.repeats, noiseless=d.noiseless)
    _write(out, data.to_jsonl())
    return {"N": data.N, "t_max": data.ledger.t_max, "t_total": data.ledger.t_total}


def cmd_estimate(cfg: ExperimentConfig, seed: int, out) -> dict:
    sp = cfg.build_spectrum()
    sched = cfg.build_schedule(sp)
    res = mm_qcels(sp, sched, cfg.K, seed=seed, search=cfg.search_config(), noiseless=cfg.noiseless)
    if not (np.all(np.isfinite(res.estimate.theta)) and np.all(np.isfinite(res.estimate.r))):
        raise FloatingPointError("estimate contains non-finite values")
    payload = res.estimate.to_dict()
    # realized depth is the truncation bound of the last level
    payload["t_max"] = sched.t_max_bound
    payload["t_total"] = res.ledger.t_total
    _write(out, json.dumps(payload, indent=1))
    _, emax = bench.dominant_errors(res.estimate, sp, cfg.dominant_spec())
    return {"max_error": emax, "levels": sched.l + 1}


def cmd_qpe(cfg: ExperimentConfig, seed: int, out) -> dict:
    sp = cfg.build_spectrum()
    q = cfg.qpe
    lam1 = float(sp.eigenvalues[cfg.dominant_spec().indices[0]])
    runs = []
    for d in range(q.d_min, q.d_max + 1):
        rng = substream(seed, 1, d)
        shift = rng.uniform(0.0, 2 * math.pi / 2**d) if q.dither else 0.0
        theta, ledger = qpe_estimate_min(sp, QpeConfig(d, q.repetitions, phase_shift=shift), rng)
        runs.append({"d": d, "theta": theta, "t_max": ledger.t_max, "t_total": ledger.t_total, "error": abs(theta - lam1)})
    _write(out, json.dumps({"runs": runs}, indent=1))
    return {"runs": len(runs)}


def cmd_landscape(cfg: ExperimentConfig, seed: int, out) -> dict:
    cfg.seed = seed
    res = bench.run_landscape(cfg)
    _write(out, bench.landscape_to_csv(res))
    return {f"std_theta1_T{res.T[j]:.1f}": float(np.std(m[:, 0])) for j, m in res.minimizers.items()}


def cmd_bench(cfg: ExperimentConfig, seed: int, out) -> dict:
    cfg.seed = seed
    recs = bench.run_figure3(cfg)
    _write(out, bench.records_to_csv(recs))
    return {"rows": len(recs)}


HANDLERS = {
    "spectrum": cmd_spectrum,
    "generate": cmd_generate,
    "estimate": cmd_estimate,
    "qpe": cmd_qpe,
    "landscape": cmd_landscape,
    "bench": cmd_bench,
}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mmqcels", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config (may name a preset)")
        p.add_argument("--seed", type=_u64, default=0)
        p.add_argument("--out", required=True)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is also our config code
        return int(exc.code or 0)
    try:
        cfg = ExperimentConfig.load(args.config)
        summary = HANDLERS[args.command](cfg, args.seed, args.out)
    except (DegenerateModeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ScheduleError, DimensionError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
