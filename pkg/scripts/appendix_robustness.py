"""Over-specified K and small minimum overlap on TFIM-8."""

from _sweep import parse, report
from mmqcels.bench import preset_config, run_figure3, run_robustness

if __name__ == "__main__":
    args = parse(__doc__)
    for K, recs in run_robustness("wrong_K", trials=args.trials, seed=args.seed).items():
        report(recs, f"wrong_K_K{K}", args.out_dir, args.target)
    small = run_figure3(preset_config("small_pmin", trials=args.trials, seed=args.seed))
    report(small, "small_pmin", args.out_dir, args.target)
