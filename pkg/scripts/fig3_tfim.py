"""Error against T_max and T_total for MM-QCELS and QPE on TFIM-8."""

from _sweep import parse, report
from mmqcels.bench import preset_config, run_figure3

if __name__ == "__main__":
    args = parse(__doc__)
    cfg = preset_config("tfim8", trials=args.trials, seed=args.seed)
    report(run_figure3(cfg), "fig3_tfim8", args.out_dir, args.target)
