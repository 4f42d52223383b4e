"""Error against T_max and T_total for MM-QCELS and QPE on the 4-site Hubbard chain."""

from _sweep import parse, report
from mmqcels.bench import preset_config, run_figure3

if __name__ == "__main__":
    args = parse(__doc__)
    cfg = preset_config("hubbard4", trials=args.trials, seed=args.seed)
    report(run_figure3(cfg), "fig4_hubbard4", args.out_dir, args.target)
