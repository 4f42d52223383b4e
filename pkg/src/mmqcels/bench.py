"""Experiment runner: depth sweeps against QPE, loss landscapes and robustness presets.

Every sweep produces BenchRecord rows in a fixed CSV schema.  Per-trial seeds
are ``seed ^ trial`` and every random draw is keyed from that seed, so a row
can be regenerated on its own from (config, seed).

Error protocol: MM-QCELS is scored by the maximum error over the matched
dominant modes while QPE is scored on the ground energy alone.  This is
asymmetric in favour of QPE and is kept deliberately.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .estimator import (
    ModeEstimate,
    Schedule,
    SearchConfig,
    build_schedule,
    loss,
    mm_qcels,
)
from .qpe import QpeConfig, qpe_estimate_min
from .sampling import TimeDensity, generate_dataset, substream
from .spectral import (
    DominantSpec,
    HamiltonianModel,
    Spectrum,
    assign_overlaps,
    model_spectrum,
    spectrum_stats,
)

CSV_HEADER = ("method", "trial", "seed", "t_max", "t_total", "error", "err_mode1", "err_mode2")
LANDSCAPE_HEADER = ("level", "T", "trial", "seed", "kind", "theta1", "theta2", "loss")
SEED_MASK = (1 << 64) - 1


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# records and configs


@dataclass
class BenchRecord:
    method: str  # "MMQCELS" or "QPE"
    trial: int
    seed: int
    t_max: float
    t_total: float
    error: float
    mode_errors: list = field(default_factory=list)
    schedule: dict | None = None

    def row(self) -> list:
        errs = list(self.mode_errors[:2]) + [None] * (2 - min(len(self.mode_errors), 2))
        return [
            self.method,
            self.trial,
            self.seed,
            repr(float(self.t_max)),
            repr(float(self.t_total)),
            repr(float(self.error)),
            *("" if e is None else repr(float(e)) for e in errs),
        ]

    def sort_key(self):
        return (self.method, self.trial, self.t_max)


def _check_keys(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class ScheduleOverrides:
    """Fields passed to build_schedule; T0_gap sets T0 = T0_gap / Delta."""

    gamma: float | None = None
    T0: float | None = None
    T0_gap: float | None = None
    N0: int | None = None
    Nj: int | None = None
    l: int | None = None
    epsilon: float | None = None
    eta: float = 0.1
    zeta: float = 0.1
    q: float | None = None
    constraint_l1: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleOverrides":
        _check_keys(d, {f.name for f in fields(cls)}, "schedule")
        return cls(**d)


@dataclass
class QpeSweep:
    d_min: int = 4
    d_max: int = 13
    repetitions: int = 10
    # draw a uniform phase offset below one bin per run and remove it after readout
    dither: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "QpeSweep":
        _check_keys(d, {f.name for f in fields(cls)}, "qpe")
        out = cls(**d)
        if not 1 <= out.d_min <= out.d_max:
            raise ConfigError("qpe needs 1 <= d_min <= d_max")
        return out


@dataclass
class LandscapeCfg:
    levels: list = field(default_factory=lambda: [1, 2, 3, 4])
    points: int = 400
    margin: float = 3.0  # slice window extends margin / T_(first level) past the dominant span

    @classmethod
    def from_dict(cls, d: dict) -> "LandscapeCfg":
        _check_keys(d, {f.name for f in fields(cls)}, "landscape")
        return cls(**d)


@dataclass
class DataCfg:
    """Single-dataset parameters for the `generate` command."""

    T: float = 1.0
    gamma: float = 1.0
    N: int = 1000
    repeats: int = 1
    noiseless: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "DataCfg":
        _check_keys(d, {f.name for f in fields(cls)}, "data")
        return cls(**d)


@dataclass
class ExperimentConfig:
    name: str = "custom"
    model: dict | None = None
    spectrum: dict | str | None = None
    weights: list | None = None
    dominant: list | None = None
    residual_policy: str | list = "uniform"
    K: int = 2
    schedule: ScheduleOverrides = field(default_factory=ScheduleOverrides)
    trials: int = 10
    seed: int = 0
    qpe: QpeSweep = field(default_factory=QpeSweep)
    landscape: LandscapeCfg = field(default_factory=LandscapeCfg)
    data: DataCfg = field(default_factory=DataCfg)
    search: dict | None = None
    noiseless: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        _check_keys(d, {f.name for f in fields(cls)} | {"preset"}, "config")
        d = dict(d)
        base = {}
        if "preset" in d:
            base = preset(d.pop("preset"))
        merged = {**base, **d}
        for key in ("schedule", "qpe", "landscape", "data"):
            if key in d and key in base:
                merged[key] = {**base[key], **d[key]}
        try:
            cfg = cls(
                **{
                    **merged,
                    "schedule": ScheduleOverrides.from_dict(merged.get("schedule", {})),
                    "qpe": QpeSweep.from_dict(merged.get("qpe", {})),
                    "landscape": LandscapeCfg.from_dict(merged.get("landscape", {})),
                    "data": DataCfg.from_dict(merged.get("data", {})),
                }
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.search is not None:
            _check_keys(cfg.search, {f.name for f in fields(SearchConfig)}, "search")
        if cfg.model is None and cfg.spectrum is None:
            raise ConfigError("config needs a model or a spectrum")
        if cfg.K < 1 or cfg.trials < 1:
            raise ConfigError("K and trials must be positive")
        if not 0 <= int(cfg.seed) <= SEED_MASK:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- derived objects --------------------------------------------------

    def dominant_spec(self) -> DominantSpec:
        if self.dominant is not None:
            return DominantSpec(tuple(self.dominant))
        n = len(self.weights) if self.weights else self.K
        return DominantSpec(tuple(range(n)))

    def build_spectrum(self) -> Spectrum:
        if self.spectrum is not None:
            if isinstance(self.spectrum, str):
                sp = Spectrum.load(self.spectrum)
            else:
                sp = Spectrum.from_dict(self.spectrum)
            if self.weights is None:
                return sp
            lam = sp.eigenvalues
        else:
            m = dict(self.model)
            _check_keys(m, {f.name for f in fields(HamiltonianModel)}, "model")
            model = HamiltonianModel(**m)
            if self.weights is None:
                raise ConfigError("a model needs dominant weights")
            return model_spectrum(model, self.weights, self.dominant_spec(), self.residual_policy)
        return assign_overlaps(lam, self.dominant_spec(), self.weights, self.residual_policy)

    def build_schedule(self, spectrum: Spectrum) -> Schedule:
        o = self.schedule
        stats = spectrum_stats(spectrum, self.dominant_spec())
        T0 = o.T0
        if T0 is None and o.T0_gap is not None:
            gap = stats.delta_lambda_K if math.isfinite(stats.delta_lambda_K) else 1.0
            T0 = o.T0_gap / gap
        return build_schedule(
            stats,
            o.epsilon,
            o.eta,
            o.zeta,
            gamma=o.gamma,
            T0=T0,
            N0=o.N0,
            Nj=o.Nj,
            l=o.l,
            q=o.q,
            constraint_l1=o.constraint_l1,
        )

    def search_config(self) -> SearchConfig | None:
        return SearchConfig(**self.search) if self.search else None


_TFIM8 = {"kind": "tfim", "L": 8, "g": 4.0, "boundary": "periodic"}

PRESETS = {
    "tfim8": {
        "name": "tfim8",
        "model": _TFIM8,
        "weights": [0.4, 0.4],
        "K": 2,
        "schedule": {"gamma": 1.0, "T0_gap": 2.0, "N0": 3000, "Nj": 2000, "l": 6},
        "qpe": {"d_min": 4, "d_max": 13, "repetitions": 10},
    },
    "hubbard4": {
        "name": "hubbard4",
        "model": {"kind": "hubbard", "L": 4, "t": 1.0, "U": 10.0, "boundary": "open"},
        "weights": [0.4, 0.4],
        "K": 2,
        "schedule": {"gamma": 1.0, "T0_gap": 10.0, "N0": 40000, "Nj": 2000, "l": 4},
        "qpe": {"d_min": 6, "d_max": 16, "repetitions": 10},
    },
    "synthetic": {
        "name": "synthetic",
        "spectrum": {"eigenvalues": [-0.8, 0.3], "overlaps": [0.5, 0.5]},
        "K": 2,
        "schedule": {"gamma": 1.0, "T0_gap": 2.0, "N0": 3000, "Nj": 2000, "l": 6},
        "qpe": {"d_min": 4, "d_max": 13, "repetitions": 10},
    },
    "wrong_K": {
        "name": "wrong_K",
        "model": _TFIM8,
        "weights": [0.7, 0.2],
        "K": 2,
        "schedule": {"gamma": 1.0, "T0_gap": 10.0, "N0": 3000, "Nj": 2000, "l": 5},
        "qpe": {"d_min": 4, "d_max": 13, "repetitions": 10},
    },
    "small_pmin": {
        "name": "small_pmin",
        "model": _TFIM8,
        "weights": [0.21, 0.6],
        "K": 2,
        "schedule": {"gamma": 1.0, "T0_gap": 10.0, "N0": 3000, "Nj": 2000, "l": 5},
        "qpe": {"d_min": 4, "d_max": 13, "repetitions": 10},
    },
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return json.loads(json.dumps(PRESETS[name]))


def preset_config(name: str, **overrides) -> ExperimentConfig:
    return ExperimentConfig.from_dict({"preset": name, **overrides})


# ---------------------------------------------------------------------------
# matching


def select_top_modes(estimate: ModeEstimate, n: int) -> np.ndarray:
    """Phases of the n modes with the largest |r|, in ascending phase order."""
    if n > estimate.K:
        raise ValueError(f"cannot select {n} modes from {estimate.K}")
    order = np.argsort(-np.abs(estimate.r), kind="stable")[:n]
    return np.sort(estimate.theta[order])


def match_modes(theta, truth) -> tuple[np.ndarray, float]:
    """Pair estimates with true eigenvalues minimizing the maximum |theta - lambda|.

    Returns the per-truth errors (in the order of `truth`) and their maximum.
    Exhaustive over permutations for K <= 3; sorting both lists otherwise,
    which is optimal for the bottleneck metric on the real line.
    """
    if isinstance(theta, ModeEstimate):
        theta = theta.theta
    theta = np.asarray(theta, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if theta.size != truth.size:
        raise ValueError(f"K mismatch: {theta.size} estimates for {truth.size} eigenvalues")
    if theta.size <= 3:
        best = None
        for perm in itertools.permutations(range(theta.size)):
            errs = np.abs(theta[list(perm)] - truth)
            if best is None or errs.max() < best.max():
                best = errs
        return best, float(best.max())
    return match_modes_sorted(theta, truth)


def match_modes_sorted(theta, truth) -> tuple[np.ndarray, float]:
    theta = np.asarray(theta, dtype=float)
    truth = np.asarray(truth, dtype=float)
    order = np.argsort(truth, kind="stable")
    errs = np.empty(truth.size)
    errs[order] = np.abs(np.sort(theta) - truth[order])
    return errs, float(errs.max())


def dominant_errors(estimate: ModeEstimate, spectrum: Spectrum, dominant: DominantSpec) -> tuple[np.ndarray, float]:
    truth = spectrum.eigenvalues[list(dominant.indices)]
    theta = estimate.theta if estimate.K == dominant.K else select_top_modes(estimate, dominant.K)
    return match_modes(theta, truth)


# ---------------------------------------------------------------------------
# sweeps


def trial_seed(seed: int, trial: int) -> int:
    return (int(seed) ^ int(trial)) & SEED_MASK


def mmqcels_trial(cfg: ExperimentConfig, spectrum: Spectrum, schedule: Schedule, trial: int):
    s = trial_seed(cfg.seed, trial)
    res = mm_qcels(spectrum, schedule, cfg.K, seed=s, key=(0,), search=cfg.search_config(), noiseless=cfg.noiseless)
    return s, res


def mmqcels_records(cfg: ExperimentConfig, spectrum: Spectrum, schedule: Schedule, trial: int) -> list:
    """One record per level j >= 1: the output of a run stopped after level j."""
    dom = cfg.dominant_spec()
    s, res = mmqcels_trial(cfg, spectrum, schedule, trial)
    snap = schedule.to_dict()
    out = []
    for lev in res.levels[1:]:
        errs, emax = dominant_errors(lev.estimate, spectrum, dom)
        out.append(BenchRecord("MMQCELS", trial, s, lev.t_bound, lev.t_total_cumulative, emax, errs.tolist(), snap))
    return out


def qpe_records(cfg: ExperimentConfig, spectrum: Spectrum, trial: int) -> list:
    s = trial_seed(cfg.seed, trial)
    lam1 = float(spectrum.eigenvalues[cfg.dominant_spec().indices[0]])
    out = []
    for d in range(cfg.qpe.d_min, cfg.qpe.d_max + 1):
        rng = substream(s, 1, d)
        shift = rng.uniform(0.0, 2 * math.pi / 2**d) if cfg.qpe.dither else 0.0
        qc = QpeConfig(d, cfg.qpe.repetitions, phase_shift=shift)
        theta, ledger = qpe_estimate_min(spectrum, qc, rng)
        err = abs(theta - lam1)
        out.append(BenchRecord("QPE", trial, s, ledger.t_max, ledger.t_total, err, [err]))
    return out


def run_figure3(cfg: ExperimentConfig, methods: Sequence[str] = ("MMQCELS", "QPE")) -> list:
    """Depth sweep: MM-QCELS levels and QPE ancilla counts, `cfg.trials` trials each."""
    spectrum = cfg.build_spectrum()
    schedule = cfg.build_schedule(spectrum)
    rows = []
    for trial in range(cfg.trials):
        if "MMQCELS" in methods:
            rows += mmqcels_records(cfg, spectrum, schedule, trial)
        if "QPE" in methods:
            rows += qpe_records(cfg, spectrum, trial)
    rows.sort(key=BenchRecord.sort_key)
    return rows


def run_robustness(name: str, Ks: Sequence[int] | None = None, **overrides) -> dict:
    """Over-specified K and small-overlap presets; returns {K: records} (a single entry for small_pmin)."""
    if name not in ("wrong_K", "small_pmin"):
        raise ConfigError(f"unknown robustness preset {name!r}")
    if Ks is None:
        Ks = (2, 3, 4) if name == "wrong_K" else (2,)
    out = {}
    for i, K in enumerate(Ks):
        cfg = preset_config(name, K=int(K), **overrides)
        # QPE does not depend on K, so it is run once
        out[int(K)] = run_figure3(cfg, ("MMQCELS", "QPE") if i == 0 else ("MMQCELS",))
    return out


@dataclass
class LandscapeResult:
    rows: list  # tuples in LANDSCAPE_HEADER order
    minimizers: dict  # level -> (trials, 2) array of matched (theta1*, theta2*)
    T: dict  # level -> T_j


def run_landscape(cfg: ExperimentConfig) -> LandscapeResult:
    """Loss slices L(r*, theta1, theta2*) and L(r*, theta1*, theta2) plus minimizers per level and trial."""
    if cfg.K != 2:
        raise ConfigError("the landscape experiment needs K = 2")
    spectrum = cfg.build_spectrum()
    dom = cfg.dominant_spec()
    if dom.K != 2:
        raise ConfigError("the landscape experiment needs two dominant modes")
    levels = sorted(int(j) for j in cfg.landscape.levels)
    sched = cfg.build_schedule(spectrum)
    if levels[0] < 0 or levels[-1] > sched.l:
        raise ConfigError(f"landscape levels must lie in 0..{sched.l}")
    truth = spectrum.eigenvalues[list(dom.indices)]
    pad = cfg.landscape.margin / sched.T[max(levels[0], 0)]
    grid = np.linspace(truth.min() - pad, truth.max() + pad, cfg.landscape.points)
    rows = []
    mins = {j: [] for j in levels}
    for trial in range(cfg.trials):
        s, res = mmqcels_trial(cfg, spectrum, sched, trial)
        for j in levels:
            lev = res.levels[j]
            est = lev.estimate
            # orient the pair so that theta[k] is the estimate matched to truth[k]
            theta = est.theta
            r = est.r
            if abs(theta[0] - truth[1]) + abs(theta[1] - truth[0]) < abs(theta[0] - truth[0]) + abs(theta[1] - truth[1]):
                theta, r = theta[::-1], r[::-1]
            mins[j].append(theta.copy())
            rows.append((j, lev.T, trial, s, "minimizer", theta[0], theta[1], est.loss))
            data = _level_dataset(cfg, spectrum, sched, s, j)
            for x in grid:
                rows.append((j, lev.T, trial, s, "slice1", x, theta[1], loss(data, r, [x, theta[1]])))
            for x in grid:
                rows.append((j, lev.T, trial, s, "slice2", theta[0], x, loss(data, r, [theta[0], x])))
    return LandscapeResult(rows, {j: np.array(v) for j, v in mins.items()}, {j: sched.T[j] for j in levels})


def _level_dataset(cfg, spectrum, sched, seed, j):
    # identical to the dataset the driver drew at level j (same key)
    return generate_dataset(
        spectrum, TimeDensity(sched.T[j], sched.gamma), sched.N[j], seed=seed, key=(0, j), noiseless=cfg.noiseless
    )


# ---------------------------------------------------------------------------
# output and analysis helpers


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in sorted(records, key=BenchRecord.sort_key):
        w.writerow(rec.row())
    return buf.getvalue()


def write_csv(records: Sequence[BenchRecord], path) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8")


def read_csv(path) -> list:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        r = csv.DictReader(fh)
        if tuple(r.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {r.fieldnames}")
        for row in r:
            errs = [float(row[k]) for k in ("err_mode1", "err_mode2") if row[k] != ""]
            out.append(
                BenchRecord(
                    row["method"],
                    int(row["trial"]),
                    int(row["seed"]),
                    float(row["t_max"]),
                    float(row["t_total"]),
                    float(row["error"]),
                    errs,
                )
            )
    return out


def landscape_to_csv(result: LandscapeResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LANDSCAPE_HEADER)
    for row in result.rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def median_curve(records: Sequence[BenchRecord], method: str, stat=np.median) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(t_max, statistic of error, statistic of t_total) per distinct t_max for one method."""
    recs = [r for r in records if r.method == method]
    tm = np.array(sorted({r.t_max for r in recs}))
    err = np.array([stat([r.error for r in recs if r.t_max == t]) for t in tm])
    tot = np.array([stat([r.t_total for r in recs if r.t_max == t]) for t in tm])
    return tm, err, tot


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def inverse_fit_constant(t_max, err) -> float:
    """Least-squares c in log err = log c - log t_max (slope pinned at -1)."""
    t_max, err = np.asarray(t_max, dtype=float), np.asarray(err, dtype=float)
    ok = (t_max > 0) & (err > 0)
    return float(np.exp(np.mean(np.log(err[ok] * t_max[ok]))))


def depth_at_error(t_max, err, target: float) -> float:
    """T_max at which the fitted power law log err = a + b log T crosses `target`."""
    t_max, err = np.asarray(t_max, dtype=float), np.asarray(err, dtype=float)
    ok = (t_max > 0) & (err > 0)
    b, a = np.polyfit(np.log(t_max[ok]), np.log(err[ok]), 1)
    return float(np.exp((math.log(target) - a) / b))


def crossing_depth(t_max, err, target: float) -> float:
    """First T_max where the error curve drops to `target`, log-log interpolated; nan if never."""
    t_max, err = np.asarray(t_max, dtype=float), np.asarray(err, dtype=float)
    order = np.argsort(t_max)
    t_max, err = t_max[order], err[order]
    below = np.nonzero(err <= target)[0]
    if below.size == 0:
        return math.nan
    i = int(below[0])
    if i == 0:
        return float(t_max[0])
    x0, x1 = math.log(t_max[i - 1]), math.log(t_max[i])
    y0, y1 = math.log(err[i - 1]), math.log(err[i])
    return float(math.exp(x0 + (math.log(target) - y0) * (x1 - x0) / (y1 - y0)))


def write_gnuplot(records: Sequence[BenchRecord], prefix) -> tuple[Path, Path]:
    """Median curves as gnuplot data blocks plus a log-log plotting script."""
    prefix = Path(prefix)
    dat = prefix.with_suffix(".dat")
    gp = prefix.with_suffix(".gp")
    methods = sorted({r.method for r in records})
    blocks = []
    for m in methods:
        tm, err, tot = median_curve(records, m)
        lines = [f"# {m}: t_max median_error median_t_total"]
        lines += [f"{a!r} {b!r} {c!r}" for a, b, c in zip(tm, err, tot)]
        blocks.append("\n".join(lines))
    dat.write_text("\n\n\n".join(blocks) + "\n", encoding="utf-8")
    plots = ", ".join(f"'{dat.name}' index {i} using 1:2 with linespoints title '{m}'" for i, m in enumerate(methods))
    gp.write_text(
        "set logscale xy\nset xlabel 'T_max'\nset ylabel 'error'\nset key top right\n" f"plot {plots}\n",
        encoding="utf-8",
    )
    return dat, gp
