"""Multi-modal multi-level complex exponential least squares.

The loss over (r, theta) is quadratic in r, so every search below works on the
profile loss  min_r L_K(r, theta) = mean|Z|^2 - b^H G^{-1} b  with

    G_kl = mean_n exp(i (theta_k - theta_l) t_n),   b_k = mean_n Z_n exp(i theta_k t_n).

Per level the theta search is a dense grid (full Cartesian product for small
K, coordinate sweeps otherwise) followed by bounded Nelder-Mead refinement.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .sampling import Dataset, RuntimeLedger, TimeDensity, filter_value, generate_dataset, signal_expectation
from .spectral import DominantSpec, Spectrum, SpectrumStats

TWO_PI = 2.0 * math.pi
_EXP_BUDGET = 1 << 22  # complex entries per temporary exp(i x t) block


class DegenerateModeError(ArithmeticError):
    """Two modes coincide and the Gram matrix is singular."""


class ScheduleError(ValueError):
    pass


@dataclass
class ModeEstimate:
    r: np.ndarray
    theta: np.ndarray
    intervals: np.ndarray  # shape (K, 2)
    loss: float = float("nan")

    @property
    def K(self) -> int:
        return self.theta.size

    def to_dict(self, ledger: RuntimeLedger | None = None) -> dict:
        d = {
            "theta": self.theta.tolist(),
            "r_re": self.r.real.tolist(),
            "r_im": self.r.imag.tolist(),
            "intervals": self.intervals.tolist(),
            "t_max": None,
            "t_total": None,
            "loss": self.loss,
        }
        if ledger is not None:
            d["t_max"] = ledger.t_max
            d["t_total"] = ledger.t_total
        return d

    def to_json(self, ledger: RuntimeLedger | None = None) -> str:
        return json.dumps(self.to_dict(ledger))

    @classmethod
    def from_dict(cls, d: dict) -> "ModeEstimate":
        r = np.asarray(d["r_re"], dtype=float) + 1j * np.asarray(d["r_im"], dtype=float)
        return cls(r, np.asarray(d["theta"], dtype=float), np.asarray(d["intervals"], dtype=float), d.get("loss", float("nan")))


@dataclass
class SearchConfig:
    points: int = 200  # grid cells per interval width
    step_per_T: float = 0.25  # grid step is also capped at step_per_T / T
    refine_starts: int = 5
    max_product: int = 600_000  # largest Cartesian grid before switching to coordinate sweeps
    max_sweeps: int = 8
    strategy: str = "auto"  # "auto", "grid" or "coordinate"
    refine: bool = True
    xatol: float = 1e-10
    fatol: float = 1e-15


@dataclass
class Schedule:
    gamma: float
    T0: float
    N0: int
    l: int
    T: list
    N: list
    epsilon: float | None = None
    eta: float | None = None
    zeta: float | None = None
    q: float | None = None
    constraint_l1: bool = False

    def __post_init__(self):
        if self.l < 0:
            raise ScheduleError("l must be nonnegative")
        if len(self.T) != self.l + 1 or len(self.N) != self.l + 1:
            raise ScheduleError("T and N need one entry per level 0..l")

    @property
    def t_max_bound(self) -> float:
        return self.gamma * self.T[-1]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DiagnosticsReport:
    e_pr: float
    e_rr: float
    e_rz: float
    mean_noise: float
    loss_at_optimum: float
    loss_at_truth: float | None = None


@dataclass
class LevelResult:
    j: int
    T: float
    N: int
    estimate: ModeEstimate
    ledger: RuntimeLedger
    t_bound: float
    t_total_cumulative: float


@dataclass
class MMQCELSResult:
    estimate: ModeEstimate
    levels: list
    ledger: RuntimeLedger
    schedule: Schedule
    diagnostics: DiagnosticsReport | None = None
    final_dataset: Dataset | None = field(default=None, repr=False)


# ---------------------------------------------------------------------------
# loss and the r-subproblem


def _mean_exp(x, t: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """mean_n w_n exp(i x t_n) for every entry of x."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty(flat.size, dtype=complex)
    N = t.size
    step = max(1, _EXP_BUDGET // max(N, 1))
    for s in range(0, flat.size, step):
        e = np.exp(1j * np.outer(flat[s : s + step], t))
        out[s : s + step] = (e @ w) / N if w is not None else e.sum(axis=1) / N
    return out.reshape(x.shape)


def loss(dataset: Dataset, r, theta) -> float:
    """(1/N) sum_n |Z_n - sum_k r_k exp(-i theta_k t_n)|^2."""
    if dataset.N == 0:
        raise ValueError("empty dataset")
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if r.shape != theta.shape:
        raise ValueError("r and theta must have the same length")
    model = np.exp(-1j * np.outer(dataset.t, theta)) @ r
    return float(np.mean(np.abs(dataset.z - model) ** 2))


def gram_system(dataset: Dataset, theta) -> tuple[np.ndarray, np.ndarray]:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    G = _mean_exp(theta[:, None] - theta[None, :], dataset.t)
    G = 0.5 * (G + G.conj().T)
    b = _mean_exp(theta, dataset.t, dataset.z)
    return G, b


def project_l1_ball(r: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Euclidean projection of a complex vector onto {sum |r_k| <= radius}."""
    mag = np.abs(r)
    if mag.sum() <= radius:
        return r.copy()
    u = np.sort(mag)[::-1]
    css = np.cumsum(u)
    k = np.arange(1, u.size + 1)
    rho = np.nonzero(u * k > css - radius)[0][-1]
    tau = (css[rho] - radius) / (rho + 1.0)
    new = np.maximum(mag - tau, 0.0)
    phase = np.where(mag > 0, r / np.where(mag > 0, mag, 1.0), 0.0)
    return new * phase


def _l1_constrained(G: np.ndarray, b: np.ndarray, r0: np.ndarray, iters: int = 20000) -> np.ndarray:
    # accelerated projected gradient on r^H G r - 2 Re(r^H b)
    L = 2.0 * np.linalg.eigvalsh(G).max()
    x = project_l1_ball(r0)
    y, tk = x.copy(), 1.0
    for _ in range(iters):
        x_new = project_l1_ball(y - 2.0 * (G @ y - b) / L)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        y = x_new + ((tk - 1.0) / t_new) * (x_new - x)
        if np.linalg.norm(x_new - x) < 1e-15:
            x = x_new
            break
        x, tk = x_new, t_new
    return x


def solve_r_given_theta(dataset: Dataset, theta, constraint_l1: bool = False, cond_tol: float = 1e-12) -> np.ndarray:
    """Minimizer over r of the loss at fixed theta (normal equations G r = b)."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size > dataset.N:
        raise DegenerateModeError("more modes than samples")
    G, b = gram_system(dataset, theta)
    if np.linalg.eigvalsh(G).min() < cond_tol:
        raise DegenerateModeError(f"singular Gram matrix at theta={theta.tolist()}")
    r = np.linalg.solve(G, b)
    if constraint_l1 and np.abs(r).sum() > 1.0:
        r = _l1_constrained(G, b, r)
    return r


def _quadratic_loss(mz: float, G, b, r) -> float:
    return float(mz - 2.0 * np.real(np.vdot(r, b)) + np.real(np.vdot(r, G @ r)))


# ---------------------------------------------------------------------------
# theta search


def _grids(intervals: np.ndarray, T: float, cfg: SearchConfig) -> tuple[list, float]:
    widths = intervals[:, 1] - intervals[:, 0]
    h = min(widths.max() / cfg.points, cfg.step_per_T / T)
    grids = []
    for lo, hi in intervals:
        n = int(math.floor((hi - lo) / h + 1e-9)) + 1
        grids.append(lo + h * np.arange(n))
    return grids, h


def _top_candidates(profile: np.ndarray, k: int, radius: int = 2) -> list:
    """Indices of the k best grid points with non-maximum suppression."""
    order = np.argsort(profile, axis=None, kind="stable")
    picked: list = []
    shape = profile.shape
    for flat in order:
        if not np.isfinite(profile.flat[flat]):
            break
        idx = np.unravel_index(flat, shape)
        if all(max(abs(a - b) for a, b in zip(idx, p)) > radius for p in picked):
            picked.append(idx)
            if len(picked) == k:
                break
    return picked


def _grid_k1(data: Dataset, grid, constraint_l1: bool, mz: float) -> np.ndarray:
    b = _mean_exp(grid, data.t, data.z)
    prof = mz - np.abs(b) ** 2
    if constraint_l1:
        over = np.abs(b) > 1
        r = np.where(over, b / np.maximum(np.abs(b), 1e-300), b)
        prof = np.where(over, mz - 2 * np.real(np.conj(r) * b) + np.abs(r) ** 2, prof)
    return prof


def _grid_k2(data: Dataset, g1, g2, h: float, same: bool, constraint_l1: bool, mz: float) -> np.ndarray:
    b1 = _mean_exp(g1, data.t, data.z)
    b2 = b1 if same else _mean_exp(g2, data.t, data.z)
    n1, n2 = g1.size, g2.size
    # G12 depends on theta1 - theta2 only; both grids share the step h
    m = np.arange(-(n2 - 1), n1)
    phi = _mean_exp((g1[0] - g2[0]) + m * h, data.t)
    prof = np.full((n1, n2), np.inf)
    cols = np.arange(n2)
    rows_per = max(1, (1 << 21) // max(n2, 1))
    for s in range(0, n1, rows_per):
        rows = np.arange(s, min(s + rows_per, n1))
        G12 = phi[rows[:, None] - cols[None, :] + (n2 - 1)]
        B1 = b1[rows][:, None]
        B2 = b2[None, :]
        det = 1.0 - np.abs(G12) ** 2
        ok = det > 1e-9
        safe = np.where(ok, det, 1.0)
        quad = (np.abs(B1) ** 2 + np.abs(B2) ** 2 - 2.0 * np.real(np.conj(B1) * G12 * B2)) / safe
        block = mz - quad
        if constraint_l1:
            r1 = (B1 - G12 * B2) / safe
            r2 = (B2 - np.conj(G12) * B1) / safe
            s1 = np.abs(r1) + np.abs(r2)
            over = s1 > 1
            if np.any(over):
                sc = np.where(over, 1.0 / np.maximum(s1, 1e-300), 1.0)
                r1, r2 = r1 * sc, r2 * sc
                alt = (
                    mz
                    - 2 * np.real(np.conj(r1) * B1 + np.conj(r2) * B2)
                    + np.abs(r1) ** 2
                    + np.abs(r2) ** 2
                    + 2 * np.real(np.conj(r1) * G12 * r2)
                )
                block = np.where(over, alt, block)
        # coincident modes: the pair collapses to a single-mode fit
        single = mz - np.maximum(np.abs(B1) ** 2, np.abs(B2) ** 2)
        block = np.where(ok, block, single)
        if same:
            block = np.where(rows[:, None] < cols[None, :], block, np.inf)
        prof[rows] = block
    return prof


def _batched_profile(mz, G, b, constraint_l1):
    """Profile loss for a batch of (G, b) systems; singular systems get +inf."""
    try:
        r = np.linalg.solve(G, b[..., None])[..., 0]
    except np.linalg.LinAlgError:
        r = np.stack([np.linalg.lstsq(Gi, bi, rcond=None)[0] for Gi, bi in zip(G, b)])
    val = mz - np.real(np.sum(np.conj(b) * r, axis=1))
    if constraint_l1:
        s = np.abs(r).sum(axis=1)
        over = s > 1
        if np.any(over):
            rs = r[over] / s[over][:, None]
            Gr = np.einsum("nkl,nl->nk", G[over], rs)
            val[over] = mz - 2 * np.real(np.sum(np.conj(rs) * b[over], axis=1)) + np.real(np.sum(np.conj(rs) * Gr, axis=1))
    return np.where(np.isfinite(val), val, np.inf)


def _coordinate_search(data: Dataset, grids, theta0, active0: int, h: float, constraint_l1: bool, mz: float, cfg: SearchConfig):
    """Greedy activation of modes followed by cyclic coordinate sweeps over each grid.

    Modes 0..active0-1 start at theta0; the rest are added one at a time, each
    placed at its best grid point given the modes already active.
    """
    K = len(grids)
    t, z = data.t, data.z
    bgrid = [_mean_exp(g, t, z) for g in grids]
    theta = np.array(theta0, dtype=float)
    bfix = _mean_exp(theta, t, z)

    def scan(k, active):
        g = grids[k]
        others = [l for l in active if l != k]
        idx = [k] + others
        n = g.size
        G = np.empty((n, len(idx), len(idx)), dtype=complex)
        b = np.empty((n, len(idx)), dtype=complex)
        b[:, 0] = bgrid[k]
        G[:, 0, 0] = 1.0
        bad = np.zeros(n, dtype=bool)
        for a, l in enumerate(others, start=1):
            col = _mean_exp(g - theta[l], t)
            G[:, 0, a] = col
            G[:, a, 0] = np.conj(col)
            b[:, a] = bfix[l]
            bad |= 1.0 - np.abs(col) ** 2 < 1e-9
            for c, l2 in enumerate(others, start=1):
                G[:, a, c] = _mean_exp(theta[l] - theta[l2], t) if c != a else 1.0
        prof = _batched_profile(mz, G, b, constraint_l1)
        prof[bad] = np.inf
        return prof

    active = list(range(active0))
    for k in range(active0, K):
        prof = scan(k, active + [k])
        i = int(np.argmin(prof))
        theta[k] = grids[k][i]
        bfix[k] = bgrid[k][i]
        active.append(k)
    best = np.inf
    for _ in range(cfg.max_sweeps):
        changed = False
        for k in range(K):
            prof = scan(k, active)
            i = int(np.argmin(prof))
            if prof[i] < best - 1e-15 and abs(grids[k][i] - theta[k]) > 0.5 * h:
                changed = True
            best = min(best, prof[i])
            theta[k] = grids[k][i]
            bfix[k] = bgrid[k][i]
        if not changed:
            break
    return theta, best


def _profile_at(data: Dataset, theta, constraint_l1: bool, mz: float) -> float:
    G, b = gram_system(data, theta)
    w = np.linalg.eigvalsh(G)
    if w.min() < 1e-12:
        return math.inf
    r = np.linalg.solve(G, b)
    if constraint_l1 and np.abs(r).sum() > 1:
        r = _l1_constrained(G, b, r)
    return _quadratic_loss(mz, G, b, r)


def _separate(theta: np.ndarray, width: float, intervals: np.ndarray) -> np.ndarray:
    theta = theta.copy()
    for _ in range(theta.size):
        order = np.argsort(theta)
        d = np.diff(theta[order])
        hit = np.nonzero(d < 1e-10)[0]
        if hit.size == 0:
            break
        k = order[hit[0] + 1]
        nudged = theta[k] + width / 1000.0
        if nudged > intervals[k, 1]:
            nudged = theta[k] - width / 1000.0
        theta[k] = nudged
    return theta


def minimize_level(
    dataset: Dataset,
    intervals,
    constraint_l1: bool = False,
    search: SearchConfig | None = None,
) -> ModeEstimate:
    """Minimize the loss with theta_k restricted to intervals[k]."""
    cfg = search or SearchConfig()
    if dataset.N == 0:
        raise ValueError("empty dataset")
    intervals = np.atleast_2d(np.asarray(intervals, dtype=float))
    if np.any(intervals[:, 1] <= intervals[:, 0]):
        raise ValueError("intervals must be nonempty")
    K = intervals.shape[0]
    mz = float(np.mean(np.abs(dataset.z) ** 2))
    grids, h = _grids(intervals, dataset.density.T, cfg)
    same = bool(np.all(intervals == intervals[0]))

    sizes = [g.size for g in grids]
    product = math.prod(sizes) / (math.factorial(K) if same else 1)
    strategy = cfg.strategy
    if strategy == "auto":
        strategy = "grid" if K <= 2 and product <= cfg.max_product else "coordinate"
    if strategy == "grid" and K > 2:
        raise ValueError("full grid search is implemented for K <= 2")

    starts = []
    if strategy == "grid":
        if K == 1:
            prof = _grid_k1(dataset, grids[0], constraint_l1, mz)
        else:
            prof = _grid_k2(dataset, grids[0], grids[1], h, same, constraint_l1, mz)
        for idx in _top_candidates(prof, cfg.refine_starts):
            starts.append((np.array([grids[k][i] for k, i in enumerate(idx)]), float(prof[idx])))
    else:
        if same:
            theta0, active0 = np.zeros(K), 0
        else:
            theta0 = np.array([g[np.argmin(np.abs(g - 0.5 * (lo + hi)))] for g, (lo, hi) in zip(grids, intervals)])
            active0 = K
        theta, val = _coordinate_search(dataset, grids, theta0, active0, h, constraint_l1, mz, cfg)
        starts.append((theta, val))

    best_theta, best_val = min(starts, key=lambda s: (s[1], tuple(s[0])))
    if cfg.refine:
        width = float((intervals[:, 1] - intervals[:, 0]).max())
        bounds = [tuple(iv) for iv in intervals]

        def f(th):
            th = np.clip(th, intervals[:, 0], intervals[:, 1])
            return _profile_at(dataset, _separate(th, width, intervals), constraint_l1, mz)

        for th0, _ in starts:
            th0 = np.clip(th0, intervals[:, 0], intervals[:, 1])
            simplex = np.vstack([th0] + [th0 + h * np.eye(K)[k] * (1 if th0[k] + h <= intervals[k, 1] else -1) for k in range(K)])
            res = minimize(
                f,
                th0,
                method="Nelder-Mead",
                bounds=bounds,
                options={"initial_simplex": simplex, "xatol": cfg.xatol, "fatol": cfg.fatol, "maxfev": 600 * K},
            )
            th = np.clip(res.x, intervals[:, 0], intervals[:, 1])
            val = f(th)
            if val < best_val or (val == best_val and tuple(th) < tuple(best_theta)):
                best_theta, best_val = _separate(th, width, intervals), val

    r = solve_r_given_theta(dataset, best_theta, constraint_l1)
    return ModeEstimate(r, np.asarray(best_theta, dtype=float), intervals.copy(), loss(dataset, r, best_theta))


# ---------------------------------------------------------------------------
# schedule


# smallest integer giving N_j >= 2000 at p_min = 0.4, q = 0.9, eta = zeta = 0.1
N_J_CONSTANT = 14.0


def build_schedule(
    stats: SpectrumStats,
    epsilon: float | None = None,
    eta: float = 0.1,
    zeta: float = 0.1,
    *,
    gamma: float | None = None,
    T0: float | None = None,
    N0: int | None = None,
    Nj: int | Sequence[int] | None = None,
    l: int | None = None,
    q: float | None = None,
    constraint_l1: bool = False,
) -> Schedule:
    """Parameter schedule with default constants; any keyword overrides its field.

    Defaults (all Theta-constants set to simple values):
      q     = min(0.9, 3 R/p_min + 0.05)
      gamma = max(1, ln(1 / min(p_min q, p_min (p_min - 3R))))
      T0    = 2 max(1, ln(1/q)) / Delta   (Delta = 1 when K = 1)
      N0    = ceil(T0^2 (p_min (p_min - 3R))^-2 ln(1/eta))
      N_j   = ceil(14 p_min^-4 q^-(2 + zeta) ln(ln(1/zeta)/eta)) for j >= 1
      l     = max(ceil(log2(q / (epsilon T0))), 1)
    gamma and N0 depend on p_min - 3R, so they must be given explicitly when
    p_min <= 3R.
    """
    p, R = stats.p_min_K, stats.residual_R_K
    dominated = p > 3 * R
    if not dominated and (gamma is None or N0 is None):
        raise ScheduleError(
            f"p_min={p:.4g} <= 3R={3 * R:.4g}: the default constants do not apply, pass gamma and N0 explicitly"
        )
    if q is None:
        q = min(0.9, 3 * R / p + 0.05)
    if not 0 < q < 1:
        raise ScheduleError("q must lie in (0, 1)")
    if gamma is None:
        gamma = max(1.0, math.log(1.0 / min(p * q, p * (p - 3 * R))))
    if T0 is None:
        gap = stats.delta_lambda_K if math.isfinite(stats.delta_lambda_K) else 1.0
        T0 = 2.0 * max(1.0, math.log(1.0 / q)) / gap
    if N0 is None:
        N0 = math.ceil(T0**2 * (p * (p - 3 * R)) ** -2 * math.log(1.0 / eta))
    if l is None:
        if epsilon is None:
            raise ScheduleError("need epsilon or an explicit number of levels l")
        l = max(math.ceil(math.log2(q / (epsilon * T0)) - 1e-12), 1)
    if Nj is None:
        Nj = math.ceil(N_J_CONSTANT * p**-4 * q ** (-2 - zeta) * math.log(math.log(1.0 / zeta) / eta))
    if isinstance(Nj, (int, np.integer)):
        Ns = [int(N0)] + [int(Nj)] * l
    else:
        Nj = [int(n) for n in Nj]
        if len(Nj) != l:
            raise ScheduleError("Nj list needs one entry per level 1..l")
        Ns = [int(N0)] + Nj
    Ts = [T0 * 2.0**j for j in range(l + 1)]
    return Schedule(
        gamma=float(gamma),
        T0=float(T0),
        N0=int(N0),
        l=int(l),
        T=Ts,
        N=Ns,
        epsilon=epsilon,
        eta=eta,
        zeta=zeta,
        q=float(q),
        constraint_l1=constraint_l1,
    )


# ---------------------------------------------------------------------------
# driver

DataSource = Callable[[TimeDensity, int, int, tuple], Dataset]


def spectrum_source(spectrum: Spectrum, noiseless: bool = False, repeats: int = 1) -> DataSource:
    def source(density, N, seed, key):
        return generate_dataset(spectrum, density, N, seed=seed, key=key, repeats=repeats, noiseless=noiseless)

    return source


def mm_qcels(
    source,
    schedule: Schedule,
    K: int,
    seed: int = 0,
    key: tuple = (),
    search: SearchConfig | None = None,
    dominant: DominantSpec | None = None,
    noiseless: bool = False,
) -> MMQCELSResult:
    """Run every level of the schedule, shrinking each search interval to theta* +- pi/T_j.

    `source` is either a Spectrum (data simulated with Hadamard shots) or a
    callable (density, N, seed, key) -> Dataset.  Each level draws a fresh
    dataset keyed by key + (j,).
    """
    if K < 1:
        raise ValueError("K must be positive")
    spectrum = source if isinstance(source, Spectrum) else None
    draw = spectrum_source(source, noiseless) if spectrum is not None else source
    intervals = np.tile([-math.pi, math.pi], (K, 1))
    ledger = RuntimeLedger()
    levels = []
    data = None
    est = None
    for j in range(schedule.l + 1):
        density = TimeDensity(schedule.T[j], schedule.gamma)
        data = draw(density, schedule.N[j], seed, tuple(key) + (j,))
        est = minimize_level(data, intervals, schedule.constraint_l1, search)
        ledger.add(data.ledger)
        levels.append(
            LevelResult(j, schedule.T[j], schedule.N[j], est, data.ledger, schedule.gamma * schedule.T[j], ledger.t_total)
        )
        half = math.pi / schedule.T[j]
        intervals = np.clip(np.column_stack([est.theta - half, est.theta + half]), -math.pi, math.pi)
    diag = None
    if spectrum is not None:
        diag = expectation_error_diagnostics(data, spectrum, est, dominant)
    return MMQCELSResult(est, levels, ledger, schedule, diag, data)


# ---------------------------------------------------------------------------
# diagnostics


def expectation_error_terms(dataset: Dataset, spectrum: Spectrum, r, theta) -> tuple[float, float, float]:
    """Signed noise terms splitting the empirical loss from the ideal one.

    L_K(r, theta) - ideal(r, theta) - (E_pr + E_rr + E_rz) does not depend on
    (r, theta); E_pr collects the empirical-vs-filter error of the signal/model
    cross term, E_rr that of the model/model cross term and E_rz the shot noise.
    """
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    t = dataset.t
    F = dataset.density.filter()
    lam, p = spectrum.eigenvalues, spectrum.overlaps
    d_pm = lam[:, None] - theta[None, :]
    emp = _mean_exp(d_pm, t)
    e_pr = -2.0 * np.real(np.sum(p[:, None] * r[None, :] * (emp - filter_value(F, d_pm))))
    d_kk = theta[:, None] - theta[None, :]
    emp_kk = _mean_exp(d_kk, t)
    off = ~np.eye(theta.size, dtype=bool)
    cross = np.conj(r)[:, None] * r[None, :] * (emp_kk - filter_value(F, d_kk))
    e_rr = float(np.real(np.sum(cross[off])))
    E = dataset.z - signal_expectation(spectrum, t)
    e_rz = -2.0 * np.real(np.sum(np.conj(r) * _mean_exp(theta, t, E)))
    return float(e_pr), e_rr, float(e_rz)


def ideal_loss(spectrum: Spectrum, density: TimeDensity, r, theta) -> float:
    """Expected loss over a(t) for noiseless data: W - 2 Re sum p_m r_k F(lambda_m - theta_k) + r^H U r."""
    r = np.atleast_1d(np.asarray(r, dtype=complex))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    F = density.filter()
    lam, p = spectrum.eigenvalues, spectrum.overlaps
    W = float(p @ filter_value(F, lam[:, None] - lam[None, :]) @ p)
    V = filter_value(F, lam[:, None] - theta[None, :])
    U = filter_value(F, theta[:, None] - theta[None, :])
    return W - 2.0 * float(np.real(np.sum(p[:, None] * r[None, :] * V))) + float(np.real(np.conj(r) @ U @ r))


def expectation_error_diagnostics(
    dataset: Dataset, spectrum: Spectrum, estimate: ModeEstimate, dominant: DominantSpec | None = None
) -> DiagnosticsReport:
    e_pr, e_rr, e_rz = expectation_error_terms(dataset, spectrum, estimate.r, estimate.theta)
    E = dataset.z - signal_expectation(spectrum, dataset.t)
    at_truth = None
    if dominant is not None and dominant.K == estimate.K:
        idx = list(dominant.indices)
        at_truth = loss(dataset, spectrum.overlaps[idx], spectrum.eigenvalues[idx])
    return DiagnosticsReport(
        e_pr=abs(e_pr),
        e_rr=abs(e_rr),
        e_rz=abs(e_rz),
        mean_noise=float(abs(E.mean())),
        loss_at_optimum=loss(dataset, estimate.r, estimate.theta),
        loss_at_truth=at_truth,
    )
