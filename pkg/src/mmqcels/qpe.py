"""Textbook quantum phase estimation baseline.

With d ancilla bits and controlled powers of U = exp(-iH) up to 2^(d-1), an
eigenphase phi = lambda / (2 pi) yields outcome j with probability
K_d(j / 2^d - phi), where K_d is the Fejer kernel.  A spectrum gives the
p-weighted mixture.  The ground-energy estimate is the minimum phase over
N_rep repetitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import RuntimeLedger
from .spectral import Spectrum

MAX_EXACT_BITS = 24


@dataclass(frozen=True)
class QpeConfig:
    d: int
    repetitions: int = 10
    # known energy shift applied to H before QPE and removed after readout;
    # moves the eigenphases off the 2^-d lattice without changing the physics
    phase_shift: float = 0.0

    def __post_init__(self):
        if not 1 <= self.d <= MAX_EXACT_BITS:
            raise ValueError(f"d must lie in 1..{MAX_EXACT_BITS}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")

    @property
    def t_max(self) -> int:
        return 2**self.d - 1

    @property
    def t_total(self) -> int:
        return self.repetitions * self.t_max


def fejer_kernel(delta, d: int):
    """sin^2(2^d pi delta) / (2^2d sin^2(pi delta)), equal to 1 at integer delta."""
    delta = np.asarray(delta, dtype=float)
    frac = delta - np.round(delta)
    J = 2.0**d
    s = np.sin(math.pi * frac)
    small = np.abs(s) < 1e-300
    with np.errstate(invalid="ignore", divide="ignore"):
        val = (np.sin(J * math.pi * frac) / (J * np.where(small, 1.0, s))) ** 2
    out = np.where(small, 1.0, val)
    return out if out.ndim else float(out)


def _mode_table(phi: float, d: int) -> np.ndarray:
    J = 2**d
    return fejer_kernel(np.arange(J) / J - phi, d)


def qpe_distribution(spectrum: Spectrum, d: int, phase_shift: float = 0.0) -> np.ndarray:
    """Outcome probabilities Pr(j), j = 0..2^d - 1."""
    if not 1 <= d <= MAX_EXACT_BITS:
        raise ValueError(f"d must lie in 1..{MAX_EXACT_BITS}")
    phis = (spectrum.eigenvalues + phase_shift) / (2 * math.pi)
    J = 2**d
    out = np.zeros(J)
    grid = np.arange(J) / J
    step = max(1, (1 << 22) // J)
    for s in range(0, phis.size, step):
        ph = phis[s : s + step]
        out += spectrum.overlaps[s : s + step] @ fejer_kernel(grid[None, :] - ph[:, None], d)
    return out


def outcome_to_phase(j, d: int):
    """Map outcome j to 2 pi j / 2^d wrapped into [-pi, pi)."""
    theta = 2 * math.pi * np.asarray(j, dtype=float) / 2**d
    return np.where(theta >= math.pi, theta - 2 * math.pi, theta)


def sample_qpe(spectrum: Spectrum, cfg: QpeConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw cfg.repetitions outcomes: pick an eigenmode by overlap, then invert its kernel CDF."""
    modes = rng.choice(spectrum.M, size=cfg.repetitions, p=spectrum.overlaps)
    u = rng.random(cfg.repetitions)
    out = np.empty(cfg.repetitions, dtype=np.int64)
    J = 2**cfg.d
    for m in np.unique(modes):
        sel = modes == m
        phi = (spectrum.eigenvalues[m] + cfg.phase_shift) / (2 * math.pi)
        cdf = np.cumsum(_mode_table(phi, cfg.d))
        cdf /= cdf[-1]
        out[sel] = np.minimum(np.searchsorted(cdf, u[sel], side="right"), J - 1)
    return out


def qpe_estimate_min(spectrum: Spectrum, cfg: QpeConfig, rng: np.random.Generator) -> tuple[float, RuntimeLedger]:
    """Minimum read-out phase over the repetitions, as a ground-energy estimate."""
    j = sample_qpe(spectrum, cfg, rng)
    theta = outcome_to_phase(j, cfg.d) - cfg.phase_shift
    ledger = RuntimeLedger(t_max=float(cfg.t_max), t_total=float(cfg.t_total), shots=cfg.repetitions)
    return float(theta.min()), ledger
