"""Hadamard-test data generation.

Times are drawn from a Gaussian of width T truncated to [-gamma T, gamma T];
each time is measured once in the real and once in the imaginary basis,
giving Z_n = X_n + i Y_n with X_n, Y_n in {-1, +1}.

Randomness is keyed: ``substream(seed, *key)`` returns an independent
generator for each key tuple, and datasets are produced block by block with
the block index appended to the key, so any block can be regenerated (or
generated in parallel) without touching the others.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf, wofz

from .spectral import Spectrum

BLOCK_SIZE = 1024


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class TimeDensity:
    T: float
    gamma: float = 1.0

    def __post_init__(self):
        if not (self.T > 0 and self.gamma > 0):
            raise ValueError("T and gamma must be positive")

    @property
    def A_gamma(self) -> float:
        return float(erf(self.gamma / math.sqrt(2.0)))

    @property
    def t_bound(self) -> float:
        return self.gamma * self.T

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        val = np.exp(-0.5 * (t / self.T) ** 2) / (self.A_gamma * math.sqrt(2 * math.pi) * self.T)
        return np.where(np.abs(t) <= self.t_bound, val, 0.0)

    def filter(self) -> "Filter":
        return Filter(self.T, self.gamma)


@dataclass(frozen=True)
class Filter:
    """Fourier transform F(x) = E[exp(i x t)] of the truncated Gaussian time density."""

    T: float
    gamma: float = 1.0

    def __call__(self, x):
        return filter_value(self, x)


def filter_value(filt: Filter, x):
    """Closed form of F via the Faddeeva function w(z) = exp(-z^2) erfc(-iz).

    With y = xT:  A_gamma F = exp(-y^2/2) - Re[exp(-gamma^2/2 + i gamma y) w((y + i gamma)/sqrt 2)].
    w is evaluated in the upper half plane where it is bounded, so there is no
    cancellation for large |y| and the sinc-like truncation tail is kept.
    """
    x = np.asarray(x, dtype=float)
    y = np.abs(x) * filt.T
    g = filt.gamma
    A = erf(g / math.sqrt(2.0))
    tail = np.real(np.exp(-0.5 * g * g + 1j * g * y) * wofz((y + 1j * g) / math.sqrt(2.0)))
    out = (np.exp(-0.5 * y * y) - tail) / A
    return out if out.ndim else float(out)


def draw_times(density: TimeDensity, size: int, rng: np.random.Generator) -> np.ndarray:
    """Rejection sampling from N(0, T^2) restricted to |t| <= gamma T."""
    out = np.empty(size)
    filled = 0
    bound = density.gamma
    # acceptance rate is A_gamma; oversample so one pass usually suffices
    rate = max(density.A_gamma, 1e-3)
    while filled < size:
        need = size - filled
        u = rng.standard_normal(int(need / rate * 1.1) + 16)
        u = u[np.abs(u) <= bound][:need]
        out[filled : filled + u.size] = u
        filled += u.size
    return out * density.T


def draw_time(density: TimeDensity, rng: np.random.Generator) -> float:
    return float(draw_times(density, 1, rng)[0])


def signal_expectation(spectrum: Spectrum, t):
    """<psi| exp(-i t H) |psi> = sum_m p_m exp(-i lambda_m t)."""
    t = np.asarray(t, dtype=float)
    flat = t.reshape(-1)
    out = np.empty(flat.size, dtype=complex)
    lam, p = spectrum.eigenvalues, spectrum.overlaps
    step = max(1, 2**20 // lam.size)
    for s in range(0, flat.size, step):
        out[s : s + step] = np.exp(-1j * np.outer(flat[s : s + step], lam)) @ p
    out = out.reshape(t.shape)
    return out if out.ndim else complex(out)


def _shots(s: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(s.shape) < 0.5 * (1.0 + s), 1.0, -1.0)


def hadamard_shot(spectrum: Spectrum, t: float, basis: str, rng: np.random.Generator) -> int:
    """One ancilla measurement: +1 with probability (1 + s)/2, s = Re or Im of the signal."""
    sig = signal_expectation(spectrum, t)
    if basis in ("X", "X_real", "real"):
        s = sig.real
    elif basis in ("Y", "Y_imag", "imag"):
        s = sig.imag
    else:
        raise ValueError(f"unknown basis {basis!r}")
    s = min(max(s, -1.0), 1.0)
    return 1 if rng.random() < 0.5 * (1.0 + s) else -1


@dataclass
class RuntimeLedger:
    t_max: float = 0.0
    t_total: float = 0.0
    shots: int = 0

    def add(self, other: "RuntimeLedger") -> None:
        self.t_max = max(self.t_max, other.t_max)
        self.t_total += other.t_total
        self.shots += other.shots

    @classmethod
    def from_times(cls, t: np.ndarray, repeats: int = 1) -> "RuntimeLedger":
        a = np.abs(t)
        return cls(float(a.max()) if a.size else 0.0, float(repeats * a.sum()), int(2 * repeats * a.size))


@dataclass
class Dataset:
    t: np.ndarray
    z: np.ndarray
    density: TimeDensity
    ledger: RuntimeLedger = field(default_factory=RuntimeLedger)
    seed: int | None = None
    key: tuple = ()
    repeats: int = 1

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.z = np.asarray(self.z, dtype=complex)
        if self.t.shape != self.z.shape or self.t.ndim != 1:
            raise ValueError("t and z must be 1-D arrays of equal length")

    @property
    def N(self) -> int:
        return self.t.size

    def to_jsonl(self) -> str:
        header = {
            "T": self.density.T,
            "gamma": self.density.gamma,
            "seed": self.seed,
            "N": self.N,
            "key": list(self.key),
            "repeats": self.repeats,
        }
        lines = [json.dumps(header)]
        pm1 = self.repeats == 1 and np.all(np.abs(self.z.real) == 1) and np.all(np.abs(self.z.imag) == 1)
        for n, (tn, zn) in enumerate(zip(self.t.tolist(), self.z.tolist())):
            zr, zi = (int(zn.real), int(zn.imag)) if pm1 else (zn.real, zn.imag)
            lines.append(json.dumps({"n": n, "t": tn, "zr": zr, "zi": zi}))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Dataset":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError("empty dataset file")
        head, recs = rows[0], rows[1:]
        recs.sort(key=lambda r: r["n"])
        if head.get("N") is not None and head["N"] != len(recs):
            raise ValueError(f"header says N={head['N']} but {len(recs)} records found")
        t = np.array([r["t"] for r in recs], dtype=float)
        z = np.array([complex(r["zr"], r["zi"]) for r in recs])
        repeats = int(head.get("repeats", 1))
        return cls(
            t,
            z,
            TimeDensity(head["T"], head["gamma"]),
            RuntimeLedger.from_times(t, repeats),
            seed=head.get("seed"),
            key=tuple(head.get("key", ())),
            repeats=repeats,
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.from_jsonl(Path(path).read_text(encoding="utf-8"))


def generate_dataset(
    spectrum: Spectrum,
    density: TimeDensity,
    N: int,
    seed: int = 0,
    key: tuple = (),
    repeats: int = 1,
    noiseless: bool = False,
) -> Dataset:
    """Draw N times and measure each once per basis (or `repeats` times, averaged).

    ``noiseless=True`` replaces the shots by the exact signal value, which is
    useful for separating the sampling of times from shot noise.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    t = np.empty(N)
    z = np.empty(N, dtype=complex)
    for b, start in enumerate(range(0, N, BLOCK_SIZE)):
        stop = min(start + BLOCK_SIZE, N)
        rng = substream(seed, *key, b)
        tb = draw_times(density, stop - start, rng)
        s = signal_expectation(spectrum, tb)
        if noiseless:
            zb = s
        else:
            sr = np.clip(s.real, -1.0, 1.0)
            si = np.clip(s.imag, -1.0, 1.0)
            x = np.zeros(tb.size)
            y = np.zeros(tb.size)
            for _ in range(repeats):
                x += _shots(sr, rng)
                y += _shots(si, rng)
            zb = (x + 1j * y) / repeats
        t[start:stop] = tb
        z[start:stop] = zb
    ledger = RuntimeLedger.from_times(t, repeats)
    return Dataset(t, z, density, ledger, seed=seed, key=tuple(key), repeats=repeats)
