"""Hamiltonian spectra: dense TFIM / Hubbard builders, normalization and overlaps.

A :class:`Spectrum` is the whole signal model seen by the estimator: ascending
eigenvalues (radians) and the squared overlaps of the initial state with each
eigenvector.  Indices into a spectrum are 0-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np

MAX_DENSE_DIM = 4096
DEGENERACY_TOL = 1e-12

_I2 = np.eye(2)
_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
# annihilation operator in the occupation basis (|0> empty, |1> occupied)
_A = np.array([[0.0, 1.0], [0.0, 0.0]])


class DimensionError(ValueError):
    """Requested Hilbert space is too large for the dense path."""


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    overlaps: np.ndarray

    def __post_init__(self):
        lam = np.array(self.eigenvalues, dtype=float).reshape(-1)
        p = np.array(self.overlaps, dtype=float).reshape(-1)
        if lam.size == 0 or lam.shape != p.shape:
            raise ValueError("eigenvalues and overlaps must be nonempty and the same length")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be ascending")
        if np.any(np.abs(lam) > math.pi + 1e-12):
            raise ValueError("eigenvalues must lie in [-pi, pi]")
        if np.any(p < 0):
            raise ValueError("overlaps must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"overlaps must sum to 1 (got {p.sum():.15f})")
        lam.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "overlaps", p)

    @classmethod
    def from_unsorted(cls, eigenvalues, overlaps) -> "Spectrum":
        lam = np.asarray(eigenvalues, dtype=float)
        order = np.argsort(lam, kind="stable")
        return cls(lam[order], np.asarray(overlaps, dtype=float)[order])

    @property
    def M(self) -> int:
        return self.eigenvalues.size

    def to_dict(self) -> dict:
        return {"eigenvalues": self.eigenvalues.tolist(), "overlaps": self.overlaps.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Spectrum":
        unknown = set(d) - {"eigenvalues", "overlaps"}
        if unknown:
            raise ValueError(f"unknown spectrum keys: {sorted(unknown)}")
        return cls(d["eigenvalues"], d["overlaps"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Spectrum":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Spectrum":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class DominantSpec:
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if not idx:
            raise ValueError("dominant set must be nonempty")
        if len(set(idx)) != len(idx):
            raise ValueError("dominant indices must be distinct")
        object.__setattr__(self, "indices", idx)

    @property
    def K(self) -> int:
        return len(self.indices)

    def check(self, M: int) -> None:
        if self.indices[0] < 0 or self.indices[-1] >= M:
            raise ValueError(f"dominant indices {self.indices} out of range for M={M}")

    def complement(self, M: int) -> np.ndarray:
        mask = np.ones(M, dtype=bool)
        mask[list(self.indices)] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class SpectrumStats:
    p_min_K: float
    delta_lambda_K: float
    residual_R_K: float

    @property
    def ratio(self) -> float:
        """R^(K) / p^(K)_min."""
        return self.residual_R_K / self.p_min_K


@dataclass(frozen=True)
class HamiltonianModel:
    kind: str  # "tfim" or "hubbard"
    L: int
    g: float = 0.0
    t: float = 1.0
    U: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in ("tfim", "hubbard"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.L < 1:
            raise ValueError("L must be positive")
        object.__setattr__(self, "kind", kind)

    @property
    def dim(self) -> int:
        return 2**self.L if self.kind == "tfim" else 4**self.L

    def build(self) -> np.ndarray:
        if self.kind == "tfim":
            return build_tfim(self.L, self.g, self.boundary)
        return build_hubbard(self.L, self.t, self.U, self.boundary)


def _site_op(op: np.ndarray, i: int, n: int) -> np.ndarray:
    return reduce(np.kron, [op if k == i else _I2 for k in range(n)])


def _check_dim(dim: int) -> None:
    if dim > MAX_DENSE_DIM:
        raise DimensionError(f"dimension {dim} exceeds dense limit {MAX_DENSE_DIM}")


def build_tfim(L: int, g: float, boundary: str = "periodic") -> np.ndarray:
    """-(sum_i Z_i Z_{i+1} [+ Z_L Z_1]) - g sum_i X_i as a dense 2^L x 2^L matrix.

    With periodic boundary the wrap bond is always added, so L=1 gives Z_1 Z_1 = I
    and L=2 counts the single physical bond twice, exactly as the formula reads.
    """
    if L < 1:
        raise ValueError("L must be positive")
    _check_dim(2**L)
    zs = [_site_op(_Z, i, L) for i in range(L)]
    H = np.zeros((2**L, 2**L))
    for i in range(L - 1):
        H -= zs[i] @ zs[i + 1]
    if boundary == "periodic":
        H -= zs[L - 1] @ zs[0]
    elif boundary != "open":
        raise ValueError(f"unknown boundary {boundary!r}")
    for i in range(L):
        H -= g * _site_op(_X, i, L)
    return H


def jordan_wigner_annihilators(n_modes: int) -> list[np.ndarray]:
    """Dense c_j = (prod_{k<j} Z_k) a_j for j = 0..n_modes-1."""
    ops = []
    for j in range(n_modes):
        factors = [_Z] * j + [_A] + [_I2] * (n_modes - j - 1)
        ops.append(reduce(np.kron, factors))
    return ops


def build_hubbard(L: int, t: float, U: float, boundary: str = "open") -> np.ndarray:
    """Spinful 1D Hubbard model with the particle-hole symmetric interaction.

    H = -t sum_{<j,j+1>,s} (c+_{j,s} c_{j+1,s} + h.c.) + U sum_j (n_{j,up}-1/2)(n_{j,dn}-1/2)

    Mode ordering: spin-up block (sites 0..L-1) then spin-down block.
    """
    if L < 1:
        raise ValueError("L must be positive")
    _check_dim(4**L)
    c = jordan_wigner_annihilators(2 * L)
    dim = 4**L
    H = np.zeros((dim, dim))
    bonds = [(j, j + 1) for j in range(L - 1)]
    if boundary == "periodic" and L > 2:
        bonds.append((L - 1, 0))
    for spin in range(2):
        off = spin * L
        for i, j in bonds:
            hop = c[off + i].T @ c[off + j]
            H -= t * (hop + hop.T)
    eye = np.eye(dim)
    for j in range(L):
        n_up = c[j].T @ c[j]
        n_dn = c[L + j].T @ c[L + j]
        H += U * (n_up - 0.5 * eye) @ (n_dn - 0.5 * eye)
    return H


def normalize_spectrum(H: np.ndarray) -> np.ndarray:
    """Eigenvalues of pi H / (4 ||H||_2), ascending, with max |lambda| = pi/4."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be square")
    scale = max(np.abs(H).max(), 1.0)
    if np.abs(H - H.conj().T).max() > 1e-10 * scale:
        raise ValueError("H is not Hermitian")
    ev = np.linalg.eigvalsh(H)
    norm = np.abs(ev).max()
    if norm == 0:
        raise ValueError("cannot normalize the zero matrix")
    return ev * (math.pi / (4.0 * norm))


def assign_overlaps(
    eigenvalues: Sequence[float],
    dominant: DominantSpec,
    dominant_weights: Sequence[float],
    residual_policy="uniform",
    residual_index: int | None = None,
) -> Spectrum:
    """Place `dominant_weights` on the modes of `dominant` and spread the rest.

    residual_policy is "uniform" (equal share on every non-dominant mode),
    "single" (all residual mass on `residual_index`, default the lowest
    non-dominant mode) or an explicit list of nonnegative weights with one
    entry per non-dominant mode in ascending order; the list is rescaled to
    the residual mass.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    M = lam.size
    dominant.check(M)
    w = np.asarray(dominant_weights, dtype=float)
    if w.size != dominant.K:
        raise ValueError("need one weight per dominant mode")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total > 1 + 1e-12:
        raise ValueError(f"dominant weights sum to {total} > 1")
    dom_lam = np.sort(lam[list(dominant.indices)])
    if dominant.K > 1 and np.min(np.diff(dom_lam)) < DEGENERACY_TOL:
        raise ValueError("dominant eigenvalues are degenerate; merge them into one mode")

    p = np.zeros(M)
    p[list(dominant.indices)] = w
    rest = dominant.complement(M)
    residual = max(1.0 - total, 0.0)
    if isinstance(residual_policy, str):
        if residual_policy == "uniform":
            if rest.size:
                p[rest] = residual / rest.size
        elif residual_policy == "single":
            if rest.size:
                target = rest[0] if residual_index is None else int(residual_index)
                if target not in rest:
                    raise ValueError("residual_index must be a non-dominant mode")
                p[target] = residual
        else:
            raise ValueError(f"unknown residual policy {residual_policy!r}")
    else:
        custom = np.asarray(residual_policy, dtype=float)
        if custom.size != rest.size:
            raise ValueError(f"custom residual list has {custom.size} entries, need {rest.size}")
        if np.any(custom < 0):
            raise ValueError("custom residual weights must be nonnegative")
        if custom.sum() > 0:
            p[rest] = residual * custom / custom.sum()
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("residual mass could not be placed on any mode")
    # remove rounding drift so the closure holds to machine precision
    p /= p.sum()
    return Spectrum(lam, p)


def spectrum_stats(spectrum: Spectrum, dominant: DominantSpec) -> SpectrumStats:
    dominant.check(spectrum.M)
    idx = list(dominant.indices)
    p = spectrum.overlaps
    p_min = float(p[idx].min())
    residual = float(p[dominant.complement(spectrum.M)].sum())
    if dominant.K == 1:
        gap = math.inf
    else:
        gap = float(np.min(np.diff(np.sort(spectrum.eigenvalues[idx]))))
    return SpectrumStats(p_min_K=p_min, delta_lambda_K=gap, residual_R_K=residual)


def model_spectrum(
    model: HamiltonianModel,
    dominant_weights: Sequence[float],
    dominant: DominantSpec | None = None,
    residual_policy="uniform",
) -> Spectrum:
    """Normalized spectrum of `model` with overlaps (lowest modes dominant by default)."""
    lam = normalize_spectrum(model.build())
    if dominant is None:
        dominant = DominantSpec(tuple(range(len(dominant_weights))))
    return assign_overlaps(lam, dominant, dominant_weights, residual_policy)
