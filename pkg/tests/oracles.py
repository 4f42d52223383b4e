"""Independent reference implementations shared by the test modules."""

import numpy as np


def gd_oracle(data, theta, iters=200000, l1=False):
    """Plain projected gradient on the real parametrization of r, no normal equations."""
    A = np.exp(-1j * np.outer(data.t, theta))
    N = data.N
    L = 2 * np.linalg.norm(A, 2) ** 2 / N
    r = np.zeros(len(theta), dtype=complex)
    for _ in range(iters):
        g = -2 * A.conj().T @ (data.z - A @ r) / N
        new = r - g / L
        if l1:
            new = project_l1_bisect(new)
        if np.max(np.abs(new - r)) < 1e-15:
            break
        r = new
    return r


def project_l1_bisect(r):
    mag = np.abs(r)
    if mag.sum() <= 1:
        return r
    lo, hi = 0.0, mag.max()
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        if np.maximum(mag - tau, 0).sum() > 1:
            lo = tau
        else:
            hi = tau
    return np.maximum(mag - hi, 0) * np.exp(1j * np.angle(r))
