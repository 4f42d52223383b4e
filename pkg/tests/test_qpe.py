import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmqcels.qpe import QpeConfig, fejer_kernel, outcome_to_phase, qpe_distribution, qpe_estimate_min, sample_qpe
from mmqcels.sampling import substream
from mmqcels.spectral import HamiltonianModel, Spectrum, model_spectrum


def kernel_by_sum(delta, d):
    """|2^-d sum_k exp(2 pi i k delta)|^2, the amplitude form of the QPE kernel."""
    k = np.arange(2**d)
    return abs(np.exp(2j * math.pi * k * delta).sum() / 2**d) ** 2


@pytest.mark.parametrize("d", [1, 3, 6])
def test_kernel_matches_amplitude_sum(d):
    for delta in [0.0, 0.013, 0.25, -0.4, 0.5, 1.0, 2.7]:
        assert fejer_kernel(delta, d) == pytest.approx(kernel_by_sum(delta, d), abs=1e-13)


def test_exact_phase_is_deterministic():
    d = 6
    j0 = 5
    sp = Spectrum([2 * math.pi * j0 / 2**d], [1.0])
    pr = qpe_distribution(sp, d)
    assert pr[j0] == pytest.approx(1.0, abs=1e-14)
    assert np.delete(pr, j0).max() < 1e-14
    for seed in range(3):
        theta, _ = qpe_estimate_min(sp, QpeConfig(d, 7), substream(seed))
        assert theta == 2 * math.pi * j0 / 2**d


def test_mid_bin_value():
    d = 8
    sp = Spectrum([2 * math.pi * (10.5 / 2**d)], [1.0])
    pr = qpe_distribution(sp, d)
    # sin^2(pi/2) / (2^2d sin^2(pi / 2^(d+1))) -> 4 / pi^2
    assert pr[10] == pytest.approx(pr[11])
    assert pr[10] == pytest.approx(4 / math.pi**2, abs=2e-5)


def test_negative_phase_wraps():
    d = 5
    sp = Spectrum([-2 * math.pi * 3 / 2**d], [1.0])
    pr = qpe_distribution(sp, d)
    assert pr[2**d - 3] == pytest.approx(1.0)
    assert outcome_to_phase(2**d - 3, d) == pytest.approx(-2 * math.pi * 3 / 2**d)
    assert outcome_to_phase(2 ** (d - 1), d) == pytest.approx(-math.pi)


def test_mixture_is_convex_combination():
    tf = model_spectrum(HamiltonianModel("tfim", 4, g=1.0), [0.4, 0.4])
    d = 7
    direct = sum(p * qpe_distribution(Spectrum([lam], [1.0]), d) for lam, p in zip(tf.eigenvalues, tf.overlaps))
    np.testing.assert_allclose(qpe_distribution(tf, d), direct, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.integers(1, 12), M=st.integers(1, 20))
def test_distribution_normalized(seed, d, M):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.uniform(-math.pi, math.pi, M))
    p = rng.dirichlet(np.ones(M))
    p /= p.sum()
    pr = qpe_distribution(Spectrum(lam, p), d)
    assert pr.min() >= 0
    assert abs(pr.sum() - 1) < 1e-10


def test_kernel_sums_to_one_over_bins():
    rng = np.random.default_rng(1)
    for phi in rng.uniform(-1, 1, 20):
        for d in (3, 9):
            vals = fejer_kernel(np.arange(2**d) / 2**d - phi, d)
            assert vals.min() >= 0
            assert abs(vals.sum() - 1) < 1e-10


def test_sampler_matches_table():
    sp = Spectrum([-0.5, 0.3], [0.7, 0.3])
    d = 5
    pr = qpe_distribution(sp, d)
    n = 200000
    draws = sample_qpe(sp, QpeConfig(d, n), substream(2))
    counts = np.bincount(draws, minlength=2**d)
    keep = pr * n > 20
    chi2 = np.sum((counts[keep] - n * pr[keep]) ** 2 / (n * pr[keep]))
    # generous bound: 99.99% quantile for this many degrees of freedom is far below 3 dof + 40
    assert chi2 < 3 * keep.sum() + 40


def test_ledger_and_config():
    sp = Spectrum([0.1], [1.0])
    _, led = qpe_estimate_min(sp, QpeConfig(7, 10), substream(3))
    assert led.t_max == 127 and led.t_total == 1270 and led.shots == 10
    with pytest.raises(ValueError):
        QpeConfig(0)
    with pytest.raises(ValueError):
        QpeConfig(25)
    with pytest.raises(ValueError):
        QpeConfig(4, 0)


def test_phase_shift_is_removed():
    d = 6
    sp = Spectrum([2 * math.pi * 4 / 2**d - 0.01], [1.0])
    theta, _ = qpe_estimate_min(sp, QpeConfig(d, 10, phase_shift=0.01), substream(4))
    assert theta == pytest.approx(sp.eigenvalues[0], abs=1e-15)


def test_median_error_decreases_with_depth():
    sp = model_spectrum(HamiltonianModel("tfim", 8, g=4.0), [0.4, 0.4])
    lam1 = sp.eigenvalues[0]
    med = []
    for d in range(4, 12):
        errs = []
        for trial in range(50):
            rng = substream(5, trial, d)
            shift = rng.uniform(0, 2 * math.pi / 2**d)
            theta, _ = qpe_estimate_min(sp, QpeConfig(d, 10, phase_shift=shift), rng)
            errs.append(abs(theta - lam1))
        med.append(np.median(errs))
    inversions = sum(b > a for a, b in zip(med, med[1:]))
    assert inversions <= 1
