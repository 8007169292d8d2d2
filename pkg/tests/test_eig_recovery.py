import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lds_spectra.arma_fit import ArmaFit, FitConfig
from lds_spectra.eig_recovery import (
    ar_distance,
    convergence_study,
    correlation_study,
    estimate_from_phi,
    estimate_spectrum,
    loglog_slope,
    measured_sensitivity,
    median_errors,
    perturbation_study,
    spectrum_from_phi,
    true_ar_params,
)
from lds_spectra.errors import OrderMismatch
from lds_spectra.lds_core import LdsParams, TimeSeries, simulate
from lds_spectra.poly_spectra import (
    MonicPolynomial,
    Spectrum,
    ar_params_to_char_poly,
    companion_matrix,
    condition_bounds,
    poly_roots,
    spectrum_distance,
)

EPS = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]


def exact_kappa(roots):
    # kappa_j = |w||v| / |w* v| from LAPACK eigenvectors of the companion
    C = companion_matrix(MonicPolynomial.from_roots(roots))
    lam, vr = np.linalg.eig(C)
    lam_l, vl = np.linalg.eig(C.conj().T)
    out = []
    for r in roots:
        v = vr[:, np.argmin(np.abs(lam - r))]
        w = vl[:, np.argmin(np.abs(lam_l - np.conj(r)))]
        out.append(np.linalg.norm(w) * np.linalg.norm(v) / abs(np.vdot(w, v)))
    return np.array(out)


# ---------------------------------------------------------------- estimate_spectrum

def test_noiseless_first_order():
    p = LdsParams([[0.6]], [[1.0]], [[1.0]], [[0.0]])
    x = np.zeros((80, 1))
    x[0] = 1.0
    s = simulate(p, x, 0)
    est = estimate_spectrum(TimeSeries(s.outputs), FitConfig(1))
    assert est.spectrum.values[0] == pytest.approx(0.6, abs=1e-8)
    assert not est.degenerate


def test_two_dim_spectrum():
    p = LdsParams(np.diag([0.9, 0.5]), np.ones((2, 1)), [[1.0, -1.0]], [[0.0]],
                  output_noise_std=0.01)
    est = estimate_spectrum(simulate(p, 100_000, 4), FitConfig(2))
    assert spectrum_distance(est.spectrum, Spectrum([0.9, 0.5])) <= 0.05
    assert isinstance(est.fit, ArmaFit)


def test_injected_double_root_is_degenerate():
    est = estimate_from_phi([1.0, -0.25])
    assert np.allclose(est.spectrum.values, [0.5, 0.5], atol=1e-7)
    assert est.degenerate and est.cond is None


def test_spectrum_recomputable(rng):
    for _ in range(20):
        phi = rng.uniform(-0.5, 0.5, 3)
        est = estimate_from_phi(phi)
        again = poly_roots(ar_params_to_char_poly(est.phi_hat))
        assert np.array_equal(est.spectrum.values, again.values)


# ---------------------------------------------------------------- ar_distance

def test_ar_distance_examples():
    assert ar_distance([0.9, -0.2], [0.9, -0.2]) == 0.0
    assert ar_distance([0.9, -0.2], [0.9, -0.1]) == pytest.approx(0.1, abs=1e-15)


def test_ar_distance_order_mismatch():
    with pytest.raises(OrderMismatch):
        ar_distance([0.1, 0.2], [0.1])


# ---------------------------------------------------------------- correlation

def test_correlation_n1_exact():
    out = correlation_study(30, n=1, rng=0)
    assert np.array_equal(out["pairs"][:, 2], out["pairs"][:, 3])
    assert out["pearson"] == pytest.approx(1.0, abs=1e-12)


def test_correlation_n2():
    # fresh seeds as the stability oracle
    for seed in (0, 1, 2):
        assert correlation_study(100, n=2, rng=seed)["pearson"] >= 0.8


def test_correlation_zero_pairs():
    rng = np.random.default_rng(3)
    out = correlation_study(5, n=2, rng=rng)
    assert out["pairs"].shape == (10, 4)
    e = np.array([0.3, -0.4])
    z = Spectrum(e)
    assert spectrum_distance(z, Spectrum(e[::-1])) == 0.0
    assert ar_distance(true_ar_params(e), true_ar_params(e[::-1])) == 0.0


# ---------------------------------------------------------------- perturbation

def test_simple_root_rate():
    rows = perturbation_study([0.9, 0.5], EPS, rng=0)
    assert abs(loglog_slope(rows[:, 0], rows[:, 1]) - 1.0) <= 0.1


def test_double_root_rate():
    rows = perturbation_study([0.5, 0.5], EPS, rng=0)
    assert abs(loglog_slope(rows[:, 0], rows[:, 1]) - 0.5) <= 0.05


def test_zero_eps():
    assert perturbation_study([0.9, 0.5], [0.0], rng=0).tolist() == [[0.0, 0.0]]


def test_measured_sensitivity_matches_kappa(rng):
    for n in (2, 3, 4):
        roots = np.sort(rng.uniform(-0.9, 0.9, n))
        if np.min(np.diff(roots)) < 0.1:
            continue
        meas = measured_sensitivity(roots, delta=1e-7)
        kappa = exact_kappa(Spectrum(roots).values)
        assert np.allclose(meas, kappa, rtol=1e-3)
        b = condition_bounds(Spectrum(roots))
        assert np.all(meas >= 0.95 * b.lower)
        assert np.all(meas <= 1.05 * b.upper_rigorous)


# ---------------------------------------------------------------- round trip

@given(st.integers(1, 8).flatmap(
    lambda n: st.lists(st.floats(-1.0, 1.0), min_size=n, max_size=n)))
def test_round_trip(phi):
    phi = np.array(phi)
    if np.max(np.abs(np.linalg.eigvals(companion_matrix(ar_params_to_char_poly(phi))))) > 1.5:
        return
    roots = spectrum_from_phi(phi).values
    back = np.real(true_ar_params(roots))
    assert np.allclose(back, phi, atol=1e-6)


# ---------------------------------------------------------------- studies

@pytest.fixture(scope="module")
def study():
    return convergence_study(2, lengths=(1000, 10000, 100000), trials=50, seed=0)


def test_monotone_accuracy(study):
    L, med = median_errors(study, "arma", "eig_error")
    assert med[-1] < med[0]


def test_ols_does_not_converge(study):
    L, med = median_errors(study, "ar", "eig_error")
    assert med[2] >= 0.8 * med[1]


def test_study_rows(study):
    assert len(study) == 3 * 50 * 2
    assert {r["method"] for r in study} == {"arma", "ar"}
    assert loglog_slope([1, 10, 100], [1, 0.1, 0.01]) == pytest.approx(-1.0)


def test_study_independent_of_workers():
    a = convergence_study(2, lengths=(2000,), trials=4, seed=3, max_workers=1)
    b = convergence_study(2, lengths=(2000,), trials=4, seed=3, max_workers=3)
    assert a == b


def test_study_independent_of_env_threads():
    code = ("from lds_spectra.eig_recovery import convergence_study as c;"
            "print(repr(c(2, lengths=(2000,), trials=3, seed=5)))")
    outs = []
    for threads in ("1", "3"):
        env = dict(os.environ, LDS_SPECTRA_THREADS=threads)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, check=True,
                                   capture_output=True, text=True).stdout)
    assert outs[0] == outs[1]
