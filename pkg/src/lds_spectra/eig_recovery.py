"""From a time series to eigenvalue estimates, plus the numerical studies
that check how AR-parameter error turns into eigenvalue error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._parallel import ordered_map
from .arma_fit import ArmaFit, FitConfig, ar_baseline_fit, fit_series
from .errors import DegenerateSpectrum, OrderMismatch
from .lds_core import TimeSeries, as_rng, derived_seed, random_identifiable_lds, simulate
from .poly_spectra import (
    ConditionBounds,
    MonicPolynomial,
    Spectrum,
    ar_params_to_char_poly,
    companion_matrix,
    condition_bounds,
    poly_roots,
    spectrum_distance,
)


@dataclass
class SpectrumEstimate:
    spectrum: Spectrum
    phi_hat: np.ndarray
    cond: ConditionBounds | None
    fit: ArmaFit | None = None

    @property
    def degenerate(self) -> bool:
        return self.cond is None


def spectrum_from_phi(phi) -> Spectrum:
    return poly_roots(ar_params_to_char_poly(phi))


def true_ar_params(eigenvalues) -> np.ndarray:
    """AR parameters whose characteristic polynomial has these roots."""
    return -MonicPolynomial.from_roots(eigenvalues).coeffs


def estimate_from_phi(phi, fit: ArmaFit | None = None) -> SpectrumEstimate:
    phi = np.asarray(phi, dtype=float).reshape(-1)
    spec = spectrum_from_phi(phi)
    try:
        cond = condition_bounds(spec)
    except DegenerateSpectrum:
        cond = None
    return SpectrumEstimate(spectrum=spec, phi_hat=phi, cond=cond, fit=fit)


def estimate_spectrum(series: TimeSeries, cfg: FitConfig) -> SpectrumEstimate:
    """Fit AR parameters, then take the roots of their characteristic
    polynomial. ``cond`` is None when the estimated spectrum has a repeated
    eigenvalue."""
    fit = fit_series(series, cfg)
    return estimate_from_phi(fit.phi, fit)


def ar_distance(a, b) -> float:
    """l2 distance between AR parameter vectors (fits or plain arrays)."""
    pa = np.asarray(a.phi if isinstance(a, ArmaFit) else a, dtype=float).reshape(-1)
    pb = np.asarray(b.phi if isinstance(b, ArmaFit) else b, dtype=float).reshape(-1)
    if pa.size != pb.size:
        raise OrderMismatch(f"orders {pa.size} and {pb.size} differ")
    return float(np.linalg.norm(pa - pb))


def loglog_slope(x, y) -> float:
    """Least squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def correlation_study(num_systems: int = 100, n: int = 2, rng=None) -> dict:
    """Pairwise eigenvalue distances against AR-parameter distances.

    Eigenvalues are i.i.d. uniform on [-1, 1]; AR parameters are exact (from
    Vieta's formulas), so the study isolates the map between the two
    distances from any estimation error.

    Returns a dict with ``pairs`` (rows ``(i, j, eig_distance, ar_distance)``)
    and ``pearson``.
    """
    rng = as_rng(rng)
    eigs = rng.uniform(-1.0, 1.0, size=(num_systems, n))
    phis = np.array([true_ar_params(e) for e in eigs])
    spectra = [Spectrum(e) for e in eigs]
    rows = []
    for i in range(num_systems):
        for j in range(i + 1, num_systems):
            rows.append((i, j, spectrum_distance(spectra[i], spectra[j]),
                         float(np.linalg.norm(phis[i] - phis[j]))))
    pairs = np.array(rows, dtype=float).reshape(-1, 4)
    pearson = float(np.corrcoef(pairs[:, 2], pairs[:, 3])[0, 1]) if len(rows) > 1 else np.nan
    return {"pairs": pairs, "pearson": pearson}


def _matched_max_movement(a: Spectrum, b: Spectrum) -> float:
    cost = np.abs(a.values[:, None] - b.values[None, :]) ** 2
    cols = kernels.assign_min_cost(cost)
    return float(np.sqrt(cost[np.arange(len(a)), cols].max()))


def perturbation_study(spectrum, eps_list, rng=None, num_directions: int = 8) -> np.ndarray:
    """Root movement under coefficient perturbations of size ``eps``.

    ``num_directions`` random unit vectors in coefficient space are drawn
    once and reused for every ``eps``. For each ``eps`` the recorded value is
    the largest root displacement (after optimal matching) over all
    directions, measured from the roots of the unperturbed polynomial.

    Returns an array of rows ``(eps, movement)``.
    """
    rng = as_rng(rng)
    spec = spectrum if isinstance(spectrum, Spectrum) else Spectrum(spectrum)
    base = MonicPolynomial.from_roots(spec.values)
    base_roots = poly_roots(base)
    dirs = rng.standard_normal((num_directions, base.degree))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    out = []
    for eps in eps_list:
        eps = float(eps)
        if eps == 0.0:
            out.append((0.0, 0.0))
            continue
        move = max(
            _matched_max_movement(poly_roots(MonicPolynomial(base.coeffs + eps * d)), base_roots)
            for d in dirs
        )
        out.append((eps, move))
    return np.array(out)


def measured_sensitivity(spectrum, delta: float = 1e-6) -> np.ndarray:
    """Eigenvalue movement per unit spectral-norm perturbation of the
    companion matrix, along each eigenvalue's worst-case direction.

    For eigenvalue ``l`` with left/right eigenvectors ``w``, ``v`` the
    rank-one perturbation ``delta * w v^* / (|w| |v|)`` has spectral norm
    ``delta`` and moves ``l`` by ``kappa * delta`` to first order. The
    perturbed eigenvalues come from LAPACK, independent of
    :func:`condition_bounds`.
    """
    spec = spectrum if isinstance(spectrum, Spectrum) else Spectrum(spectrum)
    C = companion_matrix(MonicPolynomial.from_roots(spec.values))
    w_r, vr = np.linalg.eig(C)
    w_l, vl = np.linalg.eig(C.conj().T)
    out = np.empty(len(spec))
    for j, lam in enumerate(spec.values):
        v = vr[:, np.argmin(np.abs(w_r - lam))]
        w = vl[:, np.argmin(np.abs(w_l - np.conj(lam)))]
        dC = delta * np.outer(w, v.conj()) / (np.linalg.norm(w) * np.linalg.norm(v))
        moved = np.linalg.eigvals(C + dC)
        out[j] = np.min(np.abs(moved - lam)) / np.linalg.norm(dC, 2)
    return out


def convergence_study(n: int = 2, lengths=(1000, 3000, 10000, 30000, 100000),
                      trials: int = 50, seed: int = 0, *, m: int = 1, k: int = 1,
                      alpha: float = 0.01, include_ar: bool = True,
                      max_workers: int | None = None) -> list:
    """Estimation error against series length on random identifiable systems.

    Trial ``r`` uses the same system for every length (seeded by
    ``(seed, r)``), simulated with hidden Gaussian inputs and N(0, 0.01^2)
    output noise. Returns a list of dict rows with keys ``method``, ``T``,
    ``trial``, ``phi_error`` and ``eig_error``.
    """
    cfg = FitConfig(order=n, ridge_alpha=alpha)

    def trial(r):
        sys_r = random_identifiable_lds(n, m, k, np.random.default_rng(derived_seed(seed, r)))
        truth = sys_r.spectrum()
        phi_true = true_ar_params(truth.values)
        rows = []
        for T in lengths:
            sim_rng = np.random.default_rng(derived_seed(seed, r, int(T)))
            series = simulate(sys_r, int(T), sim_rng)
            fits = [("arma", fit_series(series, cfg))]
            if include_ar:
                fits.append(("ar", ar_baseline_fit(series, n)))
            for name, fit in fits:
                rows.append({
                    "method": name, "T": int(T), "trial": r,
                    "phi_error": float(np.linalg.norm(fit.phi - phi_true)),
                    "eig_error": spectrum_distance(spectrum_from_phi(fit.phi), truth),
                })
        return rows

    return [row for rows in ordered_map(trial, range(trials), max_workers) for row in rows]


def median_errors(rows: list, method: str = "arma", key: str = "phi_error"):
    """``(lengths, medians)`` of ``key`` for one method of a convergence study."""
    lengths = sorted({r["T"] for r in rows if r["method"] == method})
    med = [float(np.median([r[key] for r in rows if r["method"] == method and r["T"] == T]))
           for T in lengths]
    return np.array(lengths), np.array(med)


__all__ = [
    "SpectrumEstimate", "estimate_spectrum", "estimate_from_phi", "spectrum_from_phi",
    "true_ar_params", "ar_distance", "correlation_study", "perturbation_study",
    "measured_sensitivity", "convergence_study", "median_errors", "loglog_slope",
]
