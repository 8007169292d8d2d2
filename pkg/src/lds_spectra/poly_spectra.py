"""Monic polynomials, companion matrices, spectra and their distances.

Conventions: a :class:`MonicPolynomial` with ``coeffs = (c_1, ..., c_n)``
stands for ``z^n + c_1 z^(n-1) + ... + c_n``. Its roots are returned as a
:class:`Spectrum`, which keeps the values in a canonical order (modulus
descending, then real part descending, then imaginary part descending).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegenerateSpectrum,
    InvalidDegree,
    RootSolverFailure,
    SpectrumSizeMismatch,
)

TOL_ROOT_RESIDUAL = 1e-8
TOL_CONJ = 1e-8
TOL_GAP = 1e-10


@dataclass(frozen=True)
class MonicPolynomial:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).reshape(-1)
        if c.size == 0:
            raise InvalidDegree("a monic polynomial needs degree >= 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("polynomial coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size

    @classmethod
    def from_roots(cls, roots) -> "MonicPolynomial":
        """Expand ``prod (z - r)``; complex roots must come in conjugate pairs."""
        full = np.array([1.0 + 0j])
        for r in np.asarray(roots, dtype=complex).reshape(-1):
            full = np.convolve(full, [1.0, -r])
        if np.max(np.abs(full.imag), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(full))):
            raise ValueError("roots do not form a real polynomial")
        return cls(full.real[1:])

    def __call__(self, z):
        """Evaluate at ``z`` (scalar or array) by Horner's rule."""
        z = np.asarray(z)
        acc = np.ones_like(z, dtype=np.result_type(z, float))
        for c in self.coeffs:
            acc = acc * z + c
        return acc

    def residual_tol(self) -> float:
        return TOL_ROOT_RESIDUAL * max(1.0, float(np.max(np.abs(self.coeffs))))

    def roots(self) -> "Spectrum":
        return poly_roots(self)


def _canonical_order(values: np.ndarray) -> np.ndarray:
    # lexsort uses the last key as primary
    idx = np.lexsort((-values.imag, -values.real, -np.abs(values)))
    return values[idx]


@dataclass(frozen=True)
class Spectrum:
    """Multiset of eigenvalues, stored in canonical order."""

    values: np.ndarray

    def __post_init__(self):
        v = _canonical_order(np.array(self.values, dtype=complex).reshape(-1))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def is_conjugate_closed(self, tol: float = TOL_CONJ) -> bool:
        """True if every value has a conjugate partner within ``tol``."""
        v = self.values
        if v.size == 0:
            return True
        cost = np.abs(v[:, None] - np.conj(v)[None, :])
        cols = kernels.assign_min_cost(cost)
        return bool(np.max(cost[np.arange(v.size), cols]) <= tol)

    def min_gap(self) -> float:
        v = self.values
        if v.size < 2:
            return np.inf
        d = np.abs(v[:, None] - v[None, :])
        d[np.diag_indices(v.size)] = np.inf
        return float(d.min())

    def distance(self, other: "Spectrum") -> float:
        return spectrum_distance(self, other)


@dataclass(frozen=True)
class ConditionBounds:
    """Per-eigenvalue bracket on the first-order sensitivity of a companion
    matrix eigenvalue, aligned with ``spectrum.values``."""

    spectrum: Spectrum
    lower: np.ndarray
    upper: np.ndarray
    # (1 + rho)^(n-1) in place of (1 + rho^2)^((n-1)/2); see condition_bounds
    upper_rigorous: np.ndarray | None = None


def _as_spectrum(s) -> Spectrum:
    return s if isinstance(s, Spectrum) else Spectrum(s)


def _as_poly(p) -> MonicPolynomial:
    return p if isinstance(p, MonicPolynomial) else MonicPolynomial(p)


def companion_matrix(p) -> np.ndarray:
    """Companion matrix with ones on the subdiagonal and the negated,
    reversed coefficients in the last column."""
    p = _as_poly(p)
    n = p.degree
    C = np.zeros((n, n))
    C[np.arange(1, n), np.arange(n - 1)] = 1.0
    C[:, -1] = -p.coeffs[::-1]
    return C


def _polish(p: MonicPolynomial, roots: np.ndarray) -> np.ndarray:
    """One Newton step per root, kept only when it lowers the residual."""
    out = roots.copy()
    for i, r in enumerate(roots):
        val = 1.0 + 0j
        der = 0.0 + 0j
        for c in p.coeffs:
            der = der * r + val
            val = val * r + c
        if der == 0:
            continue
        cand = r - val / der
        if r.imag == 0.0:
            cand = complex(cand.real, 0.0)
        with np.errstate(over="ignore", invalid="ignore"):
            better = abs(p(cand)) < abs(val)
        if better:
            out[i] = cand
    return out


def _closed_form_roots(c: np.ndarray) -> np.ndarray:
    if c.size == 1:
        return np.array([-c[0] + 0j])
    b, d = c
    disc = b * b - 4.0 * d
    if disc >= 0.0:
        # avoid cancellation: compute the larger-magnitude root first
        q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
        if q == 0.0:
            return np.zeros(2, dtype=complex)
        return np.array([q, d / q], dtype=complex)
    im = 0.5 * np.sqrt(-disc)
    return np.array([complex(-0.5 * b, im), complex(-0.5 * b, -im)])


def poly_roots(p, max_qr_iters: int | None = None) -> Spectrum:
    """All roots of a monic polynomial, with multiplicity.

    Degrees 1 and 2 use closed forms. Higher degrees take the eigenvalues of
    the balanced companion matrix (Hessenberg reduction plus Francis
    double-shift QR), followed by one guarded Newton step per root.

    Raises
    ------
    RootSolverFailure
        If QR does not converge within ``max_qr_iters`` (default ``100 n``)
        iterations. The already deflated roots are attached as ``partial``.
    """
    p = _as_poly(p)
    n = p.degree
    if n <= 2:
        return Spectrum(_closed_form_roots(p.coeffs))
    if max_qr_iters is None:
        max_qr_iters = 100 * n
    wr, wi, _, stuck = kernels.real_eigvals(companion_matrix(p), int(max_qr_iters))
    if stuck:
        partial = Spectrum(wr[stuck:] + 1j * wi[stuck:])
        raise RootSolverFailure(
            f"QR iteration did not converge in {max_qr_iters} iterations "
            f"({n - stuck} of {n} roots found)",
            partial=partial,
        )
    return Spectrum(_polish(p, wr + 1j * wi))


def spectrum_distance(a, b) -> float:
    """l2 distance between two spectra under the best one-to-one matching."""
    a, b = _as_spectrum(a), _as_spectrum(b)
    if len(a) != len(b):
        raise SpectrumSizeMismatch(f"spectra have sizes {len(a)} and {len(b)}")
    if len(a) == 0:
        return 0.0
    cost = np.abs(a.values[:, None] - b.values[None, :]) ** 2
    cols = kernels.assign_min_cost(cost)
    # fsum is order independent, which keeps d(a, b) == d(b, a) bit for bit
    return float(np.sqrt(math.fsum(cost[np.arange(len(a)), cols])))


def brute_force_spectrum_distance(a, b) -> float:
    """Same quantity as :func:`spectrum_distance` by enumerating all
    permutations; only usable for small sizes."""
    a, b = _as_spectrum(a).values, _as_spectrum(b).values
    if a.size != b.size:
        raise SpectrumSizeMismatch(f"spectra have sizes {a.size} and {b.size}")
    best = np.inf
    for perm in itertools.permutations(range(a.size)):
        best = min(best, float(np.sum(np.abs(a - b[list(perm)]) ** 2)))
    return float(np.sqrt(best)) if a.size else 0.0


def _gap_products(values: np.ndarray, tol_gap: float) -> np.ndarray:
    n = values.size
    diff = np.abs(values[:, None] - values[None, :])
    diff[np.diag_indices(n)] = np.inf
    if n > 1 and diff.min() <= tol_gap:
        raise DegenerateSpectrum(f"eigenvalue gap {diff.min():.3g} <= {tol_gap:.3g}")
    diff[np.diag_indices(n)] = 1.0
    return np.prod(diff, axis=1)


def condition_bounds(s, tol_gap: float = TOL_GAP) -> ConditionBounds:
    """Lower and upper bounds on each eigenvalue's condition number in the
    companion matrix of its characteristic polynomial.

    lower_j = 1 / prod_{k != j} |l_j - l_k|
    upper_j = sqrt(n) max(1, |l_j|)^(n-1) (1 + rho^2)^((n-1)/2) * lower_j

    ``upper`` follows the published formula. Its derivation bounds the sum
    of squared elementary symmetric polynomials of the other eigenvalues by
    ``sum_i C(n-1, i) rho^(2i)``, but the binomial should be squared, so for
    n >= 3 the exact condition number can exceed it (by a few percent on
    clustered spectra). ``upper_rigorous`` uses the valid bound
    ``(1 + rho)^(n-1)`` on the coefficient norm instead. For n <= 2 the
    published bound is valid.
    """
    s = _as_spectrum(s)
    v = s.values
    n = v.size
    lower = 1.0 / _gap_products(v, tol_gap)
    rho = s.spectral_radius
    upper = (
        np.sqrt(n)
        * np.maximum(1.0, np.abs(v)) ** (n - 1)
        * (1.0 + rho * rho) ** ((n - 1) / 2.0)
        * lower
    )
    rigorous = np.sqrt(n) * np.maximum(1.0, np.abs(v)) ** (n - 1) * (1.0 + rho) ** (n - 1) * lower
    return ConditionBounds(spectrum=s, lower=lower, upper=upper, upper_rigorous=rigorous)


def eigen_condition_numbers(s) -> np.ndarray:
    """Exact condition numbers ``|w| |v| / |w* v|`` of each eigenvalue of the
    companion matrix, from numerically computed left and right eigenvectors.

    Independent of the closed-form bracket in :func:`condition_bounds`.
    """
    s = _as_spectrum(s)
    C = companion_matrix(MonicPolynomial.from_roots(s.values))
    w_right, vr = np.linalg.eig(C)
    # left eigenvectors of C are right eigenvectors of C^H, for conj(lambda)
    w_left, vl = np.linalg.eig(C.conj().T)
    out = np.empty(len(s))
    for j, lam in enumerate(s.values):
        right = vr[:, np.argmin(np.abs(w_right - lam))]
        left = vl[:, np.argmin(np.abs(w_left - np.conj(lam)))]
        out[j] = np.linalg.norm(left) * np.linalg.norm(right) / abs(np.vdot(left, right))
    return out


def _elementary_symmetric(values: np.ndarray) -> np.ndarray:
    """e_0..e_k of ``values`` (k = len(values))."""
    e = np.zeros(values.size + 1, dtype=complex)
    e[0] = 1.0
    for x in values:
        e[1:] = e[1:] + x * e[:-1]
    return e


def vandermonde(nodes) -> np.ndarray:
    nodes = np.asarray(nodes, dtype=complex).reshape(-1)
    return nodes[:, None] ** np.arange(nodes.size)[None, :]


def vandermonde_inverse(nodes, tol_gap: float = TOL_GAP) -> np.ndarray:
    """Inverse of ``V[i, j] = nodes[i] ** j`` from elementary symmetric
    polynomials of the nodes, without any linear solve.

    ``inv[i, j] = (-1)^(i+j) e_{p-1-i}(nodes without j) / den_j`` (0-indexed),
    ``den_j = prod_{k<j} (x_j - x_k) * prod_{k>j} (x_k - x_j)``.
    """
    x = np.asarray(nodes, dtype=complex).reshape(-1)
    p = x.size
    if p == 0:
        raise InvalidDegree("need at least one node")
    _gap_products(x, tol_gap)
    inv = np.empty((p, p), dtype=complex)
    for j in range(p):
        others = np.delete(x, j)
        e = _elementary_symmetric(others)
        den = np.prod(x[j] - x[:j]) * np.prod(x[j + 1:] - x[j])
        for i in range(p):
            # 1-indexed formula uses (-1)^(i+j) with the same parity
            inv[i, j] = (-1) ** (i + j) * e[p - 1 - i] / den
    return inv


def ar_params_to_char_poly(phi) -> MonicPolynomial:
    """``z^n - phi_1 z^(n-1) - ... - phi_n``: the polynomial whose roots are
    the eigenvalues behind AR parameters ``phi``."""
    phi = np.asarray(phi, dtype=float).reshape(-1)
    return MonicPolynomial(-phi)


def char_poly_to_ar_params(p) -> np.ndarray:
    return -_as_poly(p).coeffs.copy()


def ar_lag_polynomial(phi) -> np.ndarray:
    """Ascending coefficients of ``1 - phi_1 z - ... - phi_n z^n``.

    Its roots are the reciprocals of the nonzero eigenvalues; kept for
    callers working with the lag-operator form.
    """
    phi = np.asarray(phi, dtype=float).reshape(-1)
    return np.concatenate([[1.0], -phi])
