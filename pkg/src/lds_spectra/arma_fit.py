"""Autoregressive parameter estimation.

Three estimators share one ridge solver:

* :func:`ols_ar` -- plain least squares AR(p), the baseline;
* :func:`iterated_regression` -- regularized iterated regression for the AR
  part of an ARMA(n, n) series;
* :func:`iterated_regression_armax` -- the same per output channel with
  optional exogenous regressors, averaged over channels.

Missing observations are NaN. A regression row is dropped whenever its target
or any lagged value it references is missing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InsufficientData, MissingInputs, RankDeficient, ShapeError
from .lds_core import TimeSeries

RANK_TOL = 1e-10
RESIDUAL_SCHEMES = ("staggered", "latest")


@dataclass(frozen=True)
class FitConfig:
    order: int
    ridge_alpha: float = 0.01
    include_intercept: bool = True
    # first exogenous lag: 0 gives lags 0..n-1, 1 gives lags 1..n-1
    exog_lag_start: int = 0
    # "staggered": residual lag j at pass i comes from pass i - j;
    # "latest": every residual lag comes from pass i - 1
    residual_scheme: str = "staggered"

    def __post_init__(self):
        if int(self.order) < 1:
            raise ValueError("order must be >= 1")
        if not np.isfinite(self.ridge_alpha) or self.ridge_alpha < 0:
            raise ValueError("ridge_alpha must be finite and >= 0")
        if self.exog_lag_start not in (0, 1):
            raise ValueError("exog_lag_start must be 0 or 1")
        if self.residual_scheme not in RESIDUAL_SCHEMES:
            raise ValueError(f"residual_scheme must be one of {RESIDUAL_SCHEMES}")


@dataclass
class ArmaFit:
    phi: np.ndarray
    theta: np.ndarray
    intercept: float
    residuals: np.ndarray
    per_dim_phi: np.ndarray
    iterations_run: int
    rows_used: int

    @property
    def order(self) -> int:
        return self.phi.size


def ridge_ls(design, targets, penalty_mask, alpha: float) -> np.ndarray:
    """Minimize ``|X b - y|^2 + alpha * |b[mask]|^2`` by a QR factorization of
    ``X`` stacked on ``sqrt(alpha)`` rows selecting the masked columns.

    Raises
    ------
    RankDeficient
        When the smallest diagonal entry of R falls below ``1e-10`` times
        the largest.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(targets, dtype=float).reshape(-1)
    mask = np.asarray(penalty_mask, dtype=bool).reshape(-1)
    rows, cols = X.shape
    if mask.size != cols or y.size != rows:
        raise ShapeError("design, targets and penalty_mask sizes disagree")
    if rows < cols:
        raise InsufficientData(f"{rows} rows for {cols} unknowns")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha > 0 and mask.any():
        idx = np.flatnonzero(mask)
        aug = np.zeros((idx.size, cols))
        aug[np.arange(idx.size), idx] = np.sqrt(alpha)
        X = np.vstack([X, aug])
        y = np.concatenate([y, np.zeros(idx.size)])
    Q, R = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(R))
    if diag.size and diag.min() < RANK_TOL * diag.max():
        raise RankDeficient(
            f"design is rank deficient (|R| diag ratio {diag.min() / diag.max():.2e})"
        )
    return solve_triangular(R, Q.T @ y)


def _single_channel(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        if series.channels != 1:
            raise ShapeError(
                f"expected a single-channel series, got {series.channels} channels"
            )
        return series.outputs[:, 0]
    y = np.asarray(series, dtype=float)
    if y.ndim == 2 and y.shape[1] == 1:
        y = y[:, 0]
    if y.ndim != 1:
        raise ShapeError(f"expected a 1-d series, got shape {y.shape}")
    return y


def _lags(v: np.ndarray, lags, start: int, stop: int) -> list:
    # v[t - j] for t in [start, stop), one block per lag
    return [v[start - j: stop - j] for j in lags]


def ols_ar(series, p: int, include_intercept: bool = True) -> np.ndarray:
    """Least squares AR(p) coefficients ``(phi_1, ..., phi_p)``."""
    y = _single_channel(series)
    T = y.size
    cols = _lags(y, range(1, p + 1), p, T)
    X = np.column_stack(cols) if cols else np.empty((max(T - p, 0), 0))
    target = y[p:]
    keep = np.isfinite(target) & np.all(np.isfinite(X), axis=1)
    if keep.sum() < 2 * p + 5:
        raise InsufficientData(f"{keep.sum()} usable rows, need {2 * p + 5}")
    X = X[keep]
    if include_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    beta = ridge_ls(X, target[keep], np.zeros(X.shape[1], dtype=bool), 0.0)
    return beta[1:] if include_intercept else beta


def _iterate_channel(y: np.ndarray, x: np.ndarray | None, cfg: FitConfig, min_rows: int):
    """Regularized iterated regression on one channel.

    Returns ``(phi, theta, intercept, residuals, rows_used, solves)``.
    """
    n = int(cfg.order)
    T = y.size
    if T <= n:
        raise InsufficientData(f"series of length {T} is too short for order {n}")
    target = y[n:]
    ar_block = np.column_stack(_lags(y, range(1, n + 1), n, T))
    blocks = [ar_block]
    if x is not None:
        exog = _lags(x, range(cfg.exog_lag_start, n), n, T)
        if exog:
            blocks.append(np.hstack(exog))
    fixed = np.hstack(blocks)
    if cfg.include_intercept:
        fixed = np.column_stack([np.ones(T - n), fixed])
    keep = np.isfinite(target) & np.all(np.isfinite(fixed), axis=1)
    rows = int(keep.sum())
    if rows < min_rows:
        raise InsufficientData(f"{rows} usable rows, need {min_rows}")
    fixed_k = fixed[keep]
    target_k = target[keep]
    t_keep = np.flatnonzero(keep) + n

    # history[p + 1] holds the residuals of pass p; history[0] is the zero
    # start. Dropped rows carry their previous value forward.
    history = [np.zeros(T)]
    staggered = cfg.residual_scheme == "staggered"
    n_fixed = fixed.shape[1]
    solves = 0
    for i in range(n + 1):
        if i:
            ma = np.column_stack([
                history[i - j + 1 if staggered else i][t_keep - j] for j in range(1, i + 1)
            ])
            X = np.hstack([fixed_k, ma])
        else:
            X = fixed_k
        mask = np.zeros(X.shape[1], dtype=bool)
        mask[n_fixed:] = True
        beta = ridge_ls(X, target_k, mask, cfg.ridge_alpha)
        solves += 1
        eps = history[-1].copy()
        eps[t_keep] = target_k - X @ beta
        history.append(eps)

    off = 1 if cfg.include_intercept else 0
    phi = beta[off: off + n].copy()
    theta = np.zeros(n)
    theta[: beta.size - n_fixed] = beta[n_fixed:]
    intercept = float(beta[0]) if cfg.include_intercept else 0.0
    residuals = np.full(T, np.nan)
    residuals[t_keep] = eps[t_keep]
    return phi, theta, intercept, residuals, rows, solves


def iterated_regression(series, cfg: FitConfig) -> ArmaFit:
    """AR parameters of a single-channel ARMA(n, n) series.

    At pass ``i = 0..n`` the series is regressed on an intercept, its own
    lags ``1..n`` and estimated innovations at lags ``1..i``; the ridge
    penalty acts only on the innovation coefficients. The AR coefficients of
    the last pass are returned.

    Where the lag-``j`` innovation comes from depends on
    ``cfg.residual_scheme``: ``"staggered"`` (default) takes the residuals of
    pass ``i - j``, ``"latest"`` takes those of pass ``i - 1`` for every
    lag. The two coincide for ``n = 1``. The staggered scheme is the one
    that stays consistent for ARMA(n, n) with n >= 2.
    """
    y = _single_channel(series)
    n = int(cfg.order)
    phi, theta, c, resid, rows, solves = _iterate_channel(y, None, cfg, 3 * n + 10)
    return ArmaFit(phi=phi, theta=theta, intercept=c, residuals=resid,
                   per_dim_phi=phi[None, :].copy(), iterations_run=solves, rows_used=rows)


def iterated_regression_armax(series: TimeSeries, cfg: FitConfig,
                              use_inputs: bool | None = None) -> ArmaFit:
    """Channel-wise iterated regression with exogenous input lags, averaged.

    ``use_inputs=None`` uses the series' inputs when it has any. Exogenous
    coefficients are not penalized. ``theta``, ``intercept`` and
    ``rows_used`` are channel averages (rows: minimum over channels);
    ``iterations_run`` counts regression solves per channel.
    """
    if not isinstance(series, TimeSeries):
        series = TimeSeries(np.asarray(series, dtype=float))
    if use_inputs is None:
        use_inputs = series.inputs is not None
    if use_inputs and series.inputs is None:
        raise MissingInputs("exogenous terms requested but the series has no inputs")
    x = series.inputs if use_inputs else None
    n = int(cfg.order)
    k = x.shape[1] if x is not None else 0
    min_rows = 3 * n + 10 + n * k
    per_dim, thetas, cs, resid, rows_used = [], [], [], [], []
    solves = 0
    for d in range(series.channels):
        phi, theta, c, r, rows, solves = _iterate_channel(series.outputs[:, d], x, cfg,
                                                          min_rows)
        per_dim.append(phi)
        thetas.append(theta)
        cs.append(c)
        resid.append(r)
        rows_used.append(rows)
    per_dim = np.array(per_dim)
    return ArmaFit(phi=per_dim.mean(axis=0), theta=np.mean(thetas, axis=0),
                   intercept=float(np.mean(cs)), residuals=np.column_stack(resid),
                   per_dim_phi=per_dim, iterations_run=solves, rows_used=min(rows_used))


def fit_series(series: TimeSeries, cfg: FitConfig) -> ArmaFit:
    """Dispatch: single channel without inputs to :func:`iterated_regression`,
    everything else to :func:`iterated_regression_armax`."""
    if series.channels == 1 and series.inputs is None:
        return iterated_regression(series, cfg)
    return iterated_regression_armax(series, cfg)


def ar_baseline_fit(series: TimeSeries, order: int) -> ArmaFit:
    """OLS AR(order) fit per channel, averaged, in :class:`ArmaFit` form."""
    per_dim = np.array([ols_ar(series.outputs[:, d], order)
                        for d in range(series.channels)])
    return ArmaFit(phi=per_dim.mean(axis=0), theta=np.zeros(order), intercept=0.0,
                   residuals=np.full(series.outputs.shape, np.nan), per_dim_phi=per_dim,
                   iterations_run=1, rows_used=series.length - order)
