"""K-means on AR-parameter vectors and external cluster-quality metrics.

Metric conventions for degenerate inputs:

* ARI: identical partitions score 1, otherwise a zero denominator gives 0.
* V-measure: a zero entropy makes the matching score (homogeneity or
  completeness) 1; ``h + c = 0`` gives 0.
* AMI: normalized by the arithmetic mean of the two entropies; identical
  partitions score 1, otherwise a zero denominator gives 0.

Entropies are in nats. Sums go through ``math.fsum``, which is exactly
rounded, so every metric is bit-for-bit invariant under label permutation
and ARI / AMI are bit-for-bit symmetric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from . import kernels
from ._parallel import ordered_map
from .arma_fit import ArmaFit
from .errors import InvalidParams, LengthMismatch, OrderMismatch, ShapeError, TooManyClusters
from .lds_core import as_rng


@dataclass(frozen=True)
class Labeling:
    labels: np.ndarray
    num_clusters: int | None = None

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 1 or lab.size < 1:
            raise ShapeError("labels must be a non-empty vector")
        if not np.issubdtype(lab.dtype, np.integer):
            if not np.all(lab == np.round(lab)):
                raise InvalidParams("labels must be integers")
        lab = lab.astype(np.int64)
        if lab.min() < 0:
            raise InvalidParams("labels must be >= 0")
        K = int(lab.max()) + 1 if self.num_clusters is None else int(self.num_clusters)
        if lab.max() >= K:
            raise InvalidParams(f"label {lab.max()} out of range for K={K}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "num_clusters", K)

    def __len__(self) -> int:
        return self.labels.size


@dataclass
class KMeansResult:
    assignment: Labeling
    centers: np.ndarray
    inertia: float
    restarts_used: int
    iters_per_restart: list
    # per restart, the inertia after each assignment step
    inertia_history: list = field(default_factory=list)


def _kmeans_pp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    N = X.shape[0]
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(N)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, K):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(N))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, N - 1)
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(X: np.ndarray, K: int, rng: np.random.Generator, max_iters: int, tol: float):
    centers = _kmeans_pp(X, K, rng)
    history = []
    labels, d2 = kernels.nearest_center(X, centers)
    history.append(float(d2.sum()))
    its = 0
    for its in range(1, max_iters + 1):
        new = np.empty_like(centers)
        counts = np.bincount(labels, minlength=K)
        taken = set()
        for c in range(K):
            if counts[c]:
                new[c] = X[labels == c].mean(axis=0)
            else:
                # re-seed from the point farthest from its current center
                order = np.argsort(-d2, kind="stable")
                far = next(int(i) for i in order if int(i) not in taken)
                taken.add(far)
                new[c] = X[far]
        shift = float(np.sqrt(((new - centers) ** 2).sum()))
        centers = new
        labels, d2 = kernels.nearest_center(X, centers)
        history.append(float(d2.sum()))
        if shift <= tol:
            break
    return labels, centers, float(d2.sum()), its, history


def kmeans(points, K: int, rng=None, restarts: int = 10, max_iters: int = 300,
           tol: float = 1e-6, max_workers: int | None = None) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts``.

    Restart ``r`` draws from its own generator spawned from ``rng``, so the
    result does not depend on ``max_workers``. Ties in inertia go to the
    lowest restart index.
    """
    X = np.ascontiguousarray(np.asarray(points, dtype=float))
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeError(f"points must be (N, d), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidParams("points must be finite")
    K = int(K)
    if K < 1:
        raise InvalidParams("K must be >= 1")
    if K > X.shape[0]:
        raise TooManyClusters(f"K={K} exceeds N={X.shape[0]}")
    if restarts < 1:
        raise InvalidParams("restarts must be >= 1")
    rngs = as_rng(rng).spawn(restarts)
    runs = ordered_map(lambda g: _lloyd(X, K, g, max_iters, tol), rngs, max_workers)
    best = min(range(restarts), key=lambda r: (runs[r][2], r))
    labels, centers, inertia, _, _ = runs[best]
    return KMeansResult(
        assignment=Labeling(labels, K), centers=centers, inertia=inertia,
        restarts_used=restarts, iters_per_restart=[r[3] for r in runs],
        inertia_history=[r[4] for r in runs],
    )


def cluster_series(fits, K: int, rng=None, **kwargs) -> KMeansResult:
    """K-means on the stacked AR-parameter vectors of ``fits`` (ArmaFit
    objects or plain vectors)."""
    phis = [np.asarray(f.phi if isinstance(f, ArmaFit) else f, dtype=float).reshape(-1)
            for f in fits]
    if not phis:
        raise ShapeError("no fits to cluster")
    if len({p.size for p in phis}) != 1:
        raise OrderMismatch("fits have different orders")
    return kmeans(np.vstack(phis), K, rng, **kwargs)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def _labels(x) -> np.ndarray:
    return x.labels if isinstance(x, Labeling) else np.asarray(x).reshape(-1)


def contingency(a, b) -> np.ndarray:
    a, b = _labels(a), _labels(b)
    if a.size != b.size:
        raise LengthMismatch(f"labelings have lengths {a.size} and {b.size}")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _comb2(x) -> float:
    x = np.asarray(x, dtype=float).ravel()
    return math.fsum(x * (x - 1) / 2)


def _same_partition(table: np.ndarray) -> bool:
    return table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0]


def adjusted_rand(a, b) -> float:
    table = contingency(a, b)
    N = table.sum()
    if _same_partition(table):
        return 1.0
    sum_ij = _comb2(table)
    sum_a = _comb2(table.sum(axis=1))
    sum_b = _comb2(table.sum(axis=0))
    expected = sum_a * sum_b / (N * (N - 1) / 2) if N > 1 else 0.0
    denom = 0.5 * (sum_a + sum_b) - expected
    if denom == 0:
        return 0.0
    return float((sum_ij - expected) / denom)


def _entropy(counts) -> float:
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    p = c / math.fsum(c)
    return -math.fsum(p * np.log(p))


def _mutual_info(table: np.ndarray) -> float:
    N = table.sum()
    a = table.sum(axis=1, keepdims=True)
    b = table.sum(axis=0, keepdims=True)
    nz = table > 0
    nij = table[nz].astype(float)
    return math.fsum(nij / N * np.log(N * nij / (a * b)[nz]))


def v_measure(truth, pred) -> float:
    table = contingency(truth, pred)
    h_truth = _entropy(table.sum(axis=1))
    h_pred = _entropy(table.sum(axis=0))
    mi = _mutual_info(table)
    # H(truth | pred) = H(truth) - MI, likewise for completeness
    h = 1.0 if h_truth == 0 else 1.0 - (h_truth - mi) / h_truth
    c = 1.0 if h_pred == 0 else 1.0 - (h_pred - mi) / h_pred
    if h + c == 0:
        return 0.0
    return float(2 * h * c / (h + c))


def expected_mutual_info(table: np.ndarray) -> float:
    """Exact E[MI] under the hypergeometric model with the table's margins."""
    N = int(table.sum())
    a = table.sum(axis=1).astype(np.int64)
    b = table.sum(axis=0).astype(np.int64)
    # grouped per margin so that swapping the two labelings only swaps
    # operands of commutative additions
    lg_a = gammaln(a + 1) + gammaln(N - a + 1)
    lg_b = gammaln(b + 1) + gammaln(N - b + 1)
    lg_N = gammaln(N + 1)
    terms = []
    for i in range(a.size):
        for j in range(b.size):
            lo = max(1, a[i] + b[j] - N)
            hi = min(a[i], b[j])
            if hi < lo:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            term = nij / N * (np.log(N * nij) - np.log(a[i] * b[j]))
            logp = ((lg_a[i] + lg_b[j]) - lg_N - gammaln(nij + 1)
                    - (gammaln(a[i] - nij + 1) + gammaln(b[j] - nij + 1))
                    - gammaln(N - a[i] - b[j] + nij + 1))
            terms.extend(term * np.exp(logp))
    return math.fsum(terms)


def adjusted_mutual_info(truth, pred) -> float:
    table = contingency(truth, pred)
    if _same_partition(table):
        return 1.0
    mi = _mutual_info(table)
    emi = expected_mutual_info(table)
    norm = 0.5 * (_entropy(table.sum(axis=1)) + _entropy(table.sum(axis=0)))
    denom = norm - emi
    if denom == 0:
        return 0.0
    return float((mi - emi) / denom)


__all__ = [
    "Labeling", "KMeansResult", "kmeans", "cluster_series", "contingency",
    "adjusted_rand", "v_measure", "expected_mutual_info", "adjusted_mutual_info",
]
