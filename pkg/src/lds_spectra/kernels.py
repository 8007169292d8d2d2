"""Hot numeric kernels, each with a numba path and a numpy path.

The public names at the bottom of the module (``lds_recurrence``,
``real_eigvals``, ``assign_min_cost``, ``nearest_center``) dispatch on
:data:`lds_spectra._accel.USE_JIT`. Both variants are importable under their
``*_jit`` / ``*_numpy`` names so they can be compared directly.

The QR and assignment kernels are scalar loops with no useful vectorised
form; their numpy path is the same code run by the interpreter.
"""
import numpy as np

from ._accel import USE_JIT, njit

_EPS = np.finfo(np.float64).eps


# --------------------------------------------------------------------------
# LDS recurrence
# --------------------------------------------------------------------------

@njit
def _lds_recurrence_jit(A, B, C, D, x, state_noise, output_noise):
    T = x.shape[0]
    n = A.shape[0]
    m = C.shape[0]
    k = B.shape[1]
    y = np.empty((T, m))
    h = np.zeros(n)
    h_new = np.empty(n)
    for t in range(T):
        for i in range(n):
            acc = state_noise[t, i]
            for j in range(n):
                acc += A[i, j] * h[j]
            for j in range(k):
                acc += B[i, j] * x[t, j]
            h_new[i] = acc
        for i in range(n):
            h[i] = h_new[i]
        for i in range(m):
            acc = output_noise[t, i]
            for j in range(n):
                acc += C[i, j] * h[j]
            for j in range(k):
                acc += D[i, j] * x[t, j]
            y[t, i] = acc
    return y


def _lds_recurrence_numpy(A, B, C, D, x, state_noise, output_noise):
    # Input and noise terms are independent of the state, so they are
    # precomputed in bulk; only the state update stays sequential.
    drive = x @ B.T + state_noise
    states = np.empty((x.shape[0], A.shape[0]))
    h = np.zeros(A.shape[0])
    for t in range(x.shape[0]):
        h = A @ h + drive[t]
        states[t] = h
    return states @ C.T + x @ D.T + output_noise


# --------------------------------------------------------------------------
# Eigenvalues of a real matrix: balance, reduce to Hessenberg, Francis QR
# --------------------------------------------------------------------------

@njit
def _balance(a, n):
    # Diagonal similarity with powers of two (exact in floating point);
    # a is 1-indexed, modified in place.
    radix = 2.0
    sqrdx = radix * radix
    done = False
    while not done:
        done = True
        for i in range(1, n + 1):
            r = 0.0
            c = 0.0
            for j in range(1, n + 1):
                if j != i:
                    c += abs(a[j, i])
                    r += abs(a[i, j])
            if c != 0.0 and r != 0.0:
                g = r / radix
                f = 1.0
                s = c + r
                while c < g:
                    f *= radix
                    c *= sqrdx
                g = r * radix
                while c > g:
                    f /= radix
                    c /= sqrdx
                if (c + r) / f < 0.95 * s:
                    done = False
                    g = 1.0 / f
                    for j in range(1, n + 1):
                        a[i, j] *= g
                    for j in range(1, n + 1):
                        a[j, i] *= f


@njit
def _to_hessenberg(a, n):
    # Gaussian elimination with pivoting; stabilised elementary similarities.
    for m in range(2, n):
        x = 0.0
        i = m
        for j in range(m, n + 1):
            if abs(a[j, m - 1]) > abs(x):
                x = a[j, m - 1]
                i = j
        if i != m:
            for j in range(m - 1, n + 1):
                tmp = a[i, j]
                a[i, j] = a[m, j]
                a[m, j] = tmp
            for j in range(1, n + 1):
                tmp = a[j, i]
                a[j, i] = a[j, m]
                a[j, m] = tmp
        if x != 0.0:
            for i in range(m + 1, n + 1):
                y = a[i, m - 1]
                if y != 0.0:
                    y /= x
                    a[i, m - 1] = y
                    for j in range(m, n + 1):
                        a[i, j] -= y * a[m, j]
                    for j in range(1, n + 1):
                        a[j, m] += y * a[j, i]
    for i in range(3, n + 1):
        for j in range(1, i - 1):
            a[i, j] = 0.0


@njit
def _francis_qr(a, n, wr, wi, max_iter):
    """Double-shift QR on the 1-indexed upper Hessenberg matrix ``a``.

    Fills ``wr``/``wi`` (1-indexed) from the bottom up and returns
    ``(iterations, lowest_unconverged_index)``; the second value is 0 on
    success.
    """
    anorm = 0.0
    for i in range(1, n + 1):
        for j in range(max(i - 1, 1), n + 1):
            anorm += abs(a[i, j])
    nn = n
    t = 0.0
    total = 0
    x = y = z = w = p = q = r = s = 0.0
    while nn >= 1:
        its = 0
        while True:
            l = nn
            while l >= 2:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= _EPS * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                wi[nn] = 0.0
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = np.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + (z if p >= 0.0 else -z)
                    wr[nn - 1] = x + z
                    wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                    wi[nn - 1] = 0.0
                    wi[nn] = 0.0
                else:
                    wr[nn - 1] = x + p
                    wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if total >= max_iter:
                return total, nn
            if its == 10 or its == 20:
                # exceptional shift
                t += x
                for i in range(1, nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                x = 0.75 * s
                y = x
                w = -0.4375 * s * s
            its += 1
            total += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= _EPS * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = 0.0
                    if k != nn - 1:
                        r = a[k + 2, k - 1]
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = np.sqrt(p * p + q * q + r * r)
                if p < 0.0:
                    s = -s
                if s != 0.0:
                    if k == m:
                        if l != m:
                            a[k, k - 1] = -a[k, k - 1]
                    else:
                        a[k, k - 1] = -s * x
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    for j in range(k, nn + 1):
                        p = a[k, j] + q * a[k + 1, j]
                        if k != nn - 1:
                            p += r * a[k + 2, j]
                            a[k + 2, j] -= p * z
                        a[k + 1, j] -= p * y
                        a[k, j] -= p * x
                    mmin = nn if nn < k + 3 else k + 3
                    for i in range(l, mmin + 1):
                        p = x * a[i, k] + y * a[i, k + 1]
                        if k != nn - 1:
                            p += z * a[i, k + 2]
                            a[i, k + 2] -= p * r
                        a[i, k + 1] -= p * q
                        a[i, k] -= p
    return total, 0


@njit
def _real_eigvals_jit(matrix, max_iter):
    n = matrix.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = matrix
    _balance(a, n)
    _to_hessenberg(a, n)
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    its, stuck = _francis_qr(a, n, wr, wi, max_iter)
    return wr[1:], wi[1:], its, stuck


def _real_eigvals_numpy(matrix, max_iter):
    n = matrix.shape[0]
    a = np.zeros((n + 1, n + 1))
    a[1:, 1:] = matrix
    _balance.py_func(a, n)
    _to_hessenberg.py_func(a, n)
    wr = np.zeros(n + 1)
    wi = np.zeros(n + 1)
    its, stuck = _francis_qr.py_func(a, n, wr, wi, max_iter)
    return wr[1:], wi[1:], its, stuck


# --------------------------------------------------------------------------
# Minimum-cost assignment (Hungarian method with potentials)
# --------------------------------------------------------------------------

@njit
def _assign_min_cost_jit(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    cols = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        cols[p[j] - 1] = j - 1
    return cols


_assign_min_cost_numpy = _assign_min_cost_jit.py_func


# --------------------------------------------------------------------------
# k-means assignment step
# --------------------------------------------------------------------------

@njit
def _nearest_center_jit(points, centers):
    N, d = points.shape
    K = centers.shape[0]
    labels = np.empty(N, dtype=np.int64)
    dist2 = np.empty(N)
    for i in range(N):
        best = np.inf
        arg = 0
        for c in range(K):
            acc = 0.0
            for j in range(d):
                diff = points[i, j] - centers[c, j]
                acc += diff * diff
            if acc < best:
                best = acc
                arg = c
        labels[i] = arg
        dist2[i] = best
    return labels, dist2


def _nearest_center_numpy(points, centers):
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels.astype(np.int64), d2[np.arange(points.shape[0]), labels]


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

if USE_JIT:
    lds_recurrence = _lds_recurrence_jit
    real_eigvals = _real_eigvals_jit
    assign_min_cost = _assign_min_cost_jit
    nearest_center = _nearest_center_jit
else:
    lds_recurrence = _lds_recurrence_numpy
    real_eigvals = _real_eigvals_numpy
    assign_min_cost = _assign_min_cost_numpy
    nearest_center = _nearest_center_numpy

BACKEND = "numba" if USE_JIT else "numpy"
