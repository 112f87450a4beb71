"""Compiled inner loops.

All kernels are ``nogil`` so the thread pool in :mod:`quasispec.pool` gets
real parallelism.  Matrices are passed around as four scalars
``(a, b, c, d)`` for ``[[a, b], [c, d]]``.
"""

import math

import numba
import numpy as np

_jit = numba.njit(cache=True, nogil=True)


@_jit
def spectral_norm(a, b, c, d):
    # closed form: sigma_max = (p + q) / 2, sigma_min = |p - q| / 2
    p = math.hypot(a + d, b - c)
    q = math.hypot(a - d, b + c)
    return 0.5 * (p + q)


# Products are carried as a QR frame: M = exp(l1) * Q @ [[1, u], [0, e]] with
# Q = [[q1, -sg*q2], [q2, sg*q1]] orthogonal (sg = +-1) and e = exp(l2 - l1).
# l1 and l2 are the logs of the triangular diagonal, so log|det M| = l1 + l2 is
# accumulated from the arithmetic itself rather than assumed.


@_jit
def _qr_step(m11, m12, m21, m22, q1, q2, sg, u, e):
    # F @ Q = Q' @ [[r11, r12], [0, r22]]; returns Q', the updated (u, e) and r11, r22
    f1 = -sg * q2
    f2 = sg * q1
    x1 = m11 * q1 + m12 * q2
    x2 = m21 * q1 + m22 * q2
    y1 = m11 * f1 + m12 * f2
    y2 = m21 * f1 + m22 * f2
    r11 = math.sqrt(x1 * x1 + x2 * x2)
    p1 = x1 / r11
    p2 = x2 / r11
    r12 = p1 * y1 + p2 * y2
    w = p1 * y2 - p2 * y1
    s = 1.0 if w >= 0.0 else -1.0
    r22 = abs(w)
    u = u + (r12 / r11) * e
    e = e * (r22 / r11)
    return p1, p2, s, u, e, r11, r22


# the diagonal is multiplied up in plain doubles and moved into the logs only
# when it leaves [1e-150, 1e150]: one log per ~100 factors instead of two per factor
_FLUSH_HI = 1e150
_FLUSH_LO = 1e-150


@_jit
def transfer_product(vals, E, q1, q2, sg, l1, l2, u, e):
    """Left-multiply ``[[E - v, -1], [1, 0]]`` for each ``v`` in ``vals``."""
    d1 = 1.0
    d2 = 1.0
    for k in range(vals.size):
        q1, q2, sg, u, e, r11, r22 = _qr_step(E - vals[k], -1.0, 1.0, 0.0, q1, q2, sg, u, e)
        d1 *= r11
        d2 *= r22
        if d1 > _FLUSH_HI or d1 < _FLUSH_LO or d2 > _FLUSH_HI or d2 < _FLUSH_LO:
            l1 += math.log(d1)
            l2 += math.log(d2)
            d1 = 1.0
            d2 = 1.0
    return q1, q2, sg, l1 + math.log(d1), l2 + math.log(d2), u, e


@_jit
def general_product(mats, q1, q2, sg, l1, l2, u, e):
    """Left-multiply arbitrary invertible 2x2 factors ``mats[k]`` in order."""
    d1 = 1.0
    d2 = 1.0
    for k in range(mats.shape[0]):
        q1, q2, sg, u, e, r11, r22 = _qr_step(mats[k, 0, 0], mats[k, 0, 1], mats[k, 1, 0], mats[k, 1, 1],
                                              q1, q2, sg, u, e)
        d1 *= r11
        d2 *= r22
        if d1 > _FLUSH_HI or d1 < _FLUSH_LO or d2 > _FLUSH_HI or d2 < _FLUSH_LO:
            l1 += math.log(d1)
            l2 += math.log(d2)
            d1 = 1.0
            d2 = 1.0
    return q1, q2, sg, l1 + math.log(d1), l2 + math.log(d2), u, e


@_jit
def log_norms(vals, energies):
    """``log ||M^E(|x|)||`` for each energy (the word is fixed)."""
    out = np.empty(energies.size)
    for j in range(energies.size):
        q1, q2, sg, l1, l2, u, e = transfer_product(vals, energies[j], 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
        out[j] = l1 + math.log(spectral_norm(1.0, u, 0.0, e))
    return out


@_jit
def log_abs_traces(vals, energies):
    """``log |tr M^E(|p|)|`` for each energy (``-inf`` for a zero trace)."""
    out = np.empty(energies.size)
    for j in range(energies.size):
        q1, q2, sg, l1, l2, u, e = transfer_product(vals, energies[j], 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)
        tr = abs(q1 + q2 * u + sg * q1 * e)
        out[j] = l1 + math.log(tr) if tr > 0.0 else -np.inf
    return out


@_jit
def _combine(A, B, C, D, L, other, shift, count):
    # in place: X[i] <- Y[i + shift] @ X[i], Y given as `other`
    oA, oB, oC, oD, oL = other
    for i in range(count):
        j = i + shift
        a = oA[j] * A[i] + oB[j] * C[i]
        b = oA[j] * B[i] + oB[j] * D[i]
        c = oC[j] * A[i] + oD[j] * C[i]
        d = oC[j] * B[i] + oD[j] * D[i]
        s = spectral_norm(a, b, c, d)
        r = 1.0 / s
        A[i] = a * r
        B[i] = b * r
        C[i] = c * r
        D[i] = d * r
        L[i] = L[i] + oL[j] + math.log(s)


@_jit
def window_log_norms(vals, E, n):
    """``log ||M^E||`` of every length-``n`` factor ``vals[i:i+n]``.

    Binary doubling: level ``j`` holds products over blocks of length
    ``2**j``; the blocks picked out by the bits of ``n`` are chained onto an
    accumulator.  Cost is ``O(len(vals) * log n)``.
    """
    W = vals.size
    P = W - n + 1
    # level 0
    A = np.empty(W)
    B = np.empty(W)
    C = np.empty(W)
    D = np.empty(W)
    L = np.empty(W)
    for i in range(W):
        t = E - vals[i]
        s = spectral_norm(t, -1.0, 1.0, 0.0)
        A[i] = t / s
        B[i] = -1.0 / s
        C[i] = 1.0 / s
        D[i] = 0.0
        L[i] = math.log(s)
    rA = np.ones(P)
    rB = np.zeros(P)
    rC = np.zeros(P)
    rD = np.ones(P)
    rL = np.zeros(P)
    acc = 0
    block = 1
    m = n
    level_len = W
    while m > 0:
        if m & 1:
            _combine(rA, rB, rC, rD, rL, (A, B, C, D, L), acc, P)
            acc += block
        m >>= 1
        if m == 0:
            break
        # next level: X[i] <- X[i + block] @ X[i]
        new_len = level_len - block
        nA = A[:new_len].copy()
        nB = B[:new_len].copy()
        nC = C[:new_len].copy()
        nD = D[:new_len].copy()
        nL = L[:new_len].copy()
        _combine(nA, nB, nC, nD, nL, (A, B, C, D, L), block, new_len)
        A, B, C, D, L = nA, nB, nC, nD, nL
        level_len = new_len
        block *= 2
    out = np.empty(P)
    for i in range(P):
        out[i] = rL[i] + math.log(spectral_norm(rA[i], rB[i], rC[i], rD[i]))
    return out


@_jit
def solution_recursion(vals, E, u0, u1):
    n = vals.size
    u = np.empty(n + 2)
    u[0] = u0
    u[1] = u1
    for k in range(n):
        u[k + 2] = (E - vals[k]) * u[k + 1] - u[k]
    return u


# ---------------------------------------------------------------- tridiagonal


@_jit
def sturm_count(diag, x):
    """Number of eigenvalues of tridiag(1, diag, 1) strictly below ``x``."""
    count = 0
    q = 1.0
    for i in range(diag.size):
        if i == 0:
            q = diag[0] - x
        else:
            q = diag[i] - x - 1.0 / q
        if q == 0.0:
            q = -1e-300
        if q < 0.0:
            count += 1
    return count


@_jit
def bisect_eigenvalues(diag, rel_tol):
    n = diag.size
    lo0 = diag.min() - 2.0
    hi0 = diag.max() + 2.0
    scale = max(abs(lo0), abs(hi0), 1.0)
    tol = rel_tol * scale
    out = np.empty(n)
    lo_prev = lo0
    for k in range(n):
        lo = lo_prev
        hi = hi0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if sturm_count(diag, mid) > k:
                hi = mid
            else:
                lo = mid
        out[k] = 0.5 * (lo + hi)
        lo_prev = lo
    return out


@_jit
def _tridiag_solve(dl, d, du, b):
    # Gaussian elimination with partial pivoting (LAPACK dgtsv layout); inputs are overwritten
    n = d.size
    du2 = np.zeros(n)
    tiny = 1e-300
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0.0:
                d[i] = tiny
            fact = dl[i] / d[i]
            d[i + 1] -= fact * du[i]
            b[i + 1] -= fact * b[i]
        else:
            fact = d[i] / dl[i]
            d[i] = dl[i]
            temp = d[i + 1]
            d[i + 1] = du[i] - fact * temp
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du2[i]
            du[i] = temp
            temp = b[i]
            b[i] = b[i + 1]
            b[i + 1] = temp - fact * b[i + 1]
    if d[n - 1] == 0.0:
        d[n - 1] = tiny
    b[n - 1] /= d[n - 1]
    if n > 1:
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2]
    for i in range(n - 3, -1, -1):
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i]
    return b


@_jit
def inverse_iteration(diag, lam, iters):
    """Unit eigenvector of tridiag(1, diag, 1) for the eigenvalue ``lam``."""
    n = diag.size
    x = np.empty(n)
    # deterministic, non-symmetric start vector
    for i in range(n):
        x[i] = 1.0 + 0.5 * math.sin(1.7 * i + 0.3)
    for _ in range(iters):
        dl = np.ones(max(n - 1, 0))
        du = np.ones(max(n - 1, 0))
        d = diag - lam
        x = _tridiag_solve(dl, d, du, x)
        nrm = math.sqrt(np.sum(x * x))
        if not np.isfinite(nrm) or nrm == 0.0:
            break
        x /= nrm
    return x


@_jit
def edge_masses(diag, eigenvalues, edge_sites, iters):
    n = diag.size
    out = np.empty(eigenvalues.size)
    for k in range(eigenvalues.size):
        v = inverse_iteration(diag, eigenvalues[k], iters)
        m = 0.0
        for i in range(edge_sites):
            m += v[i] * v[i] + v[n - 1 - i] * v[n - 1 - i]
        out[k] = m
    return out
