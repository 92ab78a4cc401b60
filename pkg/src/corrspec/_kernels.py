"""Compiled inner loops for the symmetric eigensolver."""

from __future__ import annotations

import math

import numba
import numpy as np



@numba.njit(cache=True, nogil=True)
def tql_implicit(d, e, z, want_vectors):
    """Implicit-shift QL on a symmetric tridiagonal matrix, in place.

    ``d`` holds the diagonal, ``e[i]`` couples ``d[i]`` and ``d[i + 1]``
    (``e[n - 1]`` is ignored). Rotations are accumulated into the columns
    of ``z`` when ``want_vectors`` is set. Returns 0 on success, -1 when an
    eigenvalue needs more than 60 sweeps.
    """
    n = d.shape[0]
    if n == 0:
        return 0
    e[n - 1] = 0.0
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > 60:
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            deflated = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    deflated = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(z.shape[0]):
                        f = z[k, i + 1]
                        z[k, i + 1] = s * z[k, i] + c * f
                        z[k, i] = c * z[k, i] - s * f
                i -= 1
            if deflated:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


@numba.njit(cache=True, nogil=True)
def jacobi_cyclic(a, v, want_vectors, max_sweeps):
    """Cyclic Jacobi rotations on the symmetric matrix ``a`` (destroyed).

    Returns the diagonal after convergence, or an empty array when
    ``max_sweeps`` is exhausted.
    """
    n = a.shape[0]
    d = np.empty(n)
    for i in range(n):
        d[i] = a[i, i]
    b = d.copy()
    zacc = np.zeros(n)
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += abs(a[p, q])
        if off == 0.0:
            return d
        tresh = 0.2 * off / (n * n) if sweep < 3 else 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                g = 100.0 * abs(apq)
                if (sweep > 3 and abs(d[p]) + g == abs(d[p])
                        and abs(d[q]) + g == abs(d[q])):
                    a[p, q] = 0.0
                elif abs(apq) > tresh:
                    h = d[q] - d[p]
                    if abs(h) + g == abs(h):
                        t = apq / h
                    else:
                        theta = 0.5 * h / apq
                        t = 1.0 / (abs(theta) + math.sqrt(1.0 + theta * theta))
                        if theta < 0.0:
                            t = -t
                    c = 1.0 / math.sqrt(1.0 + t * t)
                    s = t * c
                    tau = s / (1.0 + c)
                    h = t * apq
                    zacc[p] -= h
                    zacc[q] += h
                    d[p] -= h
                    d[q] += h
                    a[p, q] = 0.0
                    for j in range(p):
                        g = a[j, p]
                        h = a[j, q]
                        a[j, p] = g - s * (h + g * tau)
                        a[j, q] = h + s * (g - h * tau)
                    for j in range(p + 1, q):
                        g = a[p, j]
                        h = a[j, q]
                        a[p, j] = g - s * (h + g * tau)
                        a[j, q] = h + s * (g - h * tau)
                    for j in range(q + 1, n):
                        g = a[p, j]
                        h = a[q, j]
                        a[p, j] = g - s * (h + g * tau)
                        a[q, j] = h + s * (g - h * tau)
                    if want_vectors:
                        for j in range(n):
                            g = v[j, p]
                            h = v[j, q]
                            v[j, p] = g - s * (h + g * tau)
                            v[j, q] = h + s * (g - h * tau)
        for p in range(n):
            b[p] += zacc[p]
            d[p] = b[p]
            zacc[p] = 0.0
    return np.empty(0)


@numba.njit(cache=True, nogil=True)
def householder_tridiag(a, d, e, hv, want_q):
    """Reduce symmetric ``a`` to tridiagonal form using its lower triangle.

    ``a`` is overwritten. Reflector ``k`` is stored in row ``k`` of ``hv``
    (entries ``k+1:``) when ``want_q`` is set; a zero row means no
    reflection was needed.
    """
    n = a.shape[0]
    v = np.empty(n)
    p = np.empty(n)
    for k in range(n - 2):
        m = k + 1
        tail = 0.0
        for i in range(m + 1, n):
            tail += a[i, k] * a[i, k]
        if tail == 0.0:
            d[k] = a[k, k]
            e[k] = a[m, k]
            if want_q:
                for i in range(n):
                    hv[k, i] = 0.0
            continue
        x0 = a[m, k]
        norm = math.sqrt(x0 * x0 + tail)
        alpha = -norm if x0 >= 0 else norm
        for i in range(m, n):
            v[i] = a[i, k]
        v[m] -= alpha
        vn = 0.0
        for i in range(m, n):
            vn += v[i] * v[i]
        vn = math.sqrt(vn)
        for i in range(m, n):
            v[i] /= vn
        for i in range(m, n):
            p[i] = 0.0
        for i in range(m, n):
            s = 0.0
            vi = v[i]
            for j in range(m, i):
                aij = a[i, j]
                s += aij * v[j]
                p[j] += aij * vi
            p[i] += s + a[i, i] * vi
        kk = 0.0
        for i in range(m, n):
            kk += v[i] * p[i]
        for i in range(m, n):
            p[i] = 2.0 * (p[i] - kk * v[i])
        for i in range(m, n):
            vi = v[i]
            wi = p[i]
            for j in range(m, i + 1):
                a[i, j] -= vi * p[j] + wi * v[j]
        d[k] = a[k, k]
        e[k] = alpha
        if want_q:
            for i in range(m):
                hv[k, i] = 0.0
            for i in range(m, n):
                hv[k, i] = v[i]
    if n >= 2:
        d[n - 2] = a[n - 2, n - 2]
        e[n - 2] = a[n - 1, n - 2]
    d[n - 1] = a[n - 1, n - 1]


@numba.njit(cache=True, nogil=True)
def accumulate_reflectors(hv, q):
    """Form Q = H_0 H_1 ... H_{n-3} in ``q`` (initialised to identity)."""
    n = q.shape[0]
    w = np.empty(n)
    for k in range(n - 3, -1, -1):
        m = k + 1
        for j in range(n):
            w[j] = 0.0
        for i in range(m, n):
            vi = hv[k, i]
            if vi != 0.0:
                for j in range(n):
                    w[j] += vi * q[i, j]
        for i in range(m, n):
            vi = 2.0 * hv[k, i]
            if vi != 0.0:
                for j in range(n):
                    q[i, j] -= vi * w[j]
