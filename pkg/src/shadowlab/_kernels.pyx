# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: polynomial Hamiltonian derivatives and the batched
implicit-midpoint flow with its exact variational propagation.

Mirrors ``_kernels_py`` call for call; the Python module documents the
argument conventions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, isfinite

cnp.import_array()

cdef enum:
    MAXD = 32

cdef double _TJ1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
cdef double _TJ2 = 1.0 - 2.0 * _TJ1

STATUS_OK = 0
STATUS_NOT_CONVERGED = 1
STATUS_BLOWUP = 2


def substep_fractions(int order):
    if order == 2:
        return (1.0,)
    if order == 4:
        return (_TJ1, _TJ2, _TJ1)
    raise ValueError(f"unsupported integrator order {order}")


def apply_j(v):
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


cdef inline double _ipow(double x, long e) nogil:
    cdef double r = 1.0
    while e > 0:
        if e & 1:
            r *= x
        x *= x
        e >>= 1
    return r


cdef void _grad(const long[:, ::1] exps, const double* c, const double* x,
                int m, int d, double* g) noexcept nogil:
    cdef int i, j, k
    cdef double prod
    for i in range(d):
        g[i] = 0.0
    for k in range(m):
        if c[k] == 0.0:
            continue
        for i in range(d):
            if exps[k, i] == 0:
                continue
            prod = c[k] * exps[k, i] * _ipow(x[i], exps[k, i] - 1)
            for j in range(d):
                if j != i and exps[k, j] != 0:
                    prod *= _ipow(x[j], exps[k, j])
            g[i] += prod


cdef void _hess(const long[:, ::1] exps, const double* c, const double* x,
                int m, int d, double* H) noexcept nogil:
    cdef int i, j, l, k
    cdef long ei, ej
    cdef double prod
    for i in range(d * d):
        H[i] = 0.0
    for k in range(m):
        if c[k] == 0.0:
            continue
        for i in range(d):
            ei = exps[k, i]
            if ei == 0:
                continue
            for j in range(i, d):
                ej = exps[k, j]
                if i == j:
                    if ei < 2:
                        continue
                    prod = c[k] * ei * (ei - 1) * _ipow(x[i], ei - 2)
                else:
                    if ej == 0:
                        continue
                    prod = c[k] * ei * ej * _ipow(x[i], ei - 1) * _ipow(x[j], ej - 1)
                for l in range(d):
                    if l != i and l != j and exps[k, l] != 0:
                        prod *= _ipow(x[l], exps[k, l])
                H[i * d + j] += prod
                if i != j:
                    H[j * d + i] += prod


cdef int _solve(double* A, double* B, int d, int ncol) noexcept nogil:
    """Solve A X = B in place (B overwritten by X); Gaussian elimination with pivoting."""
    cdef int i, j, k, p
    cdef double piv, f, tmp
    for k in range(d):
        p = k
        piv = fabs(A[k * d + k])
        for i in range(k + 1, d):
            if fabs(A[i * d + k]) > piv:
                piv = fabs(A[i * d + k])
                p = i
        if piv == 0.0:
            return 1
        if p != k:
            for j in range(d):
                tmp = A[k * d + j]; A[k * d + j] = A[p * d + j]; A[p * d + j] = tmp
            for j in range(ncol):
                tmp = B[k * ncol + j]; B[k * ncol + j] = B[p * ncol + j]; B[p * ncol + j] = tmp
        for i in range(k + 1, d):
            f = A[i * d + k] / A[k * d + k]
            if f == 0.0:
                continue
            for j in range(k, d):
                A[i * d + j] -= f * A[k * d + j]
            for j in range(ncol):
                B[i * ncol + j] -= f * B[k * ncol + j]
    for k in range(d - 1, -1, -1):
        for j in range(ncol):
            tmp = B[k * ncol + j]
            for i in range(k + 1, d):
                tmp -= A[k * d + i] * B[i * ncol + j]
            B[k * ncol + j] = tmp / A[k * d + k]
    return 0


def poly_eval(exps, coeffs, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    cdef const long[:, ::1] E = exps
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=float)
    cdef const double[:, ::1] X = np.ascontiguousarray(x)
    cdef Py_ssize_t B = X.shape[0], m = E.shape[0], d = E.shape[1]
    out = np.zeros(B)
    cdef double[::1] o = out
    cdef Py_ssize_t b, k, i
    cdef double prod
    for b in range(B):
        for k in range(m):
            prod = c[k]
            for i in range(d):
                if E[k, i] != 0:
                    prod *= _ipow(X[b, i], E[k, i])
            o[b] += prod
    return out


def poly_grad(exps, coeffs, x, _tabs=None):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    cdef const long[:, ::1] E = exps
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=float)
    cdef const double[:, ::1] X = np.ascontiguousarray(x)
    cdef int B = X.shape[0], m = E.shape[0], d = E.shape[1]
    out = np.zeros((B, d))
    cdef double[:, ::1] o = out
    cdef int b
    for b in range(B):
        _grad(E, &c[0], &X[b, 0], m, d, &o[b, 0])
    return out


def poly_grad_hess(exps, coeffs, x, _tabs=None):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    cdef const long[:, ::1] E = exps
    cdef const double[::1] c = np.ascontiguousarray(coeffs, dtype=float)
    cdef const double[:, ::1] X = np.ascontiguousarray(x)
    cdef int B = X.shape[0], m = E.shape[0], d = E.shape[1]
    g = np.zeros((B, d))
    h = np.zeros((B, d, d))
    cdef double[:, ::1] gv = g
    cdef double[:, :, ::1] hv = h
    cdef int b
    for b in range(B):
        _grad(E, &c[0], &X[b, 0], m, d, &gv[b, 0])
        _hess(E, &c[0], &X[b, 0], m, d, &hv[b, 0, 0])
    return g, h


def midpoint_flow(exps, coeffs, term, weights, x0, Y0, double t0, double h, int nsteps,
                  int order=2, double tol=1e-13, int maxiter=100, double bound=1e6):
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    cdef const long[:, ::1] E = exps
    cdef const double[::1] c0 = np.ascontiguousarray(coeffs, dtype=float)
    cdef const long[::1] T = np.ascontiguousarray(term, dtype=np.int64)
    cdef const double[:, ::1] W = np.ascontiguousarray(np.atleast_2d(weights), dtype=float)
    x = np.array(x0, dtype=float, copy=True, order="C")
    cdef double[:, ::1] X = x
    cdef bint with_y = Y0 is not None
    Y = np.array(Y0, dtype=float, copy=True, order="C") if with_y else np.zeros((1, 1, 1))
    cdef double[:, :, ::1] Yv = Y
    cdef int B = X.shape[0], m = E.shape[0], d = E.shape[1]
    cdef int nw = W.shape[1], nterm = W.shape[0]
    if d > MAXD:
        raise ValueError("dimension too large for compiled kernel")
    fr = substep_fractions(order)
    cdef int nsub = len(fr)
    cdef double fracs[3]
    cdef int q
    for q in range(nsub):
        fracs[q] = fr[q]

    cdef double c[4096]
    if m > 4096:
        raise ValueError("too many monomials for compiled kernel")
    cdef double wt[256]
    if nterm > 256:
        raise ValueError("too many Hamiltonian terms for compiled kernel")

    cdef double x1[MAXD]
    cdef double xn[MAXD]
    cdef double mid[MAXD]
    cdef double g[MAXD]
    cdef double Hm[MAXD * MAXD]
    cdef double A[MAXD * MAXD]
    cdef double M[MAXD * MAXD]
    cdef double R[MAXD * MAXD]
    cdef int step, b, i, j, l, it, worst = 0, status = 0
    cdef double s = t0, dt, sm, delta, scale, acc, tmp
    cdef bint conv

    with nogil:
        for step in range(nsteps):
            for q in range(nsub):
                dt = fracs[q] * h
                sm = s + 0.5 * dt
                for i in range(nterm):
                    acc = 0.0
                    tmp = 1.0
                    for j in range(nw):
                        acc += W[i, j] * tmp
                        tmp *= sm
                    wt[i] = acc
                for i in range(m):
                    c[i] = c0[i] * wt[T[i]]
                for b in range(B):
                    _grad(E, c, &X[b, 0], m, d, g)
                    for i in range(d // 2):
                        x1[2 * i] = X[b, 2 * i] - dt * g[2 * i + 1]
                        x1[2 * i + 1] = X[b, 2 * i + 1] + dt * g[2 * i]
                    conv = False
                    for it in range(1, maxiter + 1):
                        for i in range(d):
                            mid[i] = 0.5 * (X[b, i] + x1[i])
                        _grad(E, c, mid, m, d, g)
                        delta = 0.0
                        scale = 0.0
                        for i in range(d // 2):
                            xn[2 * i] = X[b, 2 * i] - dt * g[2 * i + 1]
                            xn[2 * i + 1] = X[b, 2 * i + 1] + dt * g[2 * i]
                        for i in range(d):
                            if fabs(xn[i] - x1[i]) > delta:
                                delta = fabs(xn[i] - x1[i])
                            if fabs(xn[i]) > scale:
                                scale = fabs(xn[i])
                            x1[i] = xn[i]
                        if delta <= tol * (1.0 + scale):
                            conv = True
                            break
                    if not conv:
                        status = 1
                        break
                    if it > worst:
                        worst = it
                    if with_y:
                        for i in range(d):
                            mid[i] = 0.5 * (X[b, i] + x1[i])
                        _hess(E, c, mid, m, d, Hm)
                        # A = J * Hess
                        for i in range(d // 2):
                            for j in range(d):
                                A[(2 * i) * d + j] = -Hm[(2 * i + 1) * d + j]
                                A[(2 * i + 1) * d + j] = Hm[(2 * i) * d + j]
                        for i in range(d):
                            for j in range(d):
                                M[i * d + j] = -0.5 * dt * A[i * d + j]
                                acc = Yv[b, i, j]
                                for l in range(d):
                                    acc = acc + 0.5 * dt * A[i * d + l] * Yv[b, l, j]
                                R[i * d + j] = acc
                            M[i * d + i] += 1.0
                        if _solve(M, R, d, d) != 0:
                            status = 1
                            break
                        for i in range(d):
                            for j in range(d):
                                Yv[b, i, j] = R[i * d + j]
                    for i in range(d):
                        X[b, i] = x1[i]
                        if not isfinite(x1[i]) or fabs(x1[i]) > bound:
                            status = 2
                    if status == 2:
                        break
                if status != 0:
                    break
                s += dt
            if status != 0:
                break
    return x, (Y if with_y else None), status, (maxiter if status == 1 else worst)
