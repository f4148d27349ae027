# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled element kernels: utility, gradient and the full Frank-Wolfe loop.

Mirrors ``ramimo._kernels_py`` operation for operation.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, cos, sin, fabs

cnp.import_array()

BACKEND = "cython"


cdef inline double _cpow(double x, double p) noexcept nogil:
    if x > 0.0:
        return pow(x, p)
    return 0.0


cdef inline double _dcpow(double x, double p) noexcept nogil:
    if x > 0.0:
        return p * pow(x, p - 1.0)
    return 0.0


cdef double _eval(const double[:, ::1] w_los, const double complex[::1] c_los,
                  const double[:, ::1] w_sc, const double complex[:, ::1] c_sc,
                  const double complex[:, ::1] B, double p, const double* f,
                  double complex* v, double complex* Bv, double complex* J,
                  double* dsc, double* grad, bint want_grad) noexcept nogil:
    cdef Py_ssize_t K = w_los.shape[0]
    cdef Py_ssize_t D = w_sc.shape[0]
    cdef Py_ssize_t k, d, j
    cdef double x, phi, dphi
    cdef double complex acc, util

    for k in range(K):
        x = w_los[k, 0] * f[0] + w_los[k, 1] * f[1] + w_los[k, 2] * f[2]
        v[k] = c_los[k] * _cpow(x, p)
        if want_grad:
            dphi = _dcpow(x, p)
            for j in range(3):
                J[3 * k + j] = c_los[k] * (dphi * w_los[k, j])
    for d in range(D):
        x = w_sc[d, 0] * f[0] + w_sc[d, 1] * f[1] + w_sc[d, 2] * f[2]
        phi = _cpow(x, p)
        if want_grad:
            dsc[d] = _dcpow(x, p)
        if phi != 0.0:
            for k in range(K):
                v[k] = v[k] + c_sc[k, d] * phi
    if want_grad:
        for d in range(D):
            dphi = dsc[d]
            if dphi != 0.0:
                for k in range(K):
                    for j in range(3):
                        J[3 * k + j] = J[3 * k + j] + c_sc[k, d] * (dphi * w_sc[d, j])

    util = 0.0
    for k in range(K):
        acc = 0.0
        for j in range(K):
            acc = acc + B[k, j] * v[j]
        Bv[k] = acc
        util = util + v[k].conjugate() * acc

    if want_grad:
        for j in range(3):
            grad[j] = 0.0
            for k in range(K):
                grad[j] += 2.0 * (J[3 * k + j].conjugate() * Bv[k]).real
    return util.real


cdef class _Workspace:
    cdef double complex[::1] v
    cdef double complex[::1] Bv
    cdef double complex[::1] J
    cdef double[::1] dsc

    def __cinit__(self, Py_ssize_t K, Py_ssize_t D):
        self.v = np.empty(max(K, 1), dtype=np.complex128)
        self.Bv = np.empty(max(K, 1), dtype=np.complex128)
        self.J = np.empty(max(3 * K, 1), dtype=np.complex128)
        self.dsc = np.empty(max(D, 1), dtype=np.float64)


def _prep(w_los, c_los, w_sc, c_sc, B):
    w_los = np.ascontiguousarray(w_los, dtype=np.float64)
    c_los = np.ascontiguousarray(c_los, dtype=np.complex128)
    w_sc = np.ascontiguousarray(np.asarray(w_sc, dtype=np.float64).reshape(-1, 3))
    c_sc = np.ascontiguousarray(np.asarray(c_sc, dtype=np.complex128).reshape(w_los.shape[0], w_sc.shape[0]))
    B = np.ascontiguousarray(B, dtype=np.complex128)
    return w_los, c_los, w_sc, c_sc, B


def utility(w_los, c_los, w_sc, c_sc, B, double p, f):
    w_los, c_los, w_sc, c_sc, B = _prep(w_los, c_los, w_sc, c_sc, B)
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef _Workspace ws = _Workspace(w_los.shape[0], w_sc.shape[0])
    cdef double g[3]
    return _eval(w_los, c_los, w_sc, c_sc, B, p, &fv[0], &ws.v[0], &ws.Bv[0], &ws.J[0], &ws.dsc[0], g, False)


def evaluate(w_los, c_los, w_sc, c_sc, B, double p, f):
    w_los, c_los, w_sc, c_sc, B = _prep(w_los, c_los, w_sc, c_sc, B)
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef _Workspace ws = _Workspace(w_los.shape[0], w_sc.shape[0])
    grad = np.empty(3)
    cdef double[::1] gv = grad
    cdef double u = _eval(w_los, c_los, w_sc, c_sc, B, p, &fv[0], &ws.v[0], &ws.Bv[0], &ws.J[0], &ws.dsc[0], &gv[0], True)
    return u, grad


def effective_vector(w_los, c_los, w_sc, c_sc, double p, f):
    K = np.asarray(w_los).shape[0]
    w_los, c_los, w_sc, c_sc, B = _prep(w_los, c_los, w_sc, c_sc, np.zeros((K, K)))
    cdef double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef _Workspace ws = _Workspace(K, w_sc.shape[0])
    cdef double g[3]
    _eval(w_los, c_los, w_sc, c_sc, B, p, &fv[0], &ws.v[0], &ws.Bv[0], &ws.J[0], &ws.dsc[0], g, False)
    return np.asarray(ws.v[:K]).copy()


cdef void _lmo(const double* g, double cz, double sz, double* y) noexcept nogil:
    cdef double n = sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
    cdef double gx, gy, gz, hn
    if n == 0.0:
        y[0] = sz
        y[1] = 0.0
        y[2] = cz
        return
    gx = g[0] / n
    gy = g[1] / n
    gz = g[2] / n
    if gz >= cz:
        y[0] = gx
        y[1] = gy
        y[2] = gz
        return
    hn = sqrt(gx * gx + gy * gy)
    if hn > 0.0:
        y[0] = sz * gx / hn
        y[1] = sz * gy / hn
        y[2] = cz
    else:
        y[0] = sz
        y[1] = 0.0
        y[2] = cz


def fw_solve(w_los, c_los, w_sc, c_sc, B, double p, double theta_max, f0,
             double armijo_c, double armijo_beta, int max_iters, double tol, double min_step):
    """Frank-Wolfe ascent of ``v(f)^H B v(f)`` over the cap; returns
    ``(f, utilities, steps, converged, iterations)``."""
    w_los, c_los, w_sc, c_sc, B = _prep(w_los, c_los, w_sc, c_sc, B)
    cdef _Workspace ws = _Workspace(w_los.shape[0], w_sc.shape[0])
    cdef double cz = cos(theta_max)
    cdef double sz = sin(theta_max)
    if theta_max >= 1.5707963267948966:
        cz = 0.0
    cdef double f[3]
    cdef double grad[3]
    cdef double g[3]
    cdef double y[3]
    cdef double dvec[3]
    cdef double cand[3]
    cdef double x[3]
    cdef double F, Fc, slope, fg, rho, nx, dF
    cdef int it, j, iters = 0
    cdef bint converged = False, accepted
    f0 = np.asarray(f0, dtype=np.float64)
    for j in range(3):
        f[j] = f0[j]
    if fabs(sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2]) - 1.0) > 1e-9 or f[2] < cz - 1e-12:
        raise ValueError("initial orientation is not feasible")

    utilities = [_eval(w_los, c_los, w_sc, c_sc, B, p, f, &ws.v[0], &ws.Bv[0], &ws.J[0], &ws.dsc[0], grad, False)]
    steps = []
    F = utilities[0]
    for it in range(max_iters):
        iters += 1
        _eval(w_los, c_los, w_sc, c_sc, B, p, f, &ws.v[0], &ws.Bv[0], &ws.J[0], &ws.dsc[0], grad, True)
        fg = f[0] * grad[0] + f[1] * grad[1] + f[2] * grad[2]
        for j in range(3):
            g[j] = grad[j] - f[j] * fg
        _lmo(g, cz, sz, y)
        for j in range(3):
            dvec[j] = y[j] - f[j]
        slope = g[0] * dvec[0] + g[1] * dvec[1] + g[2] * dvec[2]
        if not slope > 0.0:
            converged = True
            break
        rho = 1.0
        accepted = False
        while rho >= min_step:
            for j in range(3):
                x[j] = f[j] + rho * dvec[j]
            nx = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
            if nx > 0.0:
                for j in range(3):
                    cand[j] = x[j] / nx
                Fc = _eval(w_los, c_los, w_sc, c_sc, B, p, cand, &ws.v[0], &ws.Bv[0], &ws.J[0], &ws.dsc[0], grad, False)
                if Fc >= F + armijo_c * rho * slope:
                    accepted = True
                    break
            rho *= armijo_beta
        if not accepted:
            converged = True
            break
        dF = Fc - F
        for j in range(3):
            f[j] = cand[j]
        F = Fc
        utilities.append(F)
        steps.append(rho)
        if fabs(dF) <= tol * fabs(F):
            converged = True
            break
    out = np.array([f[0], f[1], f[2]])
    return out, np.asarray(utilities), np.asarray(steps), bool(converged), iters
