# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled activation jet kernels; same contract as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, exp, cos, sin

cnp.import_array()

DEF ALPHA = 0
DEF BETA = 1
DEF GAMMA = 2
DEF OMEGA = 3
DEF SIGMA = 4

DEF TANH = 0
DEF MEX = 1
DEF MOR = 2
DEF GAUSS = 3
DEF GABOR = 4
DEF HER = 5

cdef inline void _mul(double* A, double* SA, const double* G, int mask, int slot, const double* SG) noexcept nogil:
    # A (4) and SA (5x3) hold the running product; G (4) and SG (3) the new factor.
    # Only slots set in mask are nonzero in SA.
    cdef double a0 = A[0], a1 = A[1], a2 = A[2], a3 = A[3]
    cdef double s0, s1, s2
    cdef int s
    A[0] = a0 * G[0]
    A[1] = a1 * G[0] + a0 * G[1]
    A[2] = a2 * G[0] + 2.0 * a1 * G[1] + a0 * G[2]
    A[3] = a3 * G[0] + 3.0 * a2 * G[1] + 3.0 * a1 * G[2] + a0 * G[3]
    for s in range(5):
        if not (mask >> s) & 1:
            continue
        s0 = SA[s * 3]
        s1 = SA[s * 3 + 1]
        s2 = SA[s * 3 + 2]
        SA[s * 3] = s0 * G[0]
        SA[s * 3 + 1] = s1 * G[0] + s0 * G[1]
        SA[s * 3 + 2] = s2 * G[0] + 2.0 * s1 * G[1] + s0 * G[2]
    if slot >= 0:
        SA[slot * 3] += a0 * SG[0]
        SA[slot * 3 + 1] += a1 * SG[0] + a0 * SG[1]
        SA[slot * 3 + 2] += a2 * SG[0] + 2.0 * a1 * SG[1] + a0 * SG[2]


cdef inline void _derivs(int fam, int order, double x, const double* c, double* D, double* S) noexcept nogil:
    cdef double F[4]
    cdef double SF[3]
    cdef double t, s, b, a, x2, g, w, cs, sn, sig, dadc, gam
    cdef int n, mask, gslot
    for n in range(15):
        S[n] = 0.0
    if fam == TANH:
        t = tanh(x)
        s = 1.0 - t * t
        D[0] = t
        D[1] = s
        D[2] = -2.0 * t * s
        D[3] = s * (6.0 * t * t - 2.0)
        return
    b = c[BETA]
    t = tanh(b * x)
    s = 1.0 - t * t
    D[0] = t
    D[1] = b * s
    D[2] = b * b * (-2.0 * t * s)
    D[3] = b * b * b * s * (6.0 * t * t - 2.0)
    S[BETA * 3 + 0] = x * s
    S[BETA * 3 + 1] = s + b * x * (-2.0 * t * s)
    S[BETA * 3 + 2] = 2.0 * b * (-2.0 * t * s) + b * b * x * s * (6.0 * t * t - 2.0)

    x2 = x * x
    if fam == MOR or fam == GABOR:
        sig = c[SIGMA]
        a = 0.5 / (sig * sig)
        dadc = -1.0 / (sig * sig * sig)
    else:
        a = c[ALPHA]
        dadc = 1.0
    g = exp(-a * x2)
    F[0] = g
    F[1] = -2.0 * a * x * g
    F[2] = (4.0 * a * a * x2 - 2.0 * a) * g
    F[3] = (-8.0 * a * a * a * x2 * x + 12.0 * a * a * x) * g
    SF[0] = -x2 * g * dadc
    SF[1] = (2.0 * a * x2 * x - 2.0 * x) * g * dadc
    SF[2] = (-4.0 * a * a * x2 * x2 + 10.0 * a * x2 - 2.0) * g * dadc
    gslot = SIGMA if (fam == MOR or fam == GABOR) else ALPHA
    mask = 1 << BETA
    _mul(D, S, F, mask, gslot, SF)
    mask |= 1 << gslot

    if fam == MOR or fam == GABOR:
        w = c[OMEGA]
        cs = cos(w * x)
        sn = sin(w * x)
        F[0] = cs
        F[1] = -w * sn
        F[2] = -w * w * cs
        F[3] = w * w * w * sn
        SF[0] = -x * sn
        SF[1] = -sn - w * x * cs
        SF[2] = -2.0 * w * cs + w * w * x * sn
        _mul(D, S, F, mask, OMEGA, SF)
    elif fam == MEX:
        gam = c[GAMMA]
        F[0] = 1.0 - gam * x2
        F[1] = -2.0 * gam * x
        F[2] = -2.0 * gam
        F[3] = 0.0
        SF[0] = -x2
        SF[1] = -2.0 * x
        SF[2] = -2.0
        _mul(D, S, F, mask, GAMMA, SF)
    elif fam == HER:
        if order == 1:
            F[0] = 2.0 * x; F[1] = 2.0; F[2] = 0.0; F[3] = 0.0
        elif order == 2:
            F[0] = 4.0 * x2 - 2.0; F[1] = 8.0 * x; F[2] = 8.0; F[3] = 0.0
        elif order == 3:
            F[0] = 8.0 * x2 * x - 12.0 * x; F[1] = 24.0 * x2 - 12.0; F[2] = 48.0 * x; F[3] = 48.0
        else:
            F[0] = 16.0 * x2 * x2 - 48.0 * x2 + 12.0; F[1] = 64.0 * x2 * x - 96.0 * x
            F[2] = 192.0 * x2 - 96.0; F[3] = 384.0 * x
        _mul(D, S, F, mask, -1, SF)


def act_derivs(int fam, int order, x, coef):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t M = xv.shape[0], m
    cdef int k, s
    Dn = np.empty((4, M))
    Sn = np.empty((5, 3, M))
    cdef double[:, ::1] Dv = Dn
    cdef double[:, :, ::1] Sv = Sn
    cdef double D[4]
    cdef double S[15]
    if fam < 0 or fam > 5 or (fam == HER and (order < 1 or order > 4)):
        raise ValueError(f"bad activation family/order {fam}/{order}")
    with nogil:
        for m in range(M):
            _derivs(fam, order, xv[m], &cv[0], D, S)
            for k in range(4):
                Dv[k, m] = D[k]
            for s in range(5):
                for k in range(3):
                    Sv[s, k, m] = S[s * 3 + k]
    return Dn, Sn


def jet_forward(int fam, int order, Z, coef, int nd, pi, pj, slots):
    cdef double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[::1] cv = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t[::1] piv = np.ascontiguousarray(pi, dtype=np.intp)
    cdef Py_ssize_t[::1] pjv = np.ascontiguousarray(pj, dtype=np.intp)
    cdef Py_ssize_t[::1] sl = np.ascontiguousarray(slots, dtype=np.intp)
    cdef Py_ssize_t C = Zv.shape[0], M = Zv.shape[1], m
    cdef int np_ = piv.shape[0], ns = sl.shape[0], k, p, s
    if C != 1 + nd + np_ or pjv.shape[0] != np_:
        raise ValueError("component count does not match directions and pairs")
    if fam < 0 or fam > 5 or (fam == HER and (order < 1 or order > 4)):
        raise ValueError(f"bad activation family/order {fam}/{order}")
    An = np.empty((C, M))
    Dn = np.empty((4, M))
    Sn = np.empty((ns, 3, M))
    cdef double[:, ::1] Av = An
    cdef double[:, ::1] Dv = Dn
    cdef double[:, :, ::1] Sv = Sn
    cdef double D[4]
    cdef double S[15]
    with nogil:
        for m in range(M):
            _derivs(fam, order, Zv[0, m], &cv[0], D, S)
            Av[0, m] = D[0]
            for k in range(nd):
                Av[1 + k, m] = D[1] * Zv[1 + k, m]
            for p in range(np_):
                Av[1 + nd + p, m] = D[2] * Zv[1 + piv[p], m] * Zv[1 + pjv[p], m] + D[1] * Zv[1 + nd + p, m]
            for k in range(4):
                Dv[k, m] = D[k]
            for s in range(ns):
                for k in range(3):
                    Sv[s, k, m] = S[sl[s] * 3 + k]
    return An, Dn, Sn


def jet_backward(Z, D, S, Abar, int nd, pi, pj):
    cdef double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef double[:, ::1] Dv = np.ascontiguousarray(D, dtype=np.float64)
    cdef double[:, :, ::1] Sv = np.ascontiguousarray(S, dtype=np.float64)
    cdef double[:, ::1] Bv = np.ascontiguousarray(Abar, dtype=np.float64)
    cdef Py_ssize_t[::1] piv = np.ascontiguousarray(pi, dtype=np.intp)
    cdef Py_ssize_t[::1] pjv = np.ascontiguousarray(pj, dtype=np.intp)
    cdef Py_ssize_t C = Zv.shape[0], M = Zv.shape[1], m
    cdef int np_ = piv.shape[0], ns = Sv.shape[0], k, p, s, i, j
    if ns > 5:
        raise ValueError("at most five coefficient slots")
    Zbn = np.empty((C, M))
    cbn = np.zeros(ns)
    cdef double[:, ::1] Zb = Zbn
    cdef double[::1] cb = cbn
    cdef double d1, d2, d3, gg, hb, gij, zp, z0
    cdef double acc[8]
    for s in range(ns):
        acc[s] = 0.0
    with nogil:
        for m in range(M):
            d1 = Dv[1, m]
            d2 = Dv[2, m]
            d3 = Dv[3, m]
            gg = 0.0
            for k in range(nd):
                gg += Bv[1 + k, m] * Zv[1 + k, m]
                Zb[1 + k, m] = Bv[1 + k, m] * d1
            z0 = Bv[0, m] * d1 + gg * d2
            for s in range(ns):
                acc[s] += Bv[0, m] * Sv[s, 0, m] + gg * Sv[s, 1, m]
            for p in range(np_):
                i = piv[p]
                j = pjv[p]
                hb = Bv[1 + nd + p, m]
                zp = Zv[1 + nd + p, m]
                gij = Zv[1 + i, m] * Zv[1 + j, m]
                z0 += hb * (d3 * gij + d2 * zp)
                Zb[1 + i, m] += hb * d2 * Zv[1 + j, m]
                Zb[1 + j, m] += hb * d2 * Zv[1 + i, m]
                Zb[1 + nd + p, m] = hb * d1
                for s in range(ns):
                    acc[s] += hb * (Sv[s, 2, m] * gij + Sv[s, 1, m] * zp)
            Zb[0, m] = z0
    for s in range(ns):
        cb[s] = acc[s]
    return Zbn, cbn
