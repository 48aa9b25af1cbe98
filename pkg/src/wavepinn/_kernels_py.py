"""Pure-numpy activation kernels.

Same contract as the compiled ``_kernels`` extension. For an elementwise
activation ``psi(z; c)`` the forward kernel returns

* ``D[k] = d^k psi / dz^k`` for ``k = 0..3``
* ``S[s, k] = d/dc_s d^k psi / dz^k`` for ``k = 0..2`` and every coefficient
  slot ``s`` in ``(alpha, beta, gamma, omega, sigma)``

computed as products of closed-form factors (tanh, Gaussian envelope,
cosine carrier, polynomial) combined with Leibniz' rule, and pushes a jet
``(value, first partials, selected second partials)`` through it. The
backward kernel is the vector-Jacobian product of that jet map with
respect to the pre-activation jet and the effective coefficients.
"""

from __future__ import annotations

import numpy as np

ALPHA, BETA, GAMMA, OMEGA, SIGMA = range(5)

TANH, MEX, MOR, GAUSS, GABOR, HER = range(6)

_BINOM = ((1,), (1, 1), (1, 2, 1), (1, 3, 3, 1))


def _tanh_factor(x, beta, slot):
    u = beta * x
    t = np.tanh(u)
    s = 1.0 - t * t
    t1 = s
    t2 = -2.0 * t * s
    t3 = s * (6.0 * t * t - 2.0)
    F = [t, beta * t1, beta * beta * t2, beta**3 * t3]
    if slot is None:
        return F, {}
    # d/dbeta of beta^k T_k(beta x)
    S = [x * t1, t1 + beta * x * t2, 2.0 * beta * t2 + beta * beta * x * t3]
    return F, {slot: S}


def _gauss_factor(x, a, slot, da_dc=1.0):
    x2 = x * x
    g = np.exp(-a * x2)
    F = [g, -2.0 * a * x * g, (4.0 * a * a * x2 - 2.0 * a) * g, (-8.0 * a**3 * x2 * x + 12.0 * a * a * x) * g]
    if slot is None:
        return F, {}
    S = [
        -x2 * g,
        (2.0 * a * x2 * x - 2.0 * x) * g,
        (-4.0 * a * a * x2 * x2 + 10.0 * a * x2 - 2.0) * g,
    ]
    if da_dc != 1.0:
        S = [v * da_dc for v in S]
    return F, {slot: S}


def _cos_factor(x, w, slot):
    c = np.cos(w * x)
    s = np.sin(w * x)
    F = [c, -w * s, -w * w * c, w**3 * s]
    S = [-x * s, -s - w * x * c, -2.0 * w * c + w * w * x * s]
    return F, {slot: S}


def _poly_factor(x, fam, order, gamma):
    zero = np.zeros_like(x)
    if fam == MEX:
        x2 = x * x
        F = [1.0 - gamma * x2, -2.0 * gamma * x, np.full_like(x, -2.0 * gamma), zero]
        S = [-x2, -2.0 * x, np.full_like(x, -2.0)]
        return F, {GAMMA: S}
    x2 = x * x
    if order == 1:
        F = [2.0 * x, np.full_like(x, 2.0), zero, zero]
    elif order == 2:
        F = [4.0 * x2 - 2.0, 8.0 * x, np.full_like(x, 8.0), zero]
    elif order == 3:
        F = [8.0 * x2 * x - 12.0 * x, 24.0 * x2 - 12.0, 48.0 * x, np.full_like(x, 48.0)]
    elif order == 4:
        F = [16.0 * x2 * x2 - 48.0 * x2 + 12.0, 64.0 * x2 * x - 96.0 * x, 192.0 * x2 - 96.0, 384.0 * x]
    else:
        raise ValueError(f"unsupported Hermite order {order}")
    return F, {}


def _product(f, g):
    (F, SF), (G, SG) = f, g
    H = [sum(_BINOM[n][k] * F[k] * G[n - k] for k in range(n + 1)) for n in range(4)]
    S = {}
    for slot, Sf in SF.items():
        S[slot] = [sum(_BINOM[n][k] * Sf[k] * G[n - k] for k in range(n + 1)) for n in range(3)]
    for slot, Sg in SG.items():
        extra = [sum(_BINOM[n][k] * F[k] * Sg[n - k] for k in range(n + 1)) for n in range(3)]
        S[slot] = [a + b for a, b in zip(S[slot], extra)] if slot in S else extra
    return H, S


def act_derivs(fam: int, order: int, x: np.ndarray, coef: np.ndarray):
    """Derivative table ``D`` (4, M) and coefficient sensitivities ``S`` (5, 3, M)."""
    x = np.asarray(x, dtype=float)
    if not 0 <= fam <= HER or (fam == HER and not 1 <= order <= 4):
        raise ValueError(f"bad activation family/order {fam}/{order}")
    M = x.shape[0]
    S_out = np.zeros((5, 3, M))
    if fam == TANH:
        F, _ = _tanh_factor(x, 1.0, None)
        return np.array(F), S_out
    alpha, beta, gamma, omega, sigma = (float(v) for v in coef)
    acc = _tanh_factor(x, beta, BETA)
    if fam in (MEX, GAUSS, HER):
        acc = _product(acc, _gauss_factor(x, alpha, ALPHA))
        if fam != GAUSS:
            acc = _product(acc, _poly_factor(x, fam, order, gamma))
    elif fam in (MOR, GABOR):
        a = 0.5 / (sigma * sigma)
        acc = _product(acc, _gauss_factor(x, a, SIGMA, da_dc=-1.0 / sigma**3))
        acc = _product(acc, _cos_factor(x, omega, OMEGA))
    else:
        raise ValueError(f"unknown activation family id {fam}")
    D, S = acc
    for slot, v in S.items():
        S_out[slot] = np.array(v)
    return np.array(D), S_out


def jet_forward(fam, order, Z, coef, nd, pi, pj, slots):
    """Apply the activation to jets stored as rows of ``Z`` (C, M).

    Returns the activated jets ``A`` (C, M), the derivative table ``D``
    (4, M) and the sensitivities ``S`` (len(slots), 3, M) kept for backward.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] != 1 + nd + len(pi) or len(pi) != len(pj):
        raise ValueError("component count does not match directions and pairs")
    D, S = act_derivs(fam, order, Z[0], coef)
    A = np.empty_like(Z)
    A[0] = D[0]
    A[1 : 1 + nd] = D[1] * Z[1 : 1 + nd]
    for p, (i, j) in enumerate(zip(pi, pj)):
        A[1 + nd + p] = D[2] * Z[1 + i] * Z[1 + j] + D[1] * Z[1 + nd + p]
    return A, D, np.ascontiguousarray(S[list(slots)])


def jet_backward(Z, D, S, Abar, nd, pi, pj):
    """Pull ``Abar`` back to ``Zbar`` and to the coefficient slots kept in ``S``."""
    Zbar = np.empty_like(Z)
    d1, d2, d3 = D[1], D[2], D[3]
    G = Z[1 : 1 + nd]
    Gbar = Abar[1 : 1 + nd]
    gg = np.sum(Gbar * G, axis=0)
    Zbar[0] = Abar[0] * d1 + gg * d2
    Zbar[1 : 1 + nd] = Gbar * d1
    ns = S.shape[0]
    cbar = np.zeros(ns)
    for s in range(ns):
        cbar[s] = np.sum(Abar[0] * S[s, 0]) + np.sum(gg * S[s, 1])
    for p, (i, j) in enumerate(zip(pi, pj)):
        hb = Abar[1 + nd + p]
        zp = Z[1 + nd + p]
        gij = G[i] * G[j]
        Zbar[0] += hb * (d3 * gij + d2 * zp)
        Zbar[1 + i] += hb * d2 * G[j]
        Zbar[1 + j] += hb * d2 * G[i]
        Zbar[1 + nd + p] = hb * d1
        for s in range(ns):
            cbar[s] += np.sum(hb * (S[s, 2] * gij + S[s, 1] * zp))
    return Zbar, cbar
