"""Pure-numpy element kernels; fallback for the compiled ``_kernels`` module.

An element problem is described by the arrays
``(w_los, c_los, w_sc, c_sc, B, p)``: local unit directions of the per-component
direct paths ``(K, 3)`` with their complex constants ``(K,)``, local unit
directions towards the scatterers ``(D, 3)`` with constants ``(K, D)``, the
Hermitian weight ``B (K, K)`` and the pattern exponent ``p``.
"""
from __future__ import annotations

import numpy as np

from .channel import clamp_pow, clamp_pow_deriv
from .fw import FwConfig, frank_wolfe
from .geometry import SphericalCap

BACKEND = "python"


def effective_vector(w_los, c_los, w_sc, c_sc, p, f):
    v = c_los * clamp_pow(w_los @ f, p)
    if w_sc.shape[0]:
        v = v + c_sc @ clamp_pow(w_sc @ f, p)
    return v


def utility(w_los, c_los, w_sc, c_sc, B, p, f) -> float:
    v = effective_vector(w_los, c_los, w_sc, c_sc, p, f)
    return float(np.real(np.vdot(v, B @ v)))


def evaluate(w_los, c_los, w_sc, c_sc, B, p, f):
    """Utility ``v^H B v`` and its Euclidean gradient ``2 Re(J^H B v)``."""
    x_los = w_los @ f
    v = c_los * clamp_pow(x_los, p)
    J = (c_los * clamp_pow_deriv(x_los, p))[:, None] * w_los
    if w_sc.shape[0]:
        x_sc = w_sc @ f
        v = v + c_sc @ clamp_pow(x_sc, p)
        J = J + c_sc @ (clamp_pow_deriv(x_sc, p)[:, None] * w_sc)
    Bv = B @ v
    return float(np.real(np.vdot(v, Bv))), 2.0 * np.real(J.conj().T @ Bv)


def fw_solve(w_los, c_los, w_sc, c_sc, B, p, theta_max, f0,
             armijo_c, armijo_beta, max_iters, tol, min_step):
    cfg = FwConfig(armijo_c, armijo_beta, int(max_iters), tol, min_step)
    f, tr = frank_wolfe(
        lambda x: utility(w_los, c_los, w_sc, c_sc, B, p, x),
        lambda x: evaluate(w_los, c_los, w_sc, c_sc, B, p, x)[1],
        SphericalCap(theta_max),
        f0,
        cfg,
    )
    return f, np.asarray(tr.utilities), np.asarray(tr.steps), tr.converged, tr.iterations
