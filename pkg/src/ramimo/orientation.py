"""Single-element orientation subproblems.

Fixing everything except one element's boresight ``f`` leaves a utility
``v(f)^H B v(f)`` where ``v`` is the element's effective vector:

* receive element ``m``: ``v = conj(H[m, :])`` (length ``N``), so that
  ``L^H v`` is the element's column of the whitened Gram factor;
* transmit element ``n``: ``v = H[:, n]`` (length ``M``).

:class:`ElementProblem` packs the constant part of ``v`` so the hot loop in
:mod:`ramimo.kernels` can evaluate it without touching the scenario again.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import Scenario, link_factors
from .fw import FwConfig, FwTrace, frank_wolfe  # noqa: F401  (re-exported)
from .geometry import SphericalCap, cap_contains

__all__ = [
    "ElementProblem", "FwConfig", "FwTrace", "frank_wolfe",
    "receive_problem", "transmit_problem",
    "receive_effective_vector", "transmit_effective_vector",
    "utility", "euclidean_gradient", "closed_form_p1", "p1_matrix",
    "build_receive_quadratic", "build_transmit_quadratic", "solve_element",
]


@dataclass
class ElementProblem:
    w_los: np.ndarray  # (K, 3) local unit directions, one direct path per component
    c_los: np.ndarray  # (K,)
    w_sc: np.ndarray  # (D, 3) local unit directions towards scatterers
    c_sc: np.ndarray  # (K, D)
    p: float
    rotation: np.ndarray
    cap: SphericalCap
    B: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.w_los.shape[0]

    def with_weight(self, B) -> "ElementProblem":
        B = np.asarray(B, dtype=complex)
        if B.shape != (self.size, self.size):
            raise ValueError(f"weight must be {self.size}x{self.size}, got {B.shape}")
        return ElementProblem(self.w_los, self.c_los, self.w_sc, self.c_sc, self.p,
                              self.rotation, self.cap, B)

    def vector(self, f, backend=None) -> np.ndarray:
        be = backend or kernels.backend
        return be.effective_vector(self.w_los, self.c_los, self.w_sc, self.c_sc, self.p, np.asarray(f, float))

    def utility(self, f, backend=None) -> float:
        be = backend or kernels.backend
        return be.utility(self.w_los, self.c_los, self.w_sc, self.c_sc, self.B, self.p, np.asarray(f, float))

    def evaluate(self, f, backend=None):
        be = backend or kernels.backend
        return be.evaluate(self.w_los, self.c_los, self.w_sc, self.c_sc, self.B, self.p, np.asarray(f, float))

    def gradient(self, f, backend=None) -> np.ndarray:
        if self.p < 1:
            raise ValueError("gradient-based orientation design needs p >= 1")
        return self.evaluate(f, backend)[1]

    def linear_map(self) -> np.ndarray:
        """``K x 3`` matrix with ``v(f) = K f`` when no clamp is active (p = 1)."""
        return self.c_los[:, None] * self.w_los + self.c_sc @ self.w_sc


def receive_problem(scenario: Scenario, m: int, f_t, B=None, factors=None) -> ElementProblem:
    """Receive element ``m`` with every transmit orientation held at ``f_t``."""
    L = scenario.links
    ft_los, _, ft_sc, _ = factors if factors is not None else link_factors(scenario, f_t, np.zeros((scenario.n_rx, 3)))
    c_los = np.conj(L.a[m] * ft_los[m])
    c_sc = np.conj(L.b[m] * ft_sc)
    prob = ElementProblem(L.rx_los[m], c_los, L.rx_sc[m], c_sc, scenario.pattern.p,
                          scenario.rx.rotation, scenario.rx_cap)
    return prob if B is None else prob.with_weight(B)


def transmit_problem(scenario: Scenario, n: int, f_r, B=None, factors=None) -> ElementProblem:
    """Transmit element ``n`` with every receive orientation held at ``f_r``."""
    L = scenario.links
    _, fr_los, _, fr_sc = factors if factors is not None else link_factors(scenario, np.zeros((scenario.n_tx, 3)), f_r)
    c_los = L.a[:, n] * fr_los[:, n]
    c_sc = L.b[:, n, :] * fr_sc
    prob = ElementProblem(L.tx_los[n], c_los, L.tx_sc[n], c_sc, scenario.pattern.p,
                          scenario.tx.rotation, scenario.tx_cap)
    return prob if B is None else prob.with_weight(B)


def receive_effective_vector(scenario: Scenario, m: int, f_t, f_r_m) -> np.ndarray:
    """``conj(H[m, :])`` as a function of the receive orientation ``f_r_m``."""
    return receive_problem(scenario, m, f_t).vector(f_r_m)


def transmit_effective_vector(scenario: Scenario, n: int, f_r, f_t_n) -> np.ndarray:
    """``H[:, n]`` as a function of the transmit orientation ``f_t_n``."""
    return transmit_problem(scenario, n, f_r).vector(f_t_n)


def utility(v, B) -> float:
    v = np.asarray(v, dtype=complex)
    B = np.asarray(B, dtype=complex)
    if B.shape != (v.size, v.size):
        raise ValueError("dimension mismatch between effective vector and weight")
    return float(np.real(np.vdot(v, B @ v)))


def euclidean_gradient(scenario: Scenario, m: int, f_t, f_r_m, B) -> np.ndarray:
    """Gradient of the receive utility of element ``m`` at ``f_r_m``."""
    if scenario.pattern.p < 1:
        raise ValueError("gradient-based orientation design needs p >= 1")
    return receive_problem(scenario, m, f_t, B).gradient(f_r_m)


def build_receive_quadratic(U_Q, sigma_Q, P_m) -> np.ndarray:
    """``U diag(sigma)^(1/2) P diag(sigma)^(1/2) U^H`` (Hermitian-symmetrised)."""
    return _sandwich(U_Q, sigma_Q, P_m)


def build_transmit_quadratic(U_S, sigma_S, D_n) -> np.ndarray:
    return _sandwich(U_S, sigma_S, D_n)


def _sandwich(U, sigma, P) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    sigma = np.asarray(sigma)
    if sigma.ndim == 2:
        sigma = np.real(np.diag(sigma))
    P = np.asarray(P, dtype=complex)
    if U.shape[1] != sigma.size or P.shape != (sigma.size, sigma.size):
        raise ValueError("dimension mismatch in quadratic-form factors")
    Lf = U * np.sqrt(np.clip(sigma, 0.0, None))
    B = Lf @ P @ Lf.conj().T
    return 0.5 * (B + B.conj().T)


def p1_matrix(prob: ElementProblem) -> np.ndarray:
    """Global-frame real ``3 x 3`` matrix of the clamp-free p = 1 utility."""
    Kg = prob.linear_map() @ prob.rotation.T
    C = np.real(Kg.conj().T @ prob.B @ Kg)
    return 0.5 * (C + C.T)


def closed_form_p1(C, R, cap: SphericalCap):
    """Top eigenvector of ``C`` mapped to the local frame, or ``None``.

    ``None`` means the eigenvector falls outside the cap and an iterative
    solver is needed.
    """
    C = np.asarray(C, dtype=float)
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    f = np.asarray(R, float).T @ V[:, -1]
    if f[2] < 0:
        f = -f
    f /= np.linalg.norm(f)
    return f if cap_contains(cap, f) else None


def solve_element(prob: ElementProblem, init, cfg: FwConfig = FwConfig(), use_closed_form: bool = False,
                  backend=None) -> tuple[np.ndarray, FwTrace]:
    """Best orientation for one element, never worse than ``init``.

    With ``use_closed_form`` and ``p == 1`` the eigenvector candidate is tried
    first and kept only if its exact utility does not fall below that of
    ``init``; otherwise Frank-Wolfe runs from ``init``.
    """
    be = backend or kernels.backend
    init = np.asarray(init, dtype=float)
    if use_closed_form and prob.p == 1.0:
        cand = closed_form_p1(p1_matrix(prob), prob.rotation, prob.cap)
        if cand is not None:
            u0 = prob.utility(init, be)
            u1 = prob.utility(cand, be)
            if u1 >= u0:
                return cand, FwTrace([u0, u1], [], True, 1, "closed_form")
    f, utils, steps, conv, iters = be.fw_solve(
        prob.w_los, prob.c_los, prob.w_sc, prob.c_sc, prob.B, prob.p, prob.cap.theta_max, init,
        cfg.armijo_c, cfg.armijo_beta, cfg.max_iters, cfg.tol, cfg.min_step,
    )
    return f, FwTrace(list(utils), list(steps), bool(conv), int(iters))
