"""Alternating optimisation of the covariance and all element orientations."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .capacity import (
    RankZeroChannelError,
    capacity_with_covariance,
    eigenmode_transmission,
    hermitian,
    max_capacity,
)
from .channel import Scenario, assemble_channel, link_factors
from .fw import FwConfig
from .geometry import E_Z, project_to_cap
from .orientation import receive_problem, solve_element, transmit_problem

log = logging.getLogger(__name__)

MODES = ("full", "sepm", "miso", "simo")
AUDIT_REINVERT = 1e-6


class WoodburyBreakdown(np.linalg.LinAlgError):
    """The 2x2 capacitance matrix of a rank-two update is numerically singular."""


@dataclass(frozen=True)
class AoConfig:
    max_outer: int = 50
    tol: float = 1e-4
    fw: FwConfig = field(default_factory=FwConfig)
    use_p1_closed_form: bool = True
    mode: str = "full"
    optimize_tx: bool = True
    optimize_rx: bool = True
    audit: bool = True

    def __post_init__(self):
        if self.max_outer < 1 or self.tol <= 0:
            raise ValueError("max_outer must be >= 1 and tol > 0")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class AoSolution:
    covariance: np.ndarray
    f_t: np.ndarray
    f_r: np.ndarray
    trace: list
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    @property
    def capacity(self) -> float:
        return self.trace[-1]

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def update_inverse_gram(P_prev, h_old, h_new, noise: float) -> np.ndarray:
    """Swap one rank-one term inside ``P = (I + G / noise)^-1``.

    ``h_old`` is added to the Gram matrix ``G`` and ``h_new`` removed, via the
    rank-two Woodbury identity with ``Z1 = [h_old, h_new]`` and
    ``Z2 = [h_old, -h_new]``.
    """
    P = np.asarray(P_prev, dtype=complex)
    Z1 = np.column_stack([h_old, h_new]).astype(complex)
    Z2 = np.column_stack([h_old, -np.asarray(h_new)]).astype(complex)
    PZ1 = P @ Z1
    inner = np.eye(2) + (Z2.conj().T @ PZ1) / noise
    if not np.all(np.isfinite(inner)) or np.linalg.cond(inner) > 1e12:
        raise WoodburyBreakdown("rank-two update is numerically singular")
    corr = PZ1 @ np.linalg.solve(inner, Z2.conj().T @ P)
    return hermitian(P - corr / noise)


def leave_one_out_matrices(effective_rows, index: int) -> np.ndarray:
    """Rows ``h_i^H`` of all effective vectors except ``index``."""
    cols = np.asarray(effective_rows, dtype=complex)
    if cols.ndim == 1:
        cols = cols[None, :]
    if not 0 <= index < cols.shape[0]:
        raise IndexError("excluded index out of range")
    keep = np.delete(cols, index, axis=0)
    return keep.conj()


def direct_inverse_gram(vectors: np.ndarray, exclude: int, noise: float) -> np.ndarray:
    """``(I + sum_{i != exclude} h_i h_i^H / noise)^-1`` for columns ``h_i``."""
    Ht = leave_one_out_matrices(vectors.T, exclude)
    G = Ht.conj().T @ Ht
    return hermitian(np.linalg.inv(np.eye(vectors.shape[0]) + G / noise))


def _gram_factor(C) -> np.ndarray:
    """``L`` with ``L L^H = C`` for a Hermitian PSD ``C`` (eigen factor)."""
    w, U = np.linalg.eigh(hermitian(C))
    return U * np.sqrt(np.clip(w, 0.0, None))


def _pinned(cap) -> bool:
    return cap.theta_max == 0.0


class _Sweeper:
    """Shared state for one optimisation run."""

    def __init__(self, scenario: Scenario, cfg: AoConfig, f_t, f_r):
        self.sc = scenario
        self.cfg = cfg
        self.f_t = _init(f_t, scenario.n_tx)
        self.f_r = _init(f_r, scenario.n_rx)
        self.diag = {"woodbury_max_residual": 0.0, "woodbury_reinversions": 0,
                     "inner_iterations": 0, "closed_form_hits": 0, "duality_gap": 0.0}

    @property
    def H(self) -> np.ndarray:
        return assemble_channel(self.sc, self.f_t, self.f_r)

    def _solve(self, prob, init):
        if _pinned(prob.cap):
            return E_Z.copy()
        f, tr = solve_element(prob, init, self.cfg.fw, self.cfg.use_p1_closed_form and prob.p == 1.0)
        self.diag["inner_iterations"] += tr.iterations
        if tr.method == "closed_form":
            self.diag["closed_form_hits"] += 1
        return f

    def _sweep(self, vectors, factor, problem_for, set_orientation, current):
        """Blockwise pass over columns of ``vectors`` (whitened effective vectors)."""
        noise = self.sc.noise_power
        count = vectors.shape[1]
        audit_at = {0, count // 2, count - 1}
        P = None
        for i in range(count):
            if P is None:
                P = direct_inverse_gram(vectors, i, noise)
            else:
                try:
                    P = update_inverse_gram(P, vectors[:, i - 1], vectors[:, i], noise)
                except WoodburyBreakdown:
                    log.debug("woodbury breakdown at index %d; re-inverting", i)
                    P = direct_inverse_gram(vectors, i, noise)
                    self.diag["woodbury_reinversions"] += 1
                if self.cfg.audit and i in audit_at:
                    ref = direct_inverse_gram(vectors, i, noise)
                    res = np.linalg.norm(P - ref) / np.linalg.norm(ref)
                    self.diag["woodbury_max_residual"] = max(self.diag["woodbury_max_residual"], res)
                    if res > AUDIT_REINVERT:
                        P = ref
                        self.diag["woodbury_reinversions"] += 1
            B = hermitian(factor @ P @ factor.conj().T)
            prob = problem_for(i, B)
            f_new = self._solve(prob, current[i])
            set_orientation(i, f_new)
            vectors[:, i] = factor.conj().T @ prob.vector(f_new)

    def receive_sweep(self, Q):
        Lq = _gram_factor(Q)
        factors = link_factors(self.sc, self.f_t, self.f_r)
        vectors = Lq.conj().T @ self.H.conj().T  # column m: L^H conj(H[m, :])

        def set_r(i, f):
            self.f_r[i] = f

        self._sweep(vectors, Lq, lambda i, B: receive_problem(self.sc, i, self.f_t, B, factors), set_r, self.f_r)

    def transmit_sweep(self, S):
        Ls = _gram_factor(S)
        factors = link_factors(self.sc, self.f_t, self.f_r)
        vectors = Ls.conj().T @ self.H  # column n: L^H H[:, n]

        def set_t(i, f):
            self.f_t[i] = f

        self._sweep(vectors, Ls, lambda i, B: transmit_problem(self.sc, i, self.f_r, B, factors), set_t, self.f_t)

    def rank_one_sweep(self, side: str, u):
        """Receive or transmit pass maximising ``|u^H v|^2`` per element."""
        B = np.outer(u, u.conj())
        if side == "rx":
            factors = link_factors(self.sc, self.f_t, self.f_r)
            for m in range(self.sc.n_rx):
                self.f_r[m] = self._solve(receive_problem(self.sc, m, self.f_t, B, factors), self.f_r[m])
        else:
            factors = link_factors(self.sc, self.f_t, self.f_r)
            for n in range(self.sc.n_tx):
                self.f_t[n] = self._solve(transmit_problem(self.sc, n, self.f_r, B, factors), self.f_t[n])


def _init(f, count) -> np.ndarray:
    if f is None:
        return np.tile(E_Z, (count, 1))
    f = np.array(f, dtype=float)
    if f.ndim == 1:
        f = np.tile(f, (count, 1))
    if f.shape != (count, 3):
        raise ValueError(f"expected {count} orientations, got shape {f.shape}")
    return f


def _final_covariance(scenario: Scenario, H) -> np.ndarray:
    try:
        return eigenmode_transmission(H, scenario.power_budget, scenario.noise_power).covariance
    except RankZeroChannelError:
        return np.zeros((scenario.n_tx, scenario.n_tx), complex)


def ao_solve(scenario: Scenario, cfg: AoConfig = AoConfig(), init_f_t=None, init_f_r=None) -> AoSolution:
    """Alternate covariance update, receive sweep, dual covariance, transmit sweep."""
    st = _Sweeper(scenario, cfg, init_f_t, init_f_r)
    Pmax, noise = scenario.power_budget, scenario.noise_power
    H = st.H
    trace = [max_capacity(H, Pmax, noise)]
    converged = False
    for _ in range(cfg.max_outer):
        try:
            res = eigenmode_transmission(H, Pmax, noise)
        except RankZeroChannelError:
            trace.append(0.0)
            converged = True
            break
        if cfg.optimize_rx:
            st.receive_sweep(res.covariance)
            H = st.H
        if cfg.optimize_tx:
            try:
                dual = eigenmode_transmission(H.conj().T, Pmax, noise)
            except RankZeroChannelError:
                dual = None
            if dual is not None:
                gap = abs(dual.capacity - capacity_with_covariance(H.conj().T, dual.covariance, noise))
                st.diag["duality_gap"] = max(st.diag["duality_gap"], gap)
                st.transmit_sweep(dual.covariance)
                H = st.H
        trace.append(max_capacity(H, Pmax, noise))
        log.debug("AO iteration %d: %.6f bit/s/Hz", len(trace) - 1, trace[-1])
        if abs(trace[-1] - trace[-2]) <= cfg.tol:
            converged = True
            break
    return AoSolution(_final_covariance(scenario, H), st.f_t, st.f_r, trace, converged, st.diag)


def _top_right_singular(H) -> np.ndarray:
    _, _, vh = np.linalg.svd(H)
    return vh[0].conj()


def _rank_one_capacity(H, Pmax, noise) -> float:
    s = np.linalg.norm(H, 2)
    return float(np.log2(1.0 + Pmax * s**2 / noise))


def sepm_solve(scenario: Scenario, cfg: AoConfig = AoConfig(), init_f_t=None, init_f_r=None) -> AoSolution:
    """Strongest-eigenchannel variant: all power on the dominant mode."""
    st = _Sweeper(scenario, cfg, init_f_t, init_f_r)
    Pmax, noise = scenario.power_budget, scenario.noise_power
    H = st.H
    trace = [_rank_one_capacity(H, Pmax, noise)]
    converged = False
    for _ in range(cfg.max_outer):
        if not np.any(H):
            trace.append(0.0)
            converged = True
            break
        if cfg.optimize_rx:
            st.rank_one_sweep("rx", _top_right_singular(H))
            H = st.H
        if cfg.optimize_tx:
            st.rank_one_sweep("tx", _top_right_singular(H.conj().T))
            H = st.H
        trace.append(_rank_one_capacity(H, Pmax, noise))
        if abs(trace[-1] - trace[-2]) <= cfg.tol:
            converged = True
            break
    if np.any(H):
        u = _top_right_singular(H)
        Q = Pmax * np.outer(u, u.conj())
    else:
        Q = np.zeros((scenario.n_tx, scenario.n_tx), complex)
    return AoSolution(hermitian(Q), st.f_t, st.f_r, trace, converged, st.diag)


def _power_capacity(H, Pmax, noise) -> float:
    return float(np.log2(1.0 + Pmax * np.sum(np.abs(H) ** 2) / noise))


def _direct_projection(scenario: Scenario, side: str, i: int) -> np.ndarray:
    """Closed-form p = 1, D = 0 orientation of a single-antenna link end."""
    if side == "tx":
        u = scenario.rx.element_positions[0] - scenario.tx.element_positions[i]
        return project_to_cap(scenario.tx.rotation.T @ (u / np.linalg.norm(u)), scenario.tx_cap)
    u = scenario.tx.element_positions[0] - scenario.rx.element_positions[i]
    return project_to_cap(scenario.rx.rotation.T @ (u / np.linalg.norm(u)), scenario.rx_cap)


def _single_stream(scenario: Scenario, cfg: AoConfig, init_f_t, init_f_r, side: str) -> AoSolution:
    st = _Sweeper(scenario, cfg, init_f_t, init_f_r)
    Pmax, noise = scenario.power_budget, scenario.noise_power
    closed = scenario.pattern.p == 1.0 and not scenario.scatterers
    M, N = scenario.n_rx, scenario.n_tx
    H = st.H
    trace = [_power_capacity(H, Pmax, noise)]
    converged = False
    for _ in range(cfg.max_outer):
        if cfg.optimize_rx:
            factors = link_factors(scenario, st.f_t, st.f_r)
            for m in range(M):
                if side == "simo" and closed:
                    st.f_r[m] = _direct_projection(scenario, "rx", m)
                else:
                    B = np.eye(N)  # |v|^2: total power through this receive element
                    st.f_r[m] = st._solve(receive_problem(scenario, m, st.f_t, B, factors), st.f_r[m])
        if cfg.optimize_tx:
            factors = link_factors(scenario, st.f_t, st.f_r)
            for n in range(N):
                if side == "miso" and closed:
                    st.f_t[n] = _direct_projection(scenario, "tx", n)
                else:
                    B = np.eye(M)
                    st.f_t[n] = st._solve(transmit_problem(scenario, n, st.f_r, B, factors), st.f_t[n])
        H = st.H
        trace.append(_power_capacity(H, Pmax, noise))
        if abs(trace[-1] - trace[-2]) <= cfg.tol:
            converged = True
            break
    if side == "miso":
        h = H[0].conj()
        nrm = np.vdot(h, h).real
        Q = Pmax * np.outer(h, h.conj()) / nrm if nrm > 0 else np.zeros((N, N), complex)
    else:
        Q = np.array([[Pmax]], dtype=complex)
    return AoSolution(hermitian(Q), st.f_t, st.f_r, trace, converged, st.diag)


def miso_solve(scenario: Scenario, cfg: AoConfig = AoConfig(mode="miso"), init_f_t=None, init_f_r=None) -> AoSolution:
    """Single receive antenna: maximise the channel power, MRT covariance."""
    if scenario.n_rx != 1:
        raise ValueError("MISO solver needs exactly one receive antenna")
    return _single_stream(scenario, cfg, init_f_t, init_f_r, "miso")


def simo_solve(scenario: Scenario, cfg: AoConfig = AoConfig(mode="simo"), init_f_t=None, init_f_r=None) -> AoSolution:
    """Single transmit antenna: maximise the channel power, full power on it."""
    if scenario.n_tx != 1:
        raise ValueError("SIMO solver needs exactly one transmit antenna")
    return _single_stream(scenario, cfg, init_f_t, init_f_r, "simo")


def solve(scenario: Scenario, cfg: AoConfig = AoConfig(), init_f_t=None, init_f_r=None) -> AoSolution:
    """Dispatch on ``cfg.mode``."""
    fn = {"full": ao_solve, "sepm": sepm_solve, "miso": miso_solve, "simo": simo_solve}[cfg.mode]
    return fn(scenario, cfg, init_f_t, init_f_r)
