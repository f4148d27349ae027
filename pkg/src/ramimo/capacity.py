"""Eigenmode transmission, water-filling and MIMO capacity evaluation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Scenario, assemble_channel

RANK_REL_TOL = 1e-12


class RankZeroChannelError(ValueError):
    """The channel has no singular value above the truncation threshold."""


@dataclass(frozen=True)
class PowerAllocation:
    powers: np.ndarray  # watts, aligned with nonincreasing singular values
    water_level: float
    rank: int

    @property
    def active(self) -> int:
        return int(np.count_nonzero(self.powers > 0))


@dataclass(frozen=True)
class CapacityResult:
    capacity: float
    singular_values: np.ndarray
    allocation: PowerAllocation
    covariance: np.ndarray
    channel: np.ndarray | None = None


def hermitian(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


def truncated_rank(sigmas, reference: float | None = None, rel_tol: float = RANK_REL_TOL) -> int:
    """Number of singular values above ``rel_tol * reference``."""
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.size == 0:
        return 0
    ref = float(np.max(sigmas)) if reference is None else float(reference)
    if ref <= 0:
        return 0
    return int(np.count_nonzero(sigmas > rel_tol * ref))


def water_fill(sigmas, p_total: float, noise: float) -> PowerAllocation:
    """Exact water-filling ``p_s = max(0, mu - noise / sigma_s^2)``.

    The singular values are sorted into nonincreasing order and the returned
    powers follow that order. The water level is found by shrinking the active
    set until the weakest active mode receives positive power.
    """
    sigmas = np.sort(np.asarray(sigmas, dtype=float))[::-1]
    if sigmas.size == 0:
        raise RankZeroChannelError("no eigenmodes to allocate power over")
    if np.any(sigmas <= 0):
        raise ValueError("singular values must be positive; truncate the rank first")
    if p_total <= 0 or noise <= 0:
        raise ValueError("power budget and noise power must be positive")

    inv = noise / sigmas**2  # nondecreasing
    csum = np.cumsum(inv)
    k = sigmas.size
    while k > 1:
        mu = (p_total + csum[k - 1]) / k
        if mu > inv[k - 1]:
            break
        k -= 1
    mu = (p_total + csum[k - 1]) / k
    powers = np.zeros_like(sigmas)
    powers[:k] = mu - inv[:k]
    # exact budget: push the rounding residue onto the strongest mode
    powers[0] += p_total - powers.sum()
    return PowerAllocation(powers, float(mu), int(sigmas.size))


def eigenmode_transmission(H, p_total: float, noise: float) -> CapacityResult:
    """Optimal covariance and capacity of a fixed channel."""
    H = np.asarray(H, dtype=complex)
    _, s, vh = np.linalg.svd(H, full_matrices=False)
    S = truncated_rank(s)
    if S == 0:
        raise RankZeroChannelError("channel matrix is numerically zero")
    alloc = water_fill(s[:S], p_total, noise)
    V = vh[:S].conj().T
    Q = hermitian((V * alloc.powers) @ V.conj().T)
    cap = float(np.sum(np.log2(1.0 + s[:S] ** 2 * alloc.powers / noise)))
    return CapacityResult(cap, s[:S], alloc, Q, H)


def optimal_covariance(H, p_total: float, noise: float) -> np.ndarray:
    return eigenmode_transmission(H, p_total, noise).covariance


def capacity_with_covariance(H, Q, noise: float) -> float:
    """``log2 det(I + H Q H^H / noise)``."""
    H = np.asarray(H, dtype=complex)
    Q = np.asarray(Q, dtype=complex)
    if Q.shape != (H.shape[1], H.shape[1]):
        raise ValueError("covariance dimension does not match the channel")
    Q = hermitian(Q)
    w = np.linalg.eigvalsh(Q)
    if w.size and w[0] < -1e-10 * max(float(np.real(np.trace(Q))), np.finfo(float).tiny):
        raise ValueError("covariance is not positive semidefinite")
    G = np.eye(H.shape[0]) + (H @ Q @ H.conj().T) / noise
    sign, logdet = np.linalg.slogdet(hermitian(G))
    return float(logdet / np.log(2.0))


def max_capacity(H, p_total: float, noise: float) -> float:
    """Capacity with water-filled eigenmodes; zero for a zero channel."""
    try:
        return eigenmode_transmission(H, p_total, noise).capacity
    except RankZeroChannelError:
        return 0.0


def capacity_given_orientations(scenario: Scenario, f_t, f_r) -> CapacityResult:
    H = assemble_channel(scenario, f_t, f_r)
    try:
        res = eigenmode_transmission(H, scenario.power_budget, scenario.noise_power)
    except RankZeroChannelError:
        N = scenario.n_tx
        empty = PowerAllocation(np.zeros(0), 0.0, 0)
        return CapacityResult(0.0, np.zeros(0), empty, np.zeros((N, N), complex), H)
    return res


def max_capacity_batch(H, p_total: float, noise: float) -> np.ndarray:
    """Water-filled capacities for a stack of channels ``(..., M, N)``."""
    s = np.linalg.svd(H, compute_uv=False)
    s = s.reshape(-1, s.shape[-1])
    out = np.zeros(s.shape[0])
    for i, row in enumerate(s):
        S = truncated_rank(row)
        if S:
            alloc = water_fill(row[:S], p_total, noise)
            out[i] = np.sum(np.log2(1.0 + row[:S] ** 2 * alloc.powers / noise))
    return out.reshape(H.shape[:-2])
