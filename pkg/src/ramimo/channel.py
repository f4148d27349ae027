"""Orientation-dependent geometric MIMO channel (LoS plus bistatic scatterers).

All quantities are in linear units: metres, watts, radians.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .geometry import ArrayGeometry, SphericalCap


@dataclass(frozen=True)
class GainPattern:
    """Cosine-power pattern ``G0 cos^(2p)`` on the front half-space."""

    p: float

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("directivity exponent must be nonnegative")

    @property
    def g0(self) -> float:
        return 2.0 * (2.0 * self.p + 1.0)

    def gain(self, eps):
        eps = np.asarray(eps, dtype=float)
        inside = (eps >= 0) & (eps <= np.pi / 2)
        return np.where(inside, self.g0 * np.cos(np.clip(eps, 0, np.pi / 2)) ** (2 * self.p), 0.0)


@dataclass(frozen=True)
class Scatterer:
    position: np.ndarray
    rcs: float
    phase: float

    def __post_init__(self):
        if self.rcs < 0:
            raise ValueError("radar cross section must be nonnegative")
        if not 0.0 <= self.phase < 2 * np.pi:
            raise ValueError("scattering phase must lie in [0, 2pi)")


def clamp_pow(x, p: float):
    """``[x]_+ ** p`` with the strict convention ``0`` for ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, np.maximum(x, 0.0) ** p, 0.0)


def clamp_pow_deriv(x, p: float):
    """Derivative of :func:`clamp_pow`, zero wherever the clamp is active."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    return np.where(pos, p * np.where(pos, x, 1.0) ** (p - 1.0), 0.0)


@dataclass(frozen=True)
class Links:
    """Distances, unit directions and path constants of a scenario.

    Shapes: ``M`` receive elements, ``N`` transmit elements, ``D`` scatterers.
    Unit directions are given both globally and in the local frame of the
    panel that owns the boresight being evaluated.
    """

    r_mn: np.ndarray  # (M, N)
    r_nd: np.ndarray  # (N, D)
    r_md: np.ndarray  # (M, D)
    a: np.ndarray  # (M, N) LoS constants
    b: np.ndarray  # (M, N, D) NLoS constants
    tx_los: np.ndarray  # (N, M, 3) tx-local unit vectors tx n -> rx m
    tx_sc: np.ndarray  # (N, D, 3) tx-local unit vectors tx n -> scatterer d
    rx_los: np.ndarray  # (M, N, 3) rx-local unit vectors rx m -> tx n
    rx_sc: np.ndarray  # (M, D, 3) rx-local unit vectors rx m -> scatterer d


@dataclass(frozen=True)
class Scenario:
    wavelength: float
    tx: ArrayGeometry
    rx: ArrayGeometry
    scatterers: tuple = ()
    pattern: GainPattern = field(default_factory=lambda: GainPattern(1.0))
    noise_power: float = 1e-11
    power_budget: float = 1e-2
    tx_cap: SphericalCap = field(default_factory=lambda: SphericalCap(np.pi / 6))
    rx_cap: SphericalCap = field(default_factory=lambda: SphericalCap(np.pi / 6))

    def __post_init__(self):
        if self.wavelength <= 0 or self.noise_power <= 0 or self.power_budget <= 0:
            raise ValueError("wavelength, noise power and power budget must be positive")
        object.__setattr__(self, "scatterers", tuple(self.scatterers))

    @property
    def beta0(self) -> float:
        return (self.wavelength / (4 * np.pi)) ** 2

    @property
    def n_tx(self) -> int:
        return self.tx.size

    @property
    def n_rx(self) -> int:
        return self.rx.size

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    @cached_property
    def scatterer_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.scatterers:
            return np.zeros((0, 3)), np.zeros(0), np.zeros(0)
        pos = np.array([s.position for s in self.scatterers], dtype=float).reshape(-1, 3)
        rcs = np.array([s.rcs for s in self.scatterers], dtype=float)
        phase = np.array([s.phase for s in self.scatterers], dtype=float)
        return pos, rcs, phase

    @cached_property
    def links(self) -> Links:
        t = self.tx.element_positions
        r = self.rx.element_positions
        s, rcs, chi = self.scatterer_arrays
        lam, g0 = self.wavelength, self.pattern.g0
        k = 2 * np.pi / lam

        diff = r[:, None, :] - t[None, :, :]  # rx m - tx n
        r_mn = np.linalg.norm(diff, axis=-1)
        dn = s[None, :, :] - t[:, None, :]  # scatterer d - tx n
        r_nd = np.linalg.norm(dn, axis=-1)
        dm = s[None, :, :] - r[:, None, :]  # scatterer d - rx m
        r_md = np.linalg.norm(dm, axis=-1)
        if np.any(r_mn == 0) or np.any(r_nd == 0) or np.any(r_md == 0):
            raise ValueError("coincident points in scenario geometry")

        u_mn = diff / r_mn[..., None]
        a = np.sqrt(self.beta0) * g0 / r_mn * np.exp(-1j * k * r_mn)
        amp = np.sqrt(rcs / (4 * np.pi)) * self.beta0 * g0
        path = r_nd[None, :, :] + r_md[:, None, :]  # (M, N, D)
        b = (amp / (r_nd[None, :, :] * r_md[:, None, :])) * np.exp(-1j * k * path + 1j * chi)

        Rt, Rr = self.tx.rotation, self.rx.rotation
        tx_los = np.transpose(u_mn, (1, 0, 2)) @ Rt
        tx_sc = (dn / r_nd[..., None]) @ Rt
        rx_los = (-u_mn) @ Rr
        rx_sc = (dm / r_md[..., None]) @ Rr
        return Links(r_mn, r_nd, r_md, a, b, tx_los, tx_sc, rx_los, rx_sc)

    def digest(self) -> str:
        h = hashlib.sha256()
        pos, rcs, chi = self.scatterer_arrays
        for arr in (
            self.tx.element_positions, self.tx.rotation, self.rx.element_positions, self.rx.rotation,
            pos, rcs, chi,
            np.array([self.wavelength, self.pattern.p, self.noise_power, self.power_budget,
                      self.tx_cap.theta_max, self.rx_cap.theta_max]),
        ):
            h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
        return h.hexdigest()[:16]


def directional_factor(boresight, target, source, p: float) -> float:
    """``[boresight . (target - source) / |target - source|]_+ ** p``."""
    vec = np.asarray(target, dtype=float) - np.asarray(source, dtype=float)
    dist = np.linalg.norm(vec)
    if dist == 0.0:
        raise ValueError("target and source coincide")
    return float(clamp_pow(np.dot(boresight, vec) / dist, p))


def los_coefficient(scenario: Scenario, n: int, m: int, f_t, f_r) -> complex:
    t_n = scenario.tx.element_positions[n]
    r_m = scenario.rx.element_positions[m]
    p = scenario.pattern.p
    dist = np.linalg.norm(r_m - t_n)
    a = np.sqrt(scenario.beta0) * scenario.pattern.g0 / dist * np.exp(-2j * np.pi * dist / scenario.wavelength)
    ft = directional_factor(scenario.tx.rotation @ np.asarray(f_t, float), r_m, t_n, p)
    fr = directional_factor(scenario.rx.rotation @ np.asarray(f_r, float), t_n, r_m, p)
    return complex(a * ft * fr)


def nlos_coefficient(scenario: Scenario, n: int, m: int, f_t, f_r) -> complex:
    t_n = scenario.tx.element_positions[n]
    r_m = scenario.rx.element_positions[m]
    p, g0, lam = scenario.pattern.p, scenario.pattern.g0, scenario.wavelength
    bt = scenario.tx.rotation @ np.asarray(f_t, float)
    br = scenario.rx.rotation @ np.asarray(f_r, float)
    total = 0j
    for sc in scenario.scatterers:
        s = np.asarray(sc.position, float)
        r_nd = np.linalg.norm(s - t_n)
        r_dm = np.linalg.norm(s - r_m)
        if r_nd == 0.0 or r_dm == 0.0:
            raise ValueError("scatterer coincides with an array element")
        b = (np.sqrt(sc.rcs / (4 * np.pi)) * scenario.beta0 * g0 / (r_nd * r_dm)
             * np.exp(-2j * np.pi * (r_nd + r_dm) / lam + 1j * sc.phase))
        total += b * directional_factor(bt, s, t_n, p) * directional_factor(br, s, r_m, p)
    return complex(total)


def _orientations(f, count: int, side: str) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim == 1:
        f = np.broadcast_to(f, (count, 3))
    if f.shape != (count, 3):
        raise ValueError(f"expected {count} {side} orientations, got array of shape {f.shape}")
    return f


def link_factors(scenario: Scenario, f_t, f_r):
    """Directional factors ``(ft_los, fr_los, ft_sc, fr_sc)`` for all links.

    Shapes ``(M, N)``, ``(M, N)``, ``(N, D)`` and ``(M, D)``. ``f_t``/``f_r``
    may carry leading batch dimensions, e.g. ``(B, N, 3)``.
    """
    L = scenario.links
    p = scenario.pattern.p
    f_t = np.asarray(f_t, float)
    f_r = np.asarray(f_r, float)
    ft_los = clamp_pow(np.einsum("...nk,nmk->...mn", f_t, L.tx_los), p)
    fr_los = clamp_pow(np.einsum("...mk,mnk->...mn", f_r, L.rx_los), p)
    ft_sc = clamp_pow(np.einsum("...nk,ndk->...nd", f_t, L.tx_sc), p)
    fr_sc = clamp_pow(np.einsum("...mk,mdk->...md", f_r, L.rx_sc), p)
    return ft_los, fr_los, ft_sc, fr_sc


def assemble_channel(scenario: Scenario, f_t, f_r) -> np.ndarray:
    """The ``M x N`` channel matrix for the given local orientations."""
    f_t = _orientations(f_t, scenario.n_tx, "transmit")
    f_r = _orientations(f_r, scenario.n_rx, "receive")
    return assemble_channel_batch(scenario, f_t, f_r)


def assemble_channel_batch(scenario: Scenario, f_t, f_r) -> np.ndarray:
    """Like :func:`assemble_channel` but with arbitrary leading batch axes."""
    L = scenario.links
    ft_los, fr_los, ft_sc, fr_sc = link_factors(scenario, f_t, f_r)
    H = L.a * ft_los * fr_los
    if L.b.shape[-1]:
        H = H + np.einsum("mnd,...nd,...md->...mn", L.b, ft_sc, fr_sc)
    return H
