"""Coordinate frames, planar arrays and the spherical-cap feasible set.

Vectors are plain ``numpy`` arrays of shape ``(3,)``. Orientations are unit
vectors expressed in the local frame of their panel; the feasible set of each
orientation is a spherical cap around the local z-axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

E_Z = np.array([0.0, 0.0, 1.0])
# Fixed azimuth used whenever the horizontal part of a direction vanishes.
DEFAULT_AZIMUTH = np.array([1.0, 0.0, 0.0])
CAP_TOL = 1e-12


class DegenerateStepError(ValueError):
    """Raised when a retraction would normalise the zero vector."""


@dataclass(frozen=True)
class SphericalCap:
    """Unit vectors within ``theta_max`` of the local z-axis."""

    theta_max: float

    def __post_init__(self):
        if not 0.0 <= self.theta_max <= np.pi / 2 + 1e-15:
            raise ValueError(f"theta_max must lie in [0, pi/2], got {self.theta_max}")

    @property
    def cos_max(self) -> float:
        if self.theta_max >= np.pi / 2:
            return 0.0  # cos(pi/2) rounds to 6e-17, which would exclude horizontal boresights
        return float(np.cos(self.theta_max))

    @property
    def sin_max(self) -> float:
        return float(np.sin(self.theta_max))

    def boundary_point(self, horizontal: np.ndarray) -> np.ndarray:
        """Cap-boundary point whose azimuth follows ``horizontal`` (unit, z=0)."""
        return self.cos_max * E_Z + self.sin_max * horizontal


def as_vec3(v) -> np.ndarray:
    out = np.asarray(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(out)):
        raise ValueError("vector components must be finite")
    return out


def check_rotation(R, tol: float = 1e-12) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError("rotation matrix must be 3x3")
    if np.max(np.abs(R.T @ R - np.eye(3))) > tol or abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix is not a proper rotation")
    return R


def rotation_to(target) -> np.ndarray:
    """Smallest rotation taking ``e_z`` onto the unit vector ``target``.

    When ``target`` is antiparallel to ``e_z`` the rotation is by pi about x.
    """
    t = as_vec3(target)
    t = t / np.linalg.norm(t)
    axis = np.cross(E_Z, t)
    s = np.linalg.norm(axis)
    c = float(t @ E_Z)
    if s < 1e-15:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    k = axis / s
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    R = np.eye(3) + s * K + (1.0 - c) * (K @ K)
    # re-orthonormalise to keep det/orthogonality at machine precision
    u, _, vt = np.linalg.svd(R)
    return u @ vt


@dataclass(frozen=True)
class ArrayGeometry:
    n_x: int
    n_y: int
    spacing: float
    center: np.ndarray
    rotation: np.ndarray
    local_positions: np.ndarray = field(repr=False)
    element_positions: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.n_x * self.n_y


def build_upa(n_x: int, n_y: int, spacing: float, center=(0.0, 0.0, 0.0), rotation=None) -> ArrayGeometry:
    """Uniform planar array centred on ``center`` in its local x-y plane.

    Elements are ordered row-major with the x index running fastest, and the
    global position of each element is ``center + rotation @ local``.
    """
    if n_x < 1 or n_y < 1:
        raise ValueError("array dimensions must be positive")
    if spacing <= 0:
        raise ValueError("element spacing must be positive")
    center = as_vec3(center)
    R = np.eye(3) if rotation is None else check_rotation(rotation)
    xs = (np.arange(n_x) - (n_x - 1) / 2.0) * spacing
    ys = (np.arange(n_y) - (n_y - 1) / 2.0) * spacing
    gx, gy = np.meshgrid(xs, ys)  # shape (n_y, n_x): x varies along the last axis
    local = np.column_stack([gx.ravel(), gy.ravel(), np.zeros(n_x * n_y)])
    glob = center + local @ R.T
    return ArrayGeometry(int(n_x), int(n_y), float(spacing), center, R, local, glob)


def cap_contains(cap: SphericalCap, f, tol: float = CAP_TOL) -> bool:
    f = np.asarray(f, dtype=float)
    return bool(f[2] >= cap.cos_max - tol)


def lmo_spherical_cap(g, cap: SphericalCap) -> np.ndarray:
    """Maximiser of ``g @ x`` over the cap (closed form, three branches)."""
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g)
    if norm == 0.0:
        return cap.boundary_point(DEFAULT_AZIMUTH)
    g_hat = g / norm
    z = g_hat[2]
    if z >= cap.cos_max:
        return g_hat
    horiz = g_hat - z * E_Z
    h_norm = np.linalg.norm(horiz)
    if h_norm > 0.0:
        return cap.boundary_point(horiz / h_norm)
    return cap.boundary_point(DEFAULT_AZIMUTH)


def project_to_cap(d, cap: SphericalCap) -> np.ndarray:
    """Maximiser of ``f @ d`` over the cap.

    Returns ``d / |d|`` when that direction is feasible, otherwise the boundary
    point sharing the azimuth of ``d``.
    """
    d = np.asarray(d, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("cannot project the zero vector onto the cap")
    if d[2] / norm >= cap.cos_max - CAP_TOL:
        return d / norm
    d_xy = np.array([d[0], d[1], 0.0])
    xy_norm = np.linalg.norm(d_xy)
    if xy_norm == 0.0:
        return cap.boundary_point(DEFAULT_AZIMUTH)
    return cap.boundary_point(d_xy / xy_norm)


def boundary_multipliers(d, cap: SphericalCap) -> tuple[float, float]:
    """Lagrange multipliers ``(lambda, mu)`` of the boundary-constrained maximiser.

    Valid for ``theta_max > 0`` and a nonzero horizontal part of ``d``.
    """
    d = np.asarray(d, dtype=float)
    xy = np.hypot(d[0], d[1])
    c, s = cap.cos_max, cap.sin_max
    two_lam = xy / s
    return two_lam / 2.0, d[2] - two_lam * c


def tangent_project(f, grad) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    grad = np.asarray(grad, dtype=float)
    return grad - f * (f @ grad)


def retract(f, direction, step: float) -> np.ndarray:
    x = np.asarray(f, dtype=float) + step * np.asarray(direction, dtype=float)
    n = np.linalg.norm(x)
    if n == 0.0:
        raise DegenerateStepError("retraction of the zero vector")
    return x / n


def sample_cap(cap: SphericalCap, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Area-uniform samples on the cap (z uniform on [cos_max, 1])."""
    shape = () if size is None else (size,)
    z = rng.uniform(cap.cos_max, 1.0, shape)
    phi = rng.uniform(0.0, 2 * np.pi, shape)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
