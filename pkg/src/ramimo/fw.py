"""Riemannian Frank-Wolfe ascent over a spherical cap."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import SphericalCap, cap_contains, lmo_spherical_cap, tangent_project


@dataclass(frozen=True)
class FwConfig:
    """Armijo backtracking and stopping parameters.

    ``tol`` is relative: iteration stops once ``|F_new - F_old| <= tol * |F_new|``.
    Near an interior optimum the remaining gap scales like ``sqrt(tol)``, hence
    the small default.
    """

    armijo_c: float = 1e-4
    armijo_beta: float = 0.5
    max_iters: int = 100
    tol: float = 1e-12
    min_step: float = 1e-10

    def __post_init__(self):
        if not (0 < self.armijo_c < 1 and 0 < self.armijo_beta < 1):
            raise ValueError("Armijo constants must lie in (0, 1)")
        if self.max_iters < 1 or self.tol < 0 or self.min_step <= 0:
            raise ValueError("invalid Frank-Wolfe stopping parameters")


@dataclass
class FwTrace:
    utilities: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    method: str = "frank_wolfe"


def frank_wolfe(
    utility_fn: Callable[[np.ndarray], float],
    gradient_fn: Callable[[np.ndarray], np.ndarray],
    cap: SphericalCap,
    init,
    cfg: FwConfig = FwConfig(),
) -> tuple[np.ndarray, FwTrace]:
    """Maximise ``utility_fn`` over ``cap`` starting from the feasible ``init``.

    Each iteration projects the Euclidean gradient onto the tangent space,
    calls the cap LMO, backtracks along ``y - f`` under the Armijo rule and
    normalises back onto the sphere.
    """
    f = np.asarray(init, dtype=float).copy()
    if abs(np.linalg.norm(f) - 1.0) > 1e-9 or not cap_contains(cap, f):
        raise ValueError("initial orientation is not feasible")
    F = float(utility_fn(f))
    trace = FwTrace(utilities=[F])
    c, beta = cfg.armijo_c, cfg.armijo_beta

    for _ in range(cfg.max_iters):
        trace.iterations += 1
        g = tangent_project(f, gradient_fn(f))
        d = lmo_spherical_cap(g, cap) - f
        slope = float(g @ d)
        if not slope > 0.0:
            trace.converged = True
            break
        rho = 1.0
        accepted = None
        while rho >= cfg.min_step:
            x = f + rho * d
            nx = np.linalg.norm(x)
            if nx > 0.0:
                cand = x / nx
                Fc = float(utility_fn(cand))
                if Fc >= F + c * rho * slope:
                    accepted = cand
                    break
            rho *= beta
        if accepted is None:
            trace.converged = True
            break
        dF = Fc - F
        f, F = accepted, Fc
        trace.utilities.append(F)
        trace.steps.append(rho)
        if abs(dF) <= cfg.tol * abs(F):
            trace.converged = True
            break
    return f, trace
