"""Geometry and certification checks for recovered designs.

The certified region is the unit sublevel set of the direction-normalized
Lyapunov function V(s) = s'Ps/|s|; the admissible region is the set of
directions on which every actuator row of (K - L) stays within its
saturation limit.  Everything here is a pure function of immutable
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IllConditionedError
from .lmi import COND_CAP_DEFAULT, ControllerDesign
from .systems import SaturationLimits

OMEGA_MEMBERSHIP_TOL = 1e-12
UNIT_NORM_TOL = 1e-12


@dataclass(frozen=True)
class RegionSample:
    """Sampled boundary description of the certified and admissible regions.

    ``omega_radius[k]`` is the distance from the origin to the boundary of
    the certified region along ``directions[k]``; ``du_admissible[k]``
    flags whether that direction satisfies every per-actuator bound.
    """

    directions: np.ndarray
    omega_radius: np.ndarray
    du_admissible: np.ndarray

    def __post_init__(self):
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        norms = np.linalg.norm(dirs, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError("directions must have unit norm")
        radius = np.asarray(self.omega_radius, dtype=float)
        flags = np.asarray(self.du_admissible, dtype=bool)
        if not (len(dirs) == len(radius) == len(flags)):
            raise ValueError("per-direction arrays must have equal length")
        for name, arr in (("directions", dirs), ("omega_radius", radius),
                          ("du_admissible", flags)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def lyapunov_value(design: ControllerDesign, sigma) -> float:
    """Direction-normalized Lyapunov value s'Ps/|s| (0 at the origin)."""
    s = np.asarray(sigma, dtype=float)
    norm = float(np.linalg.norm(s))
    if norm == 0.0:
        return 0.0
    return float(s @ design.P @ s) / norm


def omega_contains(design: ControllerDesign, sigma) -> bool:
    """Membership in the certified region {V <= 1} (origin included)."""
    return lyapunov_value(design, sigma) <= 1.0 + OMEGA_MEMBERSHIP_TOL


def du_contains(design: ControllerDesign, limits: SaturationLimits, sigma) -> bool:
    """Directional admissibility: |(K - L) s/|s|| within limits, per row.

    Membership depends only on the direction of ``sigma``; the origin is
    admissible by convention.
    """
    s = np.asarray(sigma, dtype=float)
    norm = float(np.linalg.norm(s))
    if norm == 0.0:
        return True
    v = (design.K - design.L) @ (s / norm)
    return bool(np.all(np.abs(v) <= limits.u_bar))


def inclusion_margins(
    design: ControllerDesign,
    limits: SaturationLimits,
    cond_cap: float = COND_CAP_DEFAULT,
) -> np.ndarray:
    """Algebraic witness that the certified region is admissible.

    Returns ``u_bar_l^2 - (K-L)_l inv(P) (K-L)_l'`` per actuator row; the
    design is certified when every entry is nonnegative, because the
    left-hand term is the squared peak of the row over the unit sublevel
    ellipsoid of P.
    """
    cond = np.linalg.cond(design.P)
    if not np.isfinite(cond) or cond > cond_cap:
        raise IllConditionedError(
            f"P has condition number {cond:.3e} (cap {cond_cap:.1e})"
        )
    Pinv = np.linalg.solve(design.P, np.eye(design.n))
    Pinv = 0.5 * (Pinv + Pinv.T)
    rows = design.K - design.L
    peaks = np.einsum("ln,nk,lk->l", rows, Pinv, rows)
    return limits.u_bar**2 - peaks


def reaching_time_bound(design: ControllerDesign, sigma0) -> float:
    """Guaranteed upper bound V(sigma0)/lambda_min(Q) on the reach time."""
    s = np.asarray(sigma0, dtype=float)
    if float(np.linalg.norm(s)) == 0.0:
        raise ValueError("reaching-time bound is undefined at the origin")
    return lyapunov_value(design, s) / design.lambda_min_Q()


def omega_boundary(design: ControllerDesign, directions) -> RegionSample:
    """Boundary radius of the certified region along unit directions.

    Along a unit direction d the Lyapunov value grows linearly with the
    radius, V(r d) = r * d'Pd, so the boundary sits at r = 1/(d'Pd).
    """
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    if dirs.shape[1] != design.n:
        raise ValueError(
            f"directions have dimension {dirs.shape[1]}, expected {design.n}"
        )
    norms = np.linalg.norm(dirs, axis=1)
    if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
        raise ValueError("directions must have unit norm")
    quad = np.einsum("kn,nm,km->k", dirs, design.P, dirs)
    rows = design.K - design.L
    vals = np.abs(dirs @ rows.T)
    admissible = np.all(vals <= design.u_bar.u_bar, axis=1)
    return RegionSample(
        directions=dirs,
        omega_radius=1.0 / quad,
        du_admissible=admissible,
    )


def sector_condition(K, L, U, limits: SaturationLimits, z) -> float:
    """Dead-zone sector form psi(u)' U (psi(u) - L z) at u = K z.

    For any diagonal U > 0 the value is nonpositive whenever z satisfies
    the per-row bounds |(K - L)_l z| <= u_bar_l; outside that region the
    sign is not constrained.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    L = np.atleast_2d(np.asarray(L, dtype=float))
    U = np.atleast_2d(np.asarray(U, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    m = K.shape[0]
    if U.shape != (m, m):
        raise ValueError(f"U must be {m}x{m}")
    if np.any(U != np.diag(np.diag(U))):
        raise ValueError("U must be diagonal")
    if np.any(np.diag(U) <= 0):
        raise ValueError("U must have positive diagonal entries")
    u = K @ z
    psi = u - np.clip(u, -limits.u_bar, limits.u_bar)
    return float(psi @ U @ (psi - L @ z))


def planar_directions(count: int) -> np.ndarray:
    """``count`` unit vectors at uniformly spaced angles in the plane."""
    if count < 1:
        raise ValueError("count must be at least 1")
    angles = 2.0 * math.pi * np.arange(count) / count
    return np.column_stack([np.cos(angles), np.sin(angles)])


def fibonacci_sphere_directions(count: int) -> np.ndarray:
    """Near-uniform deterministic unit vectors on the 2-sphere."""
    if count < 1:
        raise ValueError("count must be at least 1")
    k = np.arange(count, dtype=float)
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    zc = 1.0 - (2.0 * k + 1.0) / count
    r = np.sqrt(np.maximum(0.0, 1.0 - zc * zc))
    theta = 2.0 * math.pi * k / golden
    dirs = np.column_stack([r * np.cos(theta), r * np.sin(theta), zc])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def boundary_directions(n: int, count: int) -> np.ndarray:
    """Deterministic unit-direction set for boundary sampling in R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])[: max(1, min(count, 2))]
    if n == 2:
        return planar_directions(count)
    if n == 3:
        return fibonacci_sphere_directions(count)
    raise ValueError(f"boundary sampling is implemented for n in 1..3, got {n}")
