"""Example plant models: vertex polytopes built from physical parameters."""

from __future__ import annotations

import math

import numpy as np

from .systems import PolytopicSystem

ROV_PSI1_DEFAULT = math.sqrt(2.0) / 2.0
ROV_PSI2_DEFAULT = 0.35


def _rotation(c: float, s: float) -> np.ndarray:
    """Clockwise rotation-like matrix [[c, s], [-s, c]]."""
    return np.array([[c, s], [-s, c]])


def manipulator_polytope(phi_bar: float, delta_bar: float) -> PolytopicSystem:
    """Planar kinematic manipulator viewed through an uncalibrated camera.

    The end-effector image velocity responds to joint-rate inputs through a
    rotation by an unknown camera misalignment angle around the nominal
    mounting angle ``phi_bar``.  Bounding the misalignment magnitude by
    ``delta_bar`` and taking the extreme values of its cosine/sine pair
    gives four vertex matrices ``R(c_i, s_i) @ R(cos phi_bar, sin phi_bar)``
    with ``(c_i, s_i)`` running over ``{cos delta_bar, 1} x {+-sin delta_bar}``.

    Parameters
    ----------
    phi_bar : float
        Nominal camera angle in radians.
    delta_bar : float
        Misalignment bound in radians; must lie in [0, pi/2] so the
        cosine interval is exactly [cos delta_bar, 1].

    Returns
    -------
    PolytopicSystem
        Four 2x2 vertices (n = m = 2).
    """
    if not (0.0 <= delta_bar <= math.pi / 2):
        raise ValueError("delta_bar must lie in [0, pi/2] radians")
    nominal = _rotation(math.cos(phi_bar), math.sin(phi_bar))
    cd, sd = math.cos(delta_bar), math.sin(delta_bar)
    corners = [(cd, sd), (1.0, sd), (cd, -sd), (1.0, -sd)]
    return PolytopicSystem([_rotation(c, s) @ nominal for c, s in corners])


def rov_polytope(
    m0: float = 290.0,
    Iz: float = 290.0,
    psi1: float = ROV_PSI1_DEFAULT,
    psi2: float = ROV_PSI2_DEFAULT,
    g_lo: float = 0.5,
    g_hi: float = 1.0,
) -> PolytopicSystem:
    """Underwater remotely operated vehicle with four propellers.

    States are body-frame planar velocities plus yaw rate; the four
    propeller thrusts enter through a fixed geometry matrix scaled by the
    inverse mass/inertia, with uncertain efficiency gains on channels 1
    and 3.  Taking the efficiency extremes gives four 3x4 vertices.

    Parameters
    ----------
    m0 : float
        Vehicle mass in kg.
    Iz : float
        Yaw moment of inertia in kg*m^2.
    psi1 : float
        Planar thrust projection factor (dimensionless).
    psi2 : float
        Torque arm in meters.
    g_lo, g_hi : float
        Efficiency range of the uncertain channels, 0 < g_lo <= g_hi.

    Returns
    -------
    PolytopicSystem
        Four 3x4 vertices, ordered lexicographically over
        (g1, g3) in {g_lo, g_hi}^2.
    """
    if not (m0 > 0 and Iz > 0):
        raise ValueError("mass and inertia must be positive")
    if not (0 < g_lo <= g_hi):
        raise ValueError("efficiency bounds must satisfy 0 < g_lo <= g_hi")
    geometry = np.array(
        [
            [psi1, psi1, psi1, psi1],
            [psi1, -psi1, -psi1, psi1],
            [-psi2, psi2, -psi2, psi2],
        ]
    )
    inv_inertia = np.diag([1.0 / m0, 1.0 / m0, 1.0 / Iz])
    vertices = []
    for g1 in (g_lo, g_hi):
        for g3 in (g_lo, g_hi):
            channel_gains = np.diag([g1, 1.0, g3, 1.0])
            vertices.append(inv_inertia @ geometry @ channel_gains)
    return PolytopicSystem(vertices)
