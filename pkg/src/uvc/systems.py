"""Domain types for polytopic input-channel uncertainty and actuator limits.

All types are frozen dataclasses wrapping read-only numpy arrays, so
instances can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .sdp import SolverSettings

SIMPLEX_SUM_TOL = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    """Copy to a contiguous read-only float array."""
    out = np.array(a, dtype=dtype, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PolytopicSystem:
    """Uncertain input map described by the convex hull of vertex matrices.

    The plant input matrix is constant but unknown; it is only known to be
    a convex combination of the ``vertices``, each an n-by-m array mapping
    inputs to state derivatives.
    """

    vertices: tuple[np.ndarray, ...]

    def __init__(self, vertices):
        mats = tuple(_frozen(v) for v in vertices)
        if len(mats) < 1:
            raise ValueError("a polytopic system needs at least one vertex")
        shape = mats[0].shape
        if len(shape) != 2:
            raise ValueError(f"vertex matrices must be 2-D, got shape {shape}")
        for i, v in enumerate(mats):
            if v.shape != shape:
                raise ValueError(
                    f"vertex {i} has shape {v.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(v)):
                raise ValueError(f"vertex {i} contains non-finite entries")
        object.__setattr__(self, "vertices", mats)

    @property
    def n(self) -> int:
        """State dimension."""
        return self.vertices[0].shape[0]

    @property
    def m(self) -> int:
        """Input dimension."""
        return self.vertices[0].shape[1]

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def scale(self) -> float:
        """Problem scale factor max(1, max spectral norm over vertices)."""
        return max(1.0, max(np.linalg.norm(v, 2) for v in self.vertices))


@dataclass(frozen=True)
class SimplexWeights:
    """Convex-combination weights: nonnegative, summing to one."""

    alpha: np.ndarray

    def __init__(self, alpha):
        a = _frozen(np.atleast_1d(alpha))
        if a.ndim != 1:
            raise ValueError("weights must be a vector")
        if np.any(a < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(a.sum()) - 1.0) > SIMPLEX_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {a.sum()!r}")
        object.__setattr__(self, "alpha", a)

    def __len__(self) -> int:
        return self.alpha.shape[0]


@dataclass(frozen=True)
class SaturationLimits:
    """Per-channel symmetric actuator amplitude bounds, all positive."""

    u_bar: np.ndarray

    def __init__(self, u_bar):
        u = _frozen(np.atleast_1d(u_bar))
        if u.ndim != 1:
            raise ValueError("saturation limits must be a vector")
        if not np.all(np.isfinite(u)) or np.any(u <= 0):
            raise ValueError("saturation limits must be finite and positive")
        object.__setattr__(self, "u_bar", u)

    @property
    def m(self) -> int:
        return self.u_bar.shape[0]


@dataclass(frozen=True)
class SynthesisParameters:
    """Scalar knobs of the gain-design optimization.

    Parameters
    ----------
    mu : float
        Positive scalar weighting the quadratic completion in the vertex
        stability blocks.
    rho : float
        Guaranteed reaching-time bound in seconds; the decay matrix is
        forced to satisfy ``lambda_min(Q) >= 1/rho``.
    eps_strict : float, optional
        Margin used to encode strict matrix inequalities as semidefinite
        ones.  When omitted, it is resolved at assembly time as
        ``1e-6 * max(1, max vertex spectral norm)``.
    solver : SolverSettings, optional
        Settings forwarded to the semidefinite-program backend.
    inclusion_backoff : float, optional
        Relative tightening of the squared saturation limits applied only
        while solving, so the recovered design satisfies the *original*
        per-actuator bounds with a strictly positive margin instead of a
        sign that depends on solver round-off.  The optimum shifts by
        O(backoff); certificates are always checked against the original
        limits.
    """

    mu: float
    rho: float
    eps_strict: float | None = None
    solver: "SolverSettings" = field(default=None)  # type: ignore[assignment]
    inclusion_backoff: float = 1e-8

    def __post_init__(self):
        if not (self.mu > 0):
            raise ValueError("mu must be positive")
        if not (self.rho > 0):
            raise ValueError("rho must be positive")
        if self.eps_strict is not None and not (self.eps_strict > 0):
            raise ValueError("eps_strict must be positive")
        if not (0.0 <= self.inclusion_backoff < 1.0):
            raise ValueError("inclusion_backoff must lie in [0, 1)")
        if self.solver is None:
            from .sdp import SolverSettings

            object.__setattr__(self, "solver", SolverSettings())

    def resolve_eps(self, system: PolytopicSystem) -> float:
        """Strictness margin, derived from the system scale when unset."""
        if self.eps_strict is not None:
            return self.eps_strict
        return 1e-6 * system.scale()
