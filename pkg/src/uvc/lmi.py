"""Decision-variable layout, LMI block assembly, and gain recovery.

The design problem is posed over a symmetric Lyapunov-shape variable X,
a diagonal sector multiplier S, full gain factors Z and Y, a symmetric
decay-shape variable Qtilde, and a scalar phi bounding the largest
eigenvalue of P = inv(X).  All constraints are affine symmetric-matrix
inequalities normalized to "evaluate >= 0" sense, so they can be handed
to any semidefinite-program backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import IllConditionedError, NoDesignError, NumericalFailureError
from .systems import PolytopicSystem, SaturationLimits, SynthesisParameters

if TYPE_CHECKING:
    from .sdp import SdpSolution

COND_CAP_DEFAULT = 1e12

# Certificate check tolerances applied when recovering a design.
Q_FLOOR_TOL = 1e-8       # lambda_min(Q) >= 1/rho - tol
MARGIN_REL_TOL = 1e-8    # row bound (K-L) P^-1 (K-L)^T <= u_bar^2 * (1+tol)
P_CAP_TOL = 1e-8         # P <= phi*I + tol*I


def _sym_entries(n: int) -> list[tuple[int, int]]:
    """Upper-triangle index pairs (i, j), i <= j, in row-major order."""
    return [(i, j) for i in range(n) for j in range(i, n)]


@dataclass(frozen=True)
class DecisionLayout:
    """Canonical ordering of the scalar decision variables.

    Ranges are contiguous and disjoint, in the order X, S, Z, Y, Qtilde,
    phi.  Symmetric matrices are packed as their upper triangle in
    row-major order; full matrices are packed row-major.
    """

    n: int
    m: int
    x_range: range
    s_range: range
    z_range: range
    y_range: range
    qt_range: range
    phi_index: int
    total_vars: int

    def unpack(self, vec: np.ndarray):
        """Split a decision vector into (X, s_diag, Z, Y, Qtilde, phi)."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.total_vars,):
            raise ValueError(
                f"decision vector has length {vec.shape}, "
                f"expected ({self.total_vars},)"
            )
        n, m = self.n, self.m
        X = _unpack_sym(vec[self.x_range.start : self.x_range.stop], n)
        s = vec[self.s_range.start : self.s_range.stop].copy()
        Z = vec[self.z_range.start : self.z_range.stop].reshape(m, n).copy()
        Y = vec[self.y_range.start : self.y_range.stop].reshape(m, n).copy()
        Qt = _unpack_sym(vec[self.qt_range.start : self.qt_range.stop], n)
        phi = float(vec[self.phi_index])
        return X, s, Z, Y, Qt, phi

    def pack(self, X, s, Z, Y, Qt, phi) -> np.ndarray:
        """Inverse of `unpack`; symmetric inputs are read on the upper triangle."""
        n, m = self.n, self.m
        vec = np.empty(self.total_vars)
        vec[self.x_range.start : self.x_range.stop] = _pack_sym(np.asarray(X, float), n)
        vec[self.s_range.start : self.s_range.stop] = np.asarray(s, float).reshape(m)
        vec[self.z_range.start : self.z_range.stop] = np.asarray(Z, float).reshape(m * n)
        vec[self.y_range.start : self.y_range.stop] = np.asarray(Y, float).reshape(m * n)
        vec[self.qt_range.start : self.qt_range.stop] = _pack_sym(np.asarray(Qt, float), n)
        vec[self.phi_index] = phi
        return vec


def _pack_sym(M: np.ndarray, n: int) -> np.ndarray:
    return np.array([M[i, j] for i, j in _sym_entries(n)])


def _unpack_sym(v: np.ndarray, n: int) -> np.ndarray:
    M = np.zeros((n, n))
    for k, (i, j) in enumerate(_sym_entries(n)):
        M[i, j] = v[k]
        M[j, i] = v[k]
    return M


def decision_layout(n: int, m: int) -> DecisionLayout:
    """Build the canonical decision-variable layout for dimensions (n, m)."""
    if n < 1 or m < 1:
        raise ValueError("state and input dimensions must be at least 1")
    sym = n * (n + 1) // 2
    start = 0
    x_range = range(start, start + sym)
    start = x_range.stop
    s_range = range(start, start + m)
    start = s_range.stop
    z_range = range(start, start + m * n)
    start = z_range.stop
    y_range = range(start, start + m * n)
    start = y_range.stop
    qt_range = range(start, start + sym)
    phi_index = qt_range.stop
    return DecisionLayout(
        n=n,
        m=m,
        x_range=x_range,
        s_range=s_range,
        z_range=z_range,
        y_range=y_range,
        qt_range=qt_range,
        phi_index=phi_index,
        total_vars=phi_index + 1,
    )


@dataclass(frozen=True)
class LmiBlock:
    """One affine symmetric-matrix constraint F0 + sum_k x_k Fk >= 0.

    ``coeffs`` stacks the per-variable coefficient matrices Fk along the
    first axis (one slice per scalar decision variable, zero where the
    variable does not enter the block).
    """

    label: str
    F0: np.ndarray
    coeffs: np.ndarray
    sense: str = ">=0"

    def __post_init__(self):
        F0 = np.asarray(self.F0, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=float)
        if F0.ndim != 2 or F0.shape[0] != F0.shape[1]:
            raise ValueError(f"block {self.label}: F0 must be square")
        if coeffs.ndim != 3 or coeffs.shape[1:] != F0.shape:
            raise ValueError(f"block {self.label}: coefficient stack shape mismatch")
        if not np.array_equal(F0, F0.T):
            raise ValueError(f"block {self.label}: F0 is not symmetric")
        if not np.array_equal(coeffs, np.swapaxes(coeffs, 1, 2)):
            raise ValueError(f"block {self.label}: coefficients are not symmetric")
        F0.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Affine evaluation F0 + sum_k x_k Fk at the point x."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.coeffs.shape[0],):
            raise ValueError(
                f"block {self.label}: point has length {x.shape}, "
                f"expected ({self.coeffs.shape[0]},)"
            )
        return self.F0 + np.tensordot(x, self.coeffs, axes=1)


@dataclass(frozen=True)
class LmiProgram:
    """Linear objective plus a list of affine PSD block constraints."""

    objective: np.ndarray
    blocks: tuple[LmiBlock, ...]
    eps_strict: float

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float)
        if c.ndim != 1:
            raise ValueError("objective must be a vector")
        for b in self.blocks:
            if b.coeffs.shape[0] != c.shape[0]:
                raise ValueError(
                    f"block {b.label}: variable count {b.coeffs.shape[0]} "
                    f"!= objective length {c.shape[0]}"
                )
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    def block(self, label: str) -> LmiBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)


def assemble_program(
    system: PolytopicSystem,
    limits: SaturationLimits,
    params: SynthesisParameters,
    layout: DecisionLayout,
) -> LmiProgram:
    """Assemble the full gain-design program for one mu/rho pair.

    Emitted blocks, all normalized to ">= 0" sense:

    - ``Xpos``: X - eps*I
    - ``Spos``: S - eps*I
    - ``Lambda_vertex_i``: -(vertex stability block) - eps*I, one per
      vertex, of size 2n+m.  The vertex matrix Bi enters every coupling
      position of the block.
    - ``inclusion_row_l``: [[X, (Z-Y) row^T], [(Z-Y) row, u_bar_l^2]],
      one per actuator row, certifying that the unit-sublevel ellipsoid
      of P stays inside the region where the dead-zone sector bound is
      valid.
    - ``Qmax``: [[Qtilde, X], [X, rho*I]], forcing
      lambda_min(Q) >= 1/rho for Q = inv(X) Qtilde inv(X).
    - ``U0max``: [[phi*I, I], [I, X]], forcing P = inv(X) <= phi*I.

    The objective minimizes phi, which enlarges the certified ellipsoid.

    Strict inequalities carry the margin ``eps = params.resolve_eps(system)``;
    the remaining blocks are plain semidefinite constraints.
    """
    n, m = system.n, system.m
    if layout.n != n or layout.m != m:
        raise ValueError(
            f"layout built for (n={layout.n}, m={layout.m}) "
            f"but system has (n={n}, m={m})"
        )
    if limits.m != m:
        raise ValueError(
            f"saturation limits have {limits.m} channels, system has {m}"
        )
    eps = params.resolve_eps(system)
    mu = params.mu
    rho = params.rho
    p = layout.total_vars
    x_entries = _sym_entries(n)
    blocks: list[LmiBlock] = []

    # X - eps*I >= 0
    F0 = -eps * np.eye(n)
    coeffs = np.zeros((p, n, n))
    for k, (i, j) in enumerate(x_entries):
        coeffs[layout.x_range.start + k, i, j] = 1.0
        coeffs[layout.x_range.start + k, j, i] = 1.0
    blocks.append(LmiBlock("Xpos", F0, coeffs))

    # S - eps*I >= 0
    F0 = -eps * np.eye(m)
    coeffs = np.zeros((p, m, m))
    for ell in range(m):
        coeffs[layout.s_range.start + ell, ell, ell] = 1.0
    blocks.append(LmiBlock("Spos", F0, coeffs))

    # Vertex stability blocks: -(Lambda_i) - eps*I >= 0, size 2n+m.
    # Row/column partition: [0:n] state coupling, [n:n+m] sector rows,
    # [n+m:2n+m] quadratic-completion rows.
    sz = 2 * n + m
    for vi, B in enumerate(system.vertices, start=1):
        F0 = np.zeros((sz, sz))
        F0[:n, :n] = -(mu / 4.0) * np.eye(n)
        F0[n + m :, n + m :] = mu * np.eye(n)
        F0 -= eps * np.eye(sz)
        coeffs = np.zeros((p, sz, sz))
        # Z entries: -(B E_{lj} + (B E_{lj})^T) top-left, -(B E_{lj}) in
        # the completion coupling.  B E_{lj} has column j equal to B[:, l].
        for ell in range(m):
            col = B[:, ell]
            for j in range(n):
                k = layout.z_range.start + ell * n + j
                C = coeffs[k]
                C[:n, j] -= col
                C[j, :n] -= col
                C[n + m :, j] -= col
                C[j, n + m :] -= col
        # Y entries: -(E_{lj}^T) in the sector coupling (and transpose).
        for ell in range(m):
            for j in range(n):
                k = layout.y_range.start + ell * n + j
                coeffs[k, j, n + ell] -= 1.0
                coeffs[k, n + ell, j] -= 1.0
        # S entries: +B[:, l] in the sector coupling (negated -B S), and
        # +2 on the sector diagonal (negated -2S).
        for ell in range(m):
            k = layout.s_range.start + ell
            C = coeffs[k]
            C[:n, n + ell] += B[:, ell]
            C[n + ell, :n] += B[:, ell]
            C[n + ell, n + ell] += 2.0
        # Qtilde entries: -(E_ij + E_ji) top-left (-E_ii on the diagonal).
        for kk, (i, j) in enumerate(x_entries):
            k = layout.qt_range.start + kk
            coeffs[k, i, j] = -1.0
            coeffs[k, j, i] = -1.0
        blocks.append(LmiBlock(f"Lambda_vertex_{vi}", F0, coeffs))

    # Per-actuator inclusion rows, size n+1.
    for ell in range(m):
        sz = n + 1
        F0 = np.zeros((sz, sz))
        F0[n, n] = float(limits.u_bar[ell]) ** 2
        coeffs = np.zeros((p, sz, sz))
        for k, (i, j) in enumerate(x_entries):
            coeffs[layout.x_range.start + k, i, j] = 1.0
            coeffs[layout.x_range.start + k, j, i] = 1.0
        for j in range(n):
            kz = layout.z_range.start + ell * n + j
            coeffs[kz, j, n] += 1.0
            coeffs[kz, n, j] += 1.0
            ky = layout.y_range.start + ell * n + j
            coeffs[ky, j, n] -= 1.0
            coeffs[ky, n, j] -= 1.0
        blocks.append(LmiBlock(f"inclusion_row_{ell + 1}", F0, coeffs))

    # Decay-floor block [[Qtilde, X], [X, rho*I]] >= 0, size 2n.
    sz = 2 * n
    F0 = np.zeros((sz, sz))
    F0[n:, n:] = rho * np.eye(n)
    coeffs = np.zeros((p, sz, sz))
    for k, (i, j) in enumerate(x_entries):
        kq = layout.qt_range.start + k
        coeffs[kq, i, j] = 1.0
        coeffs[kq, j, i] = 1.0
        kx = layout.x_range.start + k
        for a, b in ([(i, j)] if i == j else [(i, j), (j, i)]):
            coeffs[kx, a, n + b] += 1.0
            coeffs[kx, n + b, a] += 1.0
    blocks.append(LmiBlock("Qmax", F0, coeffs))

    # Flatness block [[phi*I, I], [I, X]] >= 0, size 2n.
    F0 = np.zeros((sz, sz))
    for i in range(n):
        F0[i, n + i] = 1.0
        F0[n + i, i] = 1.0
    coeffs = np.zeros((p, sz, sz))
    for i in range(n):
        coeffs[layout.phi_index, i, i] = 1.0
    for k, (i, j) in enumerate(x_entries):
        kx = layout.x_range.start + k
        coeffs[kx, n + i, n + j] = 1.0
        coeffs[kx, n + j, n + i] = 1.0
    blocks.append(LmiBlock("U0max", F0, coeffs))

    objective = np.zeros(p)
    objective[layout.phi_index] = 1.0
    return LmiProgram(objective=objective, blocks=tuple(blocks), eps_strict=eps)


@dataclass(frozen=True)
class ControllerDesign:
    """Recovered controller gains together with their certificate data.

    ``K`` is the feedback gain applied to the normalized state direction,
    ``L`` the auxiliary sector gain, ``P`` the Lyapunov matrix whose unit
    sublevel set is the certified region, and ``Q`` the decay matrix whose
    smallest eigenvalue floors the convergence rate.
    """

    K: np.ndarray
    L: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    phi: float
    mu: float
    rho: float
    u_bar: SaturationLimits
    system: PolytopicSystem
    block_residuals: tuple[tuple[str, float], ...] = ()
    solution_x: np.ndarray | None = None

    def __post_init__(self):
        for name in ("K", "L", "P", "Q", "solution_x"):
            a = getattr(self, name)
            if a is None:
                continue
            a = np.array(a, dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return self.K.shape[0]

    def lambda_min_Q(self) -> float:
        return float(np.linalg.eigvalsh(self.Q)[0])


def recover_design(
    solution: "SdpSolution",
    layout: DecisionLayout,
    system: PolytopicSystem,
    limits: SaturationLimits,
    params: SynthesisParameters,
    cond_cap: float = COND_CAP_DEFAULT,
) -> ControllerDesign:
    """Extract gains and certificate matrices from a solved program.

    Recovers K = Z inv(X), L = Y inv(X), P = inv(X), and
    Q = inv(X) Qtilde inv(X), symmetrizing the numerical inverse and
    product, then verifies the certificate conditions.

    Raises
    ------
    NoDesignError
        If the solution status is not optimal/feasible.
    IllConditionedError
        If X is numerically too close to singular (condition number above
        ``cond_cap``).
    NumericalFailureError
        If a certificate condition fails at the recovery tolerances.
    """
    if solution.status not in ("optimal", "feasible"):
        raise NoDesignError(
            f"cannot recover a design from status {solution.status!r}",
            report=solution,
        )
    X, _, Z, Y, Qt, phi = layout.unpack(solution.x)
    X = 0.5 * (X + X.T)
    Qt = 0.5 * (Qt + Qt.T)
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > cond_cap:
        raise IllConditionedError(
            f"X has condition number {cond:.3e} (cap {cond_cap:.1e})"
        )
    P = np.linalg.solve(X, np.eye(layout.n))
    P = 0.5 * (P + P.T)
    K = Z @ P
    L = Y @ P
    Q = P @ Qt @ P
    Q = 0.5 * (Q + Q.T)

    design = ControllerDesign(
        K=K,
        L=L,
        P=P,
        Q=Q,
        phi=phi,
        mu=params.mu,
        rho=params.rho,
        u_bar=limits,
        system=system,
        block_residuals=solution.block_residuals,
        solution_x=solution.x,
    )
    _check_certificate(design)
    return design


def _check_certificate(design: ControllerDesign) -> None:
    """Re-derive the certificate inequalities from the recovered matrices."""
    p_min = float(np.linalg.eigvalsh(design.P)[0])
    if p_min <= 0:
        raise NumericalFailureError(f"P is not positive definite (min eig {p_min:.3e})")
    q_min = design.lambda_min_Q()
    if q_min <= 0:
        raise NumericalFailureError(f"Q is not positive definite (min eig {q_min:.3e})")
    floor = 1.0 / design.rho - Q_FLOOR_TOL
    if q_min < floor:
        raise NumericalFailureError(
            f"decay floor violated: lambda_min(Q) = {q_min:.12e} < 1/rho - tol"
        )
    rows = design.K - design.L
    Pinv = np.linalg.solve(design.P, np.eye(design.n))
    Pinv = 0.5 * (Pinv + Pinv.T)
    for ell in range(design.m):
        r = rows[ell]
        bound = float(design.u_bar.u_bar[ell]) ** 2
        val = float(r @ Pinv @ r)
        if val > bound * (1.0 + MARGIN_REL_TOL):
            raise NumericalFailureError(
                f"inclusion bound violated on row {ell + 1}: "
                f"{val:.12e} > {bound:.12e}"
            )
    cap = np.linalg.eigvalsh(design.phi * np.eye(design.n) - design.P)[0]
    if cap < -P_CAP_TOL:
        raise NumericalFailureError(
            f"flatness bound violated: lambda_min(phi*I - P) = {cap:.3e}"
        )
