"""Dense primal-dual interior-point solver for block-diagonal LMI programs.

Solves

    minimize    c' x
    subject to  F0_b + sum_k x_k Fk_b  >=  0   (one PSD block per b)

with a Nesterov-Todd scaled Mehrotra predictor-corrector iteration.  The
dual problem is max -<F0, Y> s.t. <Fk, Y> = c_k, Y >= 0, and the method
tracks (x, S, Y) with S the block slack F(x) - S -> 0.

Problem data are conditioned in two deterministic, exactly-invertible
ways before iterating:

- each block is divided by a power-of-two close to its largest coefficient
  Frobenius norm;
- each variable column is rescaled by a power of two equalizing its
  stacked coefficient norm (undone on output without rounding error).

The solver is meant for desk-scale problems (tens of variables, blocks up
to a few tens of rows); everything is dense and single-threaded, and the
iteration is bit-reproducible for fixed inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lmi import LmiProgram

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverSettings:
    """Iteration controls for `solve_sdp`.

    ``tol`` bounds three relative convergence measures at once: the primal
    residual per block (normalized by the block data norm), the dual
    residual (normalized by the objective and dual-iterate magnitudes, as
    in standard conic solvers), and the complementarity gap (normalized
    by the objective values).  A returned optimal/feasible status
    additionally guarantees that every block evaluates to smallest
    eigenvalue >= -tol in the original problem units.

    ``deterministic`` is accepted for interface compatibility; the
    implementation contains no randomness, so runs are always
    bit-reproducible.
    """

    tol: float = 1e-8
    max_iterations: int = 200
    step_fraction: float = 0.98
    min_step: float = 1e-10
    infeasibility_ray_threshold: float = 1e8
    deterministic: bool = True
    verbose: bool = False

    def __post_init__(self):
        if not (self.tol > 0):
            raise ValueError("tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (0 < self.step_fraction < 1):
            raise ValueError("step_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class SdpSolution:
    """Solver output: status, point, and feasibility diagnostics."""

    status: str
    x: np.ndarray
    objective_value: float
    iterations: int
    max_residual: float
    block_residuals: tuple[tuple[str, float], ...]
    certificate: dict | None = None
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ResidualReport:
    """Per-block smallest eigenvalue of the affine evaluation at a point."""

    entries: tuple[tuple[str, float], ...]

    @property
    def max_violation(self) -> float:
        if not self.entries:
            return 0.0
        return max(0.0, -min(v for _, v in self.entries))

    def by_label(self) -> dict[str, float]:
        return dict(self.entries)


def residuals(program: LmiProgram, x) -> ResidualReport:
    """Evaluate every block at ``x`` and report its smallest eigenvalue."""
    x = np.asarray(x, dtype=float)
    if x.shape != (program.num_vars,):
        raise ValueError(
            f"point has shape {x.shape}, expected ({program.num_vars},)"
        )
    entries = []
    for b in program.blocks:
        E = b.evaluate(x)
        E = 0.5 * (E + E.T)
        entries.append((b.label, float(np.linalg.eigvalsh(E)[0])))
    return ResidualReport(entries=tuple(entries))


def _pow2_near(v: float) -> float:
    if v <= 0 or not math.isfinite(v):
        return 1.0
    return 2.0 ** round(math.log2(v))


def _step_to_boundary(M: np.ndarray, dM: np.ndarray) -> float:
    """Largest a with M + a*dM >= 0, for M > 0 (np.inf when unconstrained)."""
    L = np.linalg.cholesky(M)
    W = scipy.linalg.solve_triangular(L, dM, lower=True)
    W = scipy.linalg.solve_triangular(L, W.T, lower=True)
    lam = float(np.linalg.eigvalsh(0.5 * (W + W.T))[0])
    if lam >= 0.0:
        return np.inf
    return -1.0 / lam


def solve_sdp(program: LmiProgram, settings: SolverSettings | None = None) -> SdpSolution:
    """Solve a block LMI program to the requested tolerance.

    Returns a solution whose status is ``optimal`` (or ``feasible`` for a
    zero objective) only when the scaled primal/dual residuals and the
    relative complementarity gap are all below ``settings.tol`` *and* the
    smallest eigenvalue of every block, evaluated at the returned point in
    the original problem units, is above ``-settings.tol``.

    An ``infeasible`` status carries an approximate improving-ray
    certificate: a normalized dual matrix that is orthogonal to every
    coefficient matrix but has negative inner product with the constant
    terms.

    Raises
    ------
    ValueError
        If the program is malformed (shape mismatches).
    """
    if settings is None:
        settings = SolverSettings()
    p = program.num_vars
    if p == 0:
        raise ValueError("program has no decision variables")
    if not program.blocks:
        raise ValueError("program has no constraint blocks")
    tol = settings.tol

    # Power-of-two block scaling and variable equilibration.
    block_scale = []
    F0s = []
    for b in program.blocks:
        norm = max(
            float(np.linalg.norm(b.F0)),
            float(np.max(np.linalg.norm(b.coeffs, axis=(1, 2)))),
        )
        s = _pow2_near(norm)
        block_scale.append(s)
        F0s.append(b.F0 / s)
    col_sq = np.zeros(p)
    pre = []
    for b, s in zip(program.blocks, block_scale):
        C = b.coeffs / s
        pre.append(C)
        col_sq += np.sum(C * C, axis=(1, 2))
    d = np.array([1.0 / _pow2_near(math.sqrt(v)) if v > 0 else 1.0 for v in col_sq])
    coeffs = [C * d[:, None, None] for C in pre]
    flat = [C.reshape(p, -1) for C in coeffs]
    c_eq = program.objective * d
    czero = not np.any(program.objective)
    c_norm = float(np.linalg.norm(c_eq))

    sizes = [b.size for b in program.blocks]
    nb = len(sizes)
    nu = float(sum(sizes))
    x = np.zeros(p)
    S = [np.eye(sz) for sz in sizes]
    Yd = [np.eye(sz) for sz in sizes]

    status = MAX_ITERATIONS
    certificate = None
    info: dict = {}
    iterations = 0

    def true_report():
        return residuals(program, d * x)

    for it in range(settings.max_iterations):
        iterations = it
        Fx = [F0s[b] + np.tensordot(x, coeffs[b], axes=1) for b in range(nb)]
        Rp = [Fx[b] - S[b] for b in range(nb)]
        rd = c_eq - np.sum(
            [flat[b] @ Yd[b].reshape(-1) for b in range(nb)], axis=0
        )
        gap = float(sum(np.sum(S[b] * Yd[b]) for b in range(nb)))
        pobj = float(c_eq @ x)
        dobj = -float(sum(np.sum(F0s[b] * Yd[b]) for b in range(nb)))
        pres = max(
            float(np.linalg.norm(Rp[b])) / (1.0 + float(np.linalg.norm(F0s[b])))
            for b in range(nb)
        )
        y_norm = float(sum(np.linalg.norm(Yd[b]) for b in range(nb)))
        dres = float(np.linalg.norm(rd)) / (1.0 + c_norm + y_norm)
        relgap = gap / max(1.0, abs(pobj), abs(dobj))
        info = {
            "primal_residual": pres,
            "dual_residual": dres,
            "relative_gap": relgap,
            "primal_objective": pobj,
            "dual_objective": dobj,
        }

        if settings.verbose:
            print(
                f"iter {it:3d}: pres {pres:9.2e} dres {dres:9.2e} "
                f"relgap {relgap:9.2e} pobj {pobj:+.6e}"
            )
        if not all(np.all(np.isfinite(M)) for M in S + Yd) or not np.all(
            np.isfinite(x)
        ):
            status = NUMERICAL_FAILURE
            break

        if pres <= tol and dres <= tol and relgap <= tol:
            if true_report().max_violation <= tol:
                status = FEASIBLE if czero else OPTIMAL
                break
        if czero and pres <= tol and true_report().max_violation <= tol:
            status = FEASIBLE
            break

        # Improving-ray test: a large dual iterate that is nearly
        # orthogonal to all coefficients with <F0, Y> < 0 certifies that
        # no x can satisfy the constraints.
        trY = float(sum(np.trace(Yd[b]) for b in range(nb)))
        if trY > settings.infeasibility_ray_threshold * nu:
            a_y = np.sum([flat[b] @ Yd[b].reshape(-1) for b in range(nb)], axis=0)
            orth = float(np.max(np.abs(a_y))) / trY
            negv = float(sum(np.sum(F0s[b] * Yd[b]) for b in range(nb))) / trY
            if negv < -1e-12 and orth <= 1e-6 * (-negv):
                status = INFEASIBLE
                certificate = {
                    "ray_objective": negv,
                    "ray_orthogonality": orth,
                    "ray_trace": trY,
                }
                break

        # Nesterov-Todd scaling point per block.
        try:
            Rinv = []
            lam = []
            for b in range(nb):
                L1 = np.linalg.cholesky(S[b])
                L2 = np.linalg.cholesky(Yd[b])
                U, sv, _ = np.linalg.svd(L2.T @ L1)
                if sv[-1] <= 0 or not np.all(np.isfinite(sv)):
                    raise np.linalg.LinAlgError("degenerate scaling")
                lam.append(sv)
                Rinv.append((U / np.sqrt(sv)).T @ L2.T)
        except np.linalg.LinAlgError:
            status = NUMERICAL_FAILURE
            break

        G = [Rinv[b] @ coeffs[b] @ Rinv[b].T for b in range(nb)]
        Gflat = [Gb.reshape(p, -1) for Gb in G]
        Rp_sc = [Rinv[b] @ Rp[b] @ Rinv[b].T for b in range(nb)]
        # Newton systems are solved through a QR factorization of the
        # stacked scaled coefficients J (the Schur matrix is J'J); working
        # with the square root halves the condition number exponent.
        J = np.concatenate([Gf.T for Gf in Gflat], axis=0)
        Qj, Rj = np.linalg.qr(J)
        rdiag = np.abs(np.diag(Rj))
        if not np.all(np.isfinite(rdiag)) or np.min(rdiag) <= 1e-14 * np.max(rdiag):
            status = NUMERICAL_FAILURE
            break

        lam_den = [
            0.5 * (lam[b][:, None] + lam[b][None, :]) for b in range(nb)
        ]

        def direction(D):
            """Newton direction for complementarity target D (scaled space)."""
            Xi = []
            v = np.empty(J.shape[0])
            pos = 0
            for b in range(nb):
                Xib = D[b] / lam_den[b]
                Xi.append(Xib)
                sz2 = sizes[b] * sizes[b]
                v[pos : pos + sz2] = (Xib - Rp_sc[b]).reshape(-1)
                pos += sz2
            # Solve (J'J) dx = J'v - rd via the triangular factor.
            w = scipy.linalg.solve_triangular(Rj.T, rd, lower=True)
            dx = scipy.linalg.solve_triangular(Rj, Qj.T @ v - w, lower=False)
            dS = []
            dY = []
            A_sc = []
            B_sc = []
            for b in range(nb):
                dSb = np.tensordot(dx, coeffs[b], axes=1) + Rp[b]
                Ab = np.tensordot(dx, G[b], axes=1) + Rp_sc[b]
                Bb = Xi[b] - Ab
                dYb = Rinv[b].T @ Bb @ Rinv[b]
                dS.append(0.5 * (dSb + dSb.T))
                dY.append(0.5 * (dYb + dYb.T))
                A_sc.append(Ab)
                B_sc.append(Bb)
            return dx, dS, dY, A_sc, B_sc

        # Predictor: drive complementarity toward zero.
        D_aff = [-np.diag(lam[b] * lam[b]) for b in range(nb)]
        _, dS_a, dY_a, A_a, B_a = direction(D_aff)
        ap_max = min(_step_to_boundary(S[b], dS_a[b]) for b in range(nb))
        ad_max = min(_step_to_boundary(Yd[b], dY_a[b]) for b in range(nb))
        ap_a = min(1.0, ap_max)
        ad_a = min(1.0, ad_max)
        gap_aff = float(
            sum(
                np.sum((S[b] + ap_a * dS_a[b]) * (Yd[b] + ad_a * dY_a[b]))
                for b in range(nb)
            )
        )
        sigma = 0.0 if gap <= 0 else min(1.0, max(0.0, (gap_aff / gap)) ** 3)
        mu_target = sigma * gap / nu

        # Corrector with Mehrotra second-order term.
        D_cc = []
        for b in range(nb):
            AB = A_a[b] @ B_a[b]
            D_cc.append(
                mu_target * np.eye(sizes[b])
                - np.diag(lam[b] * lam[b])
                - 0.5 * (AB + AB.T)
            )
        dx, dS, dY, _, _ = direction(D_cc)
        ap = min(_step_to_boundary(S[b], dS[b]) for b in range(nb))
        ad = min(_step_to_boundary(Yd[b], dY[b]) for b in range(nb))
        ap = min(1.0, settings.step_fraction * ap)
        ad = min(1.0, settings.step_fraction * ad)
        if max(ap, ad) < settings.min_step:
            status = NUMERICAL_FAILURE
            break
        x = x + ap * dx
        for b in range(nb):
            S[b] = 0.5 * ((S[b] + ap * dS[b]) + (S[b] + ap * dS[b]).T)
            Yd[b] = 0.5 * ((Yd[b] + ad * dY[b]) + (Yd[b] + ad * dY[b]).T)
    else:
        iterations = settings.max_iterations

    x_out = d * x
    report = residuals(program, x_out)
    return SdpSolution(
        status=status,
        x=x_out,
        objective_value=float(program.objective @ x_out),
        iterations=iterations,
        max_residual=report.max_violation,
        block_residuals=report.entries,
        certificate=certificate,
        info=info,
    )
