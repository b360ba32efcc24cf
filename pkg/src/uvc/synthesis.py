"""End-to-end gain design: assemble, solve, recover, certify.

`synthesize` runs one mu/rho pair; `mu_grid_search` sweeps mu (the one
parameter without a convex handle) and keeps the feasible design with the
smallest phi, i.e. the largest certified region.
"""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NoDesignError
from .lmi import ControllerDesign, assemble_program, decision_layout, recover_design
from .sdp import FEASIBLE, OPTIMAL, SdpSolution, SolverSettings, residuals, solve_sdp
from .systems import PolytopicSystem, SaturationLimits, SynthesisParameters

DEFAULT_MU_GRID = tuple(np.logspace(-2.0, 2.0, 16))


def synthesize(
    system: PolytopicSystem,
    limits: SaturationLimits,
    params: SynthesisParameters,
) -> ControllerDesign:
    """Design a certified gain for one (mu, rho) pair.

    The program handed to the solver carries the slight inclusion backoff
    from ``params`` (active input-bound constraints then certify against
    the requested limits with a strictly positive margin); residuals and
    certificate checks always refer to the original limits.

    Returns a `ControllerDesign` whose certificate conditions have been
    re-verified from the recovered matrices; the per-block smallest
    eigenvalues of the solved program are attached as
    ``design.block_residuals``.

    Raises
    ------
    NoDesignError
        If the program is infeasible or the solver could not reach the
        requested accuracy; the solver output rides along as ``report``.
    """
    layout = decision_layout(system.n, system.m)
    program = assemble_program(system, limits, params, layout)
    if params.inclusion_backoff > 0.0:
        shrink = math.sqrt(1.0 - params.inclusion_backoff)
        solve_limits = SaturationLimits(limits.u_bar * shrink)
        solve_program = assemble_program(system, solve_limits, params, layout)
    else:
        solve_program = program
    solution = solve_sdp(solve_program, params.solver)
    if solution.status in (OPTIMAL, FEASIBLE) and solve_program is not program:
        report = residuals(program, solution.x)
        solution = dataclasses.replace(
            solution,
            max_residual=report.max_violation,
            block_residuals=report.entries,
        )
    if solution.status not in (OPTIMAL, FEASIBLE):
        raise NoDesignError(
            f"gain design failed with solver status {solution.status!r} "
            f"(max residual {solution.max_residual:.3e})",
            report=solution,
        )
    return recover_design(solution, layout, system, limits, params)


@dataclass(frozen=True)
class MuGridEntry:
    """Per-mu outcome of a grid search."""

    mu: float
    status: str
    phi: float | None


@dataclass(frozen=True)
class MuGridResult:
    """Winning design plus the per-mu report, in grid order."""

    design: ControllerDesign
    entries: tuple[MuGridEntry, ...]


def _thread_cap(njobs: int) -> int:
    env = os.environ.get("UVC_THREADS", "")
    try:
        cap = int(env)
    except ValueError:
        cap = 0
    if cap <= 0:
        cap = os.cpu_count() or 1
    return max(1, min(cap, njobs))


def mu_grid_search(
    system: PolytopicSystem,
    limits: SaturationLimits,
    rho: float,
    mu_grid=DEFAULT_MU_GRID,
    settings: SolverSettings | None = None,
) -> MuGridResult:
    """Solve one design program per mu and keep the best feasible one.

    Grid points are independent and solved concurrently (the ``UVC_THREADS``
    environment variable caps the worker count); results are merged
    deterministically in grid order.  The winner minimizes phi, with ties
    broken in favor of the smaller mu.

    Raises
    ------
    NoDesignError
        If every grid point is infeasible; the per-mu report rides along.
    """
    grid = [float(mu) for mu in mu_grid]
    if not grid:
        raise ValueError("mu_grid must be non-empty")
    if settings is None:
        settings = SolverSettings()

    def run(mu: float):
        params = SynthesisParameters(mu=mu, rho=rho, solver=settings)
        try:
            design = synthesize(system, limits, params)
            return design, "optimal", design.phi
        except NoDesignError as exc:
            report = exc.report
            status = report.status if isinstance(report, SdpSolution) else "infeasible"
            return None, status, None

    with ThreadPoolExecutor(max_workers=_thread_cap(len(grid))) as pool:
        results = list(pool.map(run, grid))

    entries = tuple(
        MuGridEntry(mu=mu, status=status, phi=phi)
        for mu, (_, status, phi) in zip(grid, results)
    )
    best = None
    best_key = None
    for mu, (design, _, phi) in zip(grid, results):
        if design is None:
            continue
        key = (phi, mu)
        if best_key is None or key < best_key:
            best = design
            best_key = key
    if best is None:
        raise NoDesignError(
            "no feasible design on the mu grid "
            f"({', '.join(f'{e.mu:g}:{e.status}' for e in entries)})",
            report=entries,
        )
    return MuGridResult(design=best, entries=entries)
