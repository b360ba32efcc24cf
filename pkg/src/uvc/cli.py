"""Command-line front end: synthesis, simulation, region export, verification.

Design files are self-describing JSON documents carrying the full problem
echo (vertices, limits, mu, rho, strictness margin, solver settings) plus
the recovered matrices and the raw solver point, so every check can be
replayed without re-synthesis.  Matrix payloads are row-major nested
lists; floats survive the JSON round trip exactly.

Exit codes: 0 success, 1 infeasible/no design, 2 invalid input,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import models
from .analysis import boundary_directions, inclusion_margins, omega_boundary
from .errors import IllConditionedError, NoDesignError, NumericalFailureError
from .lmi import (
    ControllerDesign,
    MARGIN_REL_TOL,
    Q_FLOOR_TOL,
    assemble_program,
    decision_layout,
)
from .sdp import SolverSettings, residuals
from .simulation import IntegratorSettings, batch_verify, simulate
from .synthesis import DEFAULT_MU_GRID, mu_grid_search, synthesize
from .systems import (
    PolytopicSystem,
    SaturationLimits,
    SimplexWeights,
    SynthesisParameters,
)

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_NO_DESIGN = 1
EXIT_BAD_INPUT = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------- persistence

def _system_to_json(system: PolytopicSystem) -> dict:
    return {
        "n": system.n,
        "m": system.m,
        "vertices": [v.tolist() for v in system.vertices],
    }


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ValueError(f"{context}: missing required key {key!r}")
    return mapping[key]


def system_from_config(entry: dict) -> PolytopicSystem:
    """Build the vertex polytope from a config ``system`` object."""
    if not isinstance(entry, dict):
        raise ValueError("config: 'system' must be an object")
    if "model" in entry:
        name = entry["model"]
        kwargs = {k: v for k, v in entry.items() if k != "model"}
        if name == "manipulator":
            return models.manipulator_polytope(
                phi_bar=float(_require(entry, "phi_bar", "manipulator model")),
                delta_bar=float(_require(entry, "delta_bar", "manipulator model")),
            )
        if name == "rov":
            allowed = {"m0", "Iz", "psi1", "psi2", "g_lo", "g_hi"}
            bad = set(kwargs) - allowed
            if bad:
                raise ValueError(f"rov model: unknown parameters {sorted(bad)}")
            return models.rov_polytope(**{k: float(v) for k, v in kwargs.items()})
        raise ValueError(f"config: unknown model {name!r}")
    vertices = _require(entry, "vertices", "config system")
    system = PolytopicSystem([np.asarray(v, dtype=float) for v in vertices])
    for key in ("n", "m"):
        if key in entry and int(entry[key]) != getattr(system, key):
            raise ValueError(
                f"config system: declared {key}={entry[key]} does not match "
                f"vertex shape {getattr(system, key)}"
            )
    return system


def _solver_from_config(cfg: dict) -> tuple[SolverSettings, float | None]:
    solver_cfg = cfg.get("solver", {})
    if not isinstance(solver_cfg, dict):
        raise ValueError("config: 'solver' must be an object")
    eps_strict = solver_cfg.get("eps_strict")
    kwargs = {}
    if "tol" in solver_cfg:
        kwargs["tol"] = float(solver_cfg["tol"])
    if "max_iterations" in solver_cfg:
        kwargs["max_iterations"] = int(solver_cfg["max_iterations"])
    return SolverSettings(**kwargs), (None if eps_strict is None else float(eps_strict))


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config root must be an object")
    return cfg


def _limits_from_config(cfg: dict, m: int) -> SaturationLimits:
    u_bar = _require(cfg, "u_bar", "config")
    if np.isscalar(u_bar):
        u_bar = [float(u_bar)] * m
    return SaturationLimits(u_bar)


def save_design(path: str, design: ControllerDesign, solution_x,
                settings: SolverSettings, eps_strict: float,
                seed: int | None = None) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "uvc-design",
        "system": _system_to_json(design.system),
        "u_bar": design.u_bar.u_bar.tolist(),
        "mu": design.mu,
        "rho": design.rho,
        "eps_strict": eps_strict,
        "solver": {"tol": settings.tol, "max_iterations": settings.max_iterations},
        "seed": seed,
        "phi": design.phi,
        "K": design.K.tolist(),
        "L": design.L.tolist(),
        "P": design.P.tolist(),
        "Q": design.Q.tolist(),
        "solution_x": list(np.asarray(solution_x, dtype=float)),
        "block_residuals": {label: lam for label, lam in design.block_residuals},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_design(path: str):
    """Read a design document; returns (design, params, solution_x, seed)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("kind") != "uvc-design":
        raise ValueError(f"{path}: not a design document")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format_version {doc.get('format_version')!r}"
        )
    system = system_from_config(_require(doc, "system", path))
    limits = SaturationLimits(_require(doc, "u_bar", path))
    solver_cfg = doc.get("solver", {})
    settings = SolverSettings(
        tol=float(solver_cfg.get("tol", 1e-8)),
        max_iterations=int(solver_cfg.get("max_iterations", 200)),
    )
    params = SynthesisParameters(
        mu=float(_require(doc, "mu", path)),
        rho=float(_require(doc, "rho", path)),
        eps_strict=float(_require(doc, "eps_strict", path)),
        solver=settings,
    )
    residual_pairs = tuple(
        (str(k), float(v)) for k, v in doc.get("block_residuals", {}).items()
    )
    design = ControllerDesign(
        K=np.asarray(doc["K"], dtype=float),
        L=np.asarray(doc["L"], dtype=float),
        P=np.asarray(doc["P"], dtype=float),
        Q=np.asarray(doc["Q"], dtype=float),
        phi=float(doc["phi"]),
        mu=params.mu,
        rho=params.rho,
        u_bar=limits,
        system=system,
        block_residuals=residual_pairs,
    )
    solution_x = np.asarray(_require(doc, "solution_x", path), dtype=float)
    return design, params, solution_x, doc.get("seed")


# ------------------------------------------------------------------ helpers

def _parse_vector(text: str, name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValueError(f"{name}: expected comma-separated floats, got {text!r}") from exc


def _parse_mu_grid(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"--mu-grid expects lo:hi:count, got {text!r}")
    lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    if not (0 < lo <= hi) or count < 1:
        raise ValueError("--mu-grid needs 0 < lo <= hi and count >= 1")
    if count == 1:
        return [lo]
    return list(np.logspace(np.log10(lo), np.log10(hi), count))


def _random_simplex(rng: np.random.Generator, size: int) -> SimplexWeights:
    draw = rng.standard_exponential(size)
    return SimplexWeights(draw / draw.sum())


def _spawned_rngs(seed: int, count: int):
    seq = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(count)]


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


# ------------------------------------------------------------------ commands

def _cmd_synth(args) -> int:
    cfg = load_config(args.config)
    system = system_from_config(_require(cfg, "system", "config"))
    limits = _limits_from_config(cfg, system.m)
    rho = float(_require(cfg, "rho", "config"))
    settings, eps_strict = _solver_from_config(cfg)
    seed = cfg.get("seed")

    mu_values = None
    if args.mu is not None:
        mu_values = [args.mu]
    elif args.mu_grid is not None:
        mu_values = _parse_mu_grid(args.mu_grid)
    elif "mu" in cfg:
        mu_values = [float(cfg["mu"])]

    def make_params(mu):
        return SynthesisParameters(
            mu=mu, rho=rho, eps_strict=eps_strict, solver=settings
        )

    if mu_values is not None and len(mu_values) == 1:
        design = synthesize(system, limits, make_params(mu_values[0]))
    else:
        grid = mu_values if mu_values is not None else list(DEFAULT_MU_GRID)
        result = mu_grid_search(system, limits, rho, grid, settings)
        for entry in result.entries:
            phi = "-" if entry.phi is None else f"{entry.phi:.6g}"
            print(f"mu {entry.mu:<12.6g} {entry.status:<16} phi {phi}")
        design = result.design

    worst = max(0.0, -min(v for _, v in design.block_residuals))
    print(f"feasible design: mu {design.mu:g}, rho {design.rho:g}")
    print(f"  phi                {design.phi:.9g}")
    print(f"  |K|_2              {np.linalg.norm(design.K, 2):.6g}")
    print(f"  lambda_min(Q)      {design.lambda_min_Q():.9g}")
    print(f"  worst residual     {worst:.3e}")
    print(f"  inclusion margins  {np.array2string(inclusion_margins(design, limits), precision=6)}")
    if args.out:
        eps = make_params(design.mu).resolve_eps(system)
        save_design(args.out, design, design.solution_x, settings, eps, seed)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_sim(args) -> int:
    design, params, _, seed = load_design(args.design)
    system = design.system
    x0 = _parse_vector(args.x0, "--x0")
    if x0.shape != (system.n,):
        raise ValueError(f"--x0 must have {system.n} entries")
    if args.alpha is not None:
        alpha = _parse_vector(args.alpha, "--alpha")
        weights = [SimplexWeights(alpha)]
    elif args.random_alpha is not None:
        use_seed = args.seed if args.seed is not None else (seed or 0)
        rngs = _spawned_rngs(int(use_seed), args.random_alpha)
        weights = [_random_simplex(rng, system.num_vertices) for rng in rngs]
    else:
        vertex = args.vertex if args.vertex is not None else 1
        if not (1 <= vertex <= system.num_vertices):
            raise ValueError(
                f"--vertex must lie in 1..{system.num_vertices}, got {vertex}"
            )
        alpha = np.zeros(system.num_vertices)
        alpha[vertex - 1] = 1.0
        weights = [SimplexWeights(alpha)]

    settings = IntegratorSettings(
        step=args.step, t_max=args.tmax, record_stride=args.stride
    )
    from .simulation import blend_vertices

    for idx, w in enumerate(weights):
        B = blend_vertices(system, w)
        traj = simulate(B, design.K, design.u_bar, x0, settings, P=design.P)
        reach = "none" if traj.reach_time is None else f"{traj.reach_time:.6g} s"
        print(f"case {idx}: reach_time {reach}, samples {len(traj.times)}")
        if args.out:
            path = args.out if len(weights) == 1 else _indexed_path(args.out, idx)
            header = (
                ["t"]
                + [f"sigma_{i+1}" for i in range(system.n)]
                + [f"u_{i+1}" for i in range(system.m)]
                + [f"sat_u_{i+1}" for i in range(system.m)]
                + ["V"]
            )
            rows = [
                [_fmt(traj.times[k])]
                + [_fmt(v) for v in traj.states[k]]
                + [_fmt(v) for v in traj.inputs[k]]
                + [_fmt(v) for v in traj.sat_inputs[k]]
                + [_fmt(traj.lyapunov[k])]
                for k in range(len(traj.times))
            ]
            _write_csv(path, header, rows)
            print(f"wrote {path}")
    return EXIT_OK


def _indexed_path(path: str, idx: int) -> str:
    if idx == 0:
        return path
    if "." in path.rsplit("/", 1)[-1]:
        stem, ext = path.rsplit(".", 1)
        return f"{stem}_{idx}.{ext}"
    return f"{path}_{idx}"


def _cmd_region(args) -> int:
    design, _, _, _ = load_design(args.design)
    dirs = boundary_directions(design.n, args.samples)
    sample = omega_boundary(design, dirs)
    header = [f"dir_{i+1}" for i in range(design.n)] + ["omega_radius", "du_admissible"]
    cap = None
    if args.with_du_radius:
        cap = args.du_radius_cap * float(np.max(sample.omega_radius))
        header.append("du_radius")
    rows = []
    for k in range(len(dirs)):
        row = [_fmt(v) for v in sample.directions[k]]
        row.append(_fmt(sample.omega_radius[k]))
        row.append(str(bool(sample.du_admissible[k])).lower())
        if cap is not None:
            row.append(_fmt(cap if sample.du_admissible[k] else 0.0))
        rows.append(row)
    if args.out:
        _write_csv(args.out, header, rows)
        print(f"wrote {args.out} ({len(rows)} directions)")
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(row))
    return EXIT_OK


def _cmd_verify(args) -> int:
    design, params, solution_x, stored_seed = load_design(args.design)
    system, limits = design.system, design.u_bar
    layout = decision_layout(system.n, system.m)
    program = assemble_program(system, limits, params, layout)
    tol = params.solver.tol

    checks = []

    report = residuals(program, solution_x)
    checks.append(("lmi_residuals_max", report.max_violation, f"<= {tol:g}",
                   report.max_violation <= tol))

    X, _, Z, Y, Qt, phi = layout.unpack(solution_x)
    P = np.linalg.solve(0.5 * (X + X.T), np.eye(system.n))
    ok_gain = bool(
        np.allclose(design.K, Z @ P, rtol=1e-9, atol=1e-12)
        and np.allclose(design.L, Y @ P, rtol=1e-9, atol=1e-12)
    )
    checks.append(("gain_consistency", float(np.abs(design.K - Z @ P).max()),
                   "K = Z inv(X)", ok_gain))

    q_floor = design.lambda_min_Q() - (1.0 / design.rho - Q_FLOOR_TOL)
    checks.append(("decay_floor", design.lambda_min_Q(),
                   f">= {1.0 / design.rho:g} - {Q_FLOOR_TOL:g}", q_floor >= 0))

    margins = inclusion_margins(design, limits)
    margin_floor = -MARGIN_REL_TOL * float(np.max(limits.u_bar**2))
    checks.append(("inclusion_margins_min", float(margins.min()),
                   f">= {margin_floor:.3g}", bool(margins.min() >= margin_floor)))

    cap = float(np.linalg.eigvalsh(design.phi * np.eye(design.n) - design.P)[0])
    checks.append(("flatness_bound", cap, ">= -1e-8", cap >= -1e-8))

    bpoints = args.boundary_points
    dirs = boundary_directions(design.n, bpoints)
    sample = omega_boundary(design, dirs)
    points = sample.directions * sample.omega_radius[:, None]
    weights = [
        SimplexWeights(np.eye(system.num_vertices)[i])
        for i in range(system.num_vertices)
    ]
    seed = args.seed if args.seed is not None else (stored_seed or 0)
    if args.random_alpha > 0:
        rngs = _spawned_rngs(int(seed), args.random_alpha)
        weights += [_random_simplex(rng, system.num_vertices) for rng in rngs]
    sim_settings = IntegratorSettings(
        step=args.step,
        t_max=design.rho * 1.2,
        record_stride=max(1, int(round(1e-3 / args.step))),
    )
    batch = batch_verify(design, system, points, weights, sim_settings)
    reach_cap = design.rho * 1.05
    checks.append(("boundary_max_reach", batch.max_reach_time,
                   f"<= {reach_cap:g}", batch.max_reach_time <= reach_cap))
    checks.append(("lyapunov_violations", float(batch.total_lyapunov_violations),
                   "== 0", batch.total_lyapunov_violations == 0))

    width = max(len(name) for name, *_ in checks)
    all_ok = True
    for name, value, bound, ok in checks:
        status = "PASS" if ok else "FAIL"
        all_ok &= ok
        print(f"{name:<{width}}  {value: .6e}  {bound:<22} {status}")
    print(f"verify: {'all checks passed' if all_ok else 'FAILURES detected'} "
          f"({len(points)} boundary points x {len(weights)} weights, seed {seed})")
    return EXIT_OK if all_ok else EXIT_NO_DESIGN


def _cmd_models(args) -> int:
    if args.action == "list":
        print("manipulator  params: phi_bar (rad), delta_bar (rad in [0, pi/2])")
        print("rov          params: m0 (kg), Iz (kg*m^2), psi1, psi2 (m), g_lo, g_hi")
        return EXIT_OK
    params = {}
    for item in args.params or []:
        if "=" not in item:
            raise ValueError(f"--params entries must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        params[key.strip()] = float(value)
    if args.name == "manipulator":
        system = models.manipulator_polytope(
            phi_bar=params.pop("phi_bar", 0.0),
            delta_bar=params.pop("delta_bar", 0.0),
        )
    elif args.name == "rov":
        system = models.rov_polytope(**params)
        params = {}
    else:
        raise ValueError(f"unknown model {args.name!r}")
    if params:
        raise ValueError(f"unknown parameters {sorted(params)}")
    doc = {"system": _system_to_json(system)}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    print(f"wrote {args.out}")
    return EXIT_OK


# -------------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uvc",
        description="Design and verify direction-normalized feedback gains "
        "for polytopic systems with saturating actuators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="solve the gain-design program")
    p.add_argument("--config", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--mu", type=float)
    group.add_argument("--mu-grid", help="lo:hi:count, logarithmic spacing")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sim", help="integrate the saturated closed loop")
    p.add_argument("--design", required=True)
    p.add_argument("--x0", required=True, help="comma-separated initial state")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--alpha", help="comma-separated vertex weights")
    group.add_argument("--vertex", type=int, help="1-based vertex index")
    group.add_argument("--random-alpha", type=int, metavar="COUNT")
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--tmax", type=float, default=10.0)
    p.add_argument("--stride", type=int, default=10)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="trajectory CSV path")
    p.set_defaults(func=_cmd_sim)

    p = sub.add_parser("region", help="export region boundary samples")
    p.add_argument("--design", required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--with-du-radius", action="store_true")
    p.add_argument("--du-radius-cap", type=float, default=10.0)
    p.set_defaults(func=_cmd_region)

    p = sub.add_parser("verify", help="replay all certificate checks")
    p.add_argument("--design", required=True)
    p.add_argument("--boundary-points", type=int, default=64)
    p.add_argument("--random-alpha", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-4)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("models", help="list or emit example systems")
    p.add_argument("action", choices=["list", "emit"])
    p.add_argument("--name", choices=["manipulator", "rov"])
    p.add_argument("--params", nargs="*")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_models)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    try:
        if args.command == "models" and args.action == "emit":
            if not args.name or not args.out:
                raise ValueError("models emit requires --name and --out")
        return args.func(args)
    except NoDesignError as exc:
        print(f"no design: {exc}", file=sys.stderr)
        _print_report(exc.report)
        return EXIT_NO_DESIGN
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (IllConditionedError, NumericalFailureError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def _print_report(report) -> None:
    if report is None:
        return
    entries = getattr(report, "block_residuals", None)
    if entries:
        print("block residuals (smallest eigenvalue):", file=sys.stderr)
        for label, lam in entries:
            print(f"  {label:<20} {lam: .3e}", file=sys.stderr)
    grid = getattr(report, "__iter__", None)
    if grid and not entries:
        for entry in report:
            print(f"  mu {entry.mu:g}: {entry.status}", file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
