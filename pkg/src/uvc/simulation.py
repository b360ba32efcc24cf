"""Closed-loop integration of the saturated direction-normalized feedback.

The vector field B sat(K s/|s|) is smooth away from the origin and
discontinuous only there, so a fixed-step classical Runge-Kutta scheme is
used and integration stops once the state enters a small ball around the
origin; the crossing time is refined by linear interpolation of |s(t)|
across the final step.  No regularization of the discontinuity is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalFailureError
from .lmi import ControllerDesign
from .systems import PolytopicSystem, SaturationLimits, SimplexWeights

LYAP_INCREASE_TOL = 1e-6
_NORM_FLOOR = 1e-300


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step integration controls.

    Reach detection tests both the endpoint norm and the first-stage
    chord of every step against ``delta_stop``.  The terminal approach is
    resolved at the scale of one step displacement, so the step size
    should be chosen with ``step * field_speed`` not too many orders of
    magnitude above ``delta_stop``; otherwise detection can lag by the
    time the state needs to wander into the stop ball.
    """

    step: float = 1e-4
    t_max: float = 10.0
    delta_stop: float = 1e-5
    record_stride: int = 1

    def __post_init__(self):
        if not (self.step > 0):
            raise ValueError("step must be positive")
        if not (self.t_max > self.step):
            raise ValueError("t_max must exceed the step size")
        if not (self.delta_stop > 0):
            raise ValueError("delta_stop must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled closed-loop record.

    ``inputs`` holds the raw feedback K s/|s| at the recorded states and
    ``sat_inputs`` its clamped version; ``lyapunov`` is present only when
    a Lyapunov matrix was supplied to the integrator.  ``reach_time`` is
    the interpolated first time |s| fell below the stop radius, or None
    if the horizon ended first.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    sat_inputs: np.ndarray
    lyapunov: np.ndarray | None
    reach_time: float | None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or (t.size > 1 and np.any(np.diff(t) <= 0)):
            raise ValueError("times must be strictly increasing")
        lengths = {len(t), len(self.states), len(self.inputs), len(self.sat_inputs)}
        if self.lyapunov is not None:
            lengths.add(len(self.lyapunov))
        if len(lengths) != 1:
            raise ValueError("trajectory arrays must have equal length")
        for name in ("times", "states", "inputs", "sat_inputs", "lyapunov"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def saturate(u, limits: SaturationLimits) -> np.ndarray:
    """Componentwise clamp to the symmetric actuator limits."""
    return np.clip(np.asarray(u, dtype=float), -limits.u_bar, limits.u_bar)


def dead_zone(u, limits: SaturationLimits) -> np.ndarray:
    """Excess over the saturation limits: u - sat(u)."""
    u = np.asarray(u, dtype=float)
    return u - saturate(u, limits)


def blend_vertices(system: PolytopicSystem, weights: SimplexWeights) -> np.ndarray:
    """Convex combination of the vertex matrices."""
    if len(weights) != system.num_vertices:
        raise ValueError(
            f"got {len(weights)} weights for {system.num_vertices} vertices"
        )
    stack = np.stack(system.vertices)
    return np.tensordot(weights.alpha, stack, axes=1)


def _unit_rows(states: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(states, axis=-1, keepdims=True)
    return states / np.maximum(norms, _NORM_FLOOR)


def _chord_crossing(sigma, k1, h, delta):
    """First entry of the stop ball along the chord sigma + tau*h*k1.

    Near the origin the averaged stages of a fixed step cancel, so the
    endpoint norm can stagnate above the stop radius while the underlying
    path has already crossed it; testing the first-stage chord catches
    that traversal.  Returns (tau, state) with tau in (0, 1], or None
    when the chord stays outside the ball.
    """
    a = h * h * float(k1 @ k1)
    if a == 0.0:
        return None
    b = 2.0 * h * float(sigma @ k1)
    r_sq = float(sigma @ sigma)
    tau_min = min(1.0, max(0.0, -b / (2.0 * a)))
    dmin_sq = r_sq + b * tau_min + a * tau_min * tau_min
    if dmin_sq > delta * delta:
        return None
    disc = b * b - 4.0 * a * (r_sq - delta * delta)
    tau = (-b - np.sqrt(max(disc, 0.0))) / (2.0 * a) if disc >= 0 else tau_min
    if not (0.0 < tau <= 1.0):
        return None
    return tau, sigma + tau * h * k1


def simulate(
    B,
    K,
    limits: SaturationLimits,
    sigma0,
    settings: IntegratorSettings,
    P=None,
) -> Trajectory:
    """Integrate ds/dt = B sat(K s/|s|) from sigma0 until reach or horizon.

    Parameters
    ----------
    B : array_like
        Input map of shape (n, m), typically one polytope vertex or a
        convex blend.
    K : array_like
        Feedback gain of shape (m, n).
    limits : SaturationLimits
        Actuator amplitude bounds.
    sigma0 : array_like
        Nonzero initial state.
    settings : IntegratorSettings
        Step size, horizon, stop radius, and output decimation.
    P : array_like, optional
        Lyapunov matrix; when given, the trajectory records
        V(s) = s'Ps/|s| alongside the state samples.

    Raises
    ------
    ValueError
        For inconsistent shapes or a zero initial state.
    NumericalFailureError
        If the state leaves the representable range.
    """
    B = np.asarray(B, dtype=float)
    K = np.asarray(K, dtype=float)
    sigma = np.asarray(sigma0, dtype=float).copy()
    n, m = B.shape
    if K.shape != (m, n):
        raise ValueError(f"K has shape {K.shape}, expected ({m}, {n})")
    if limits.m != m:
        raise ValueError(f"limits have {limits.m} channels, expected {m}")
    if sigma.shape != (n,):
        raise ValueError(f"sigma0 has shape {sigma.shape}, expected ({n},)")
    if float(np.linalg.norm(sigma)) == 0.0:
        raise ValueError("sigma0 must be nonzero")
    if P is not None:
        P = np.asarray(P, dtype=float)

    h = settings.step
    delta = settings.delta_stop
    u_lo, u_hi = -limits.u_bar, limits.u_bar

    def field(s):
        norm = np.linalg.norm(s)
        if norm <= _NORM_FLOOR:
            return np.zeros(n)
        return B @ np.clip(K @ (s / norm), u_lo, u_hi)

    rec_t = [0.0]
    rec_s = [sigma.copy()]
    reach_time = None

    if float(np.linalg.norm(sigma)) <= delta:
        reach_time = 0.0
    else:
        nsteps = int(np.ceil(settings.t_max / h))
        for i in range(nsteps):
            t = i * h
            k1 = field(sigma)
            # Origin-traversal guard: when the first-stage chord of the
            # step passes within the stop radius, the continuous path has
            # reached even though the endpoint norm may stagnate above it
            # (the averaged stages cancel across the discontinuity).
            crossing = _chord_crossing(sigma, k1, h, delta)
            if crossing is not None:
                tau, hit = crossing
                sigma = hit
                reach_time = t + tau * h
                rec_t.append(reach_time)
                rec_s.append(sigma.copy())
                break
            k2 = field(sigma + 0.5 * h * k1)
            k3 = field(sigma + 0.5 * h * k2)
            k4 = field(sigma + h * k3)
            new = sigma + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(new)):
                raise NumericalFailureError(
                    f"state became non-finite at t = {t + h:.6g}"
                )
            r_old = float(np.linalg.norm(sigma))
            r_new = float(np.linalg.norm(new))
            sigma = new
            done = r_new <= delta
            if (i + 1) % settings.record_stride == 0 or done or i + 1 == nsteps:
                rec_t.append(t + h)
                rec_s.append(sigma.copy())
            if done:
                reach_time = t + h * (r_old - delta) / (r_old - r_new)
                break

    times = np.array(rec_t)
    states = np.array(rec_s)
    units = _unit_rows(states)
    inputs = units @ K.T
    sat_inputs = np.clip(inputs, u_lo, u_hi)
    lyap = None
    if P is not None:
        norms = np.linalg.norm(states, axis=1)
        quad = np.einsum("kn,nm,km->k", states, P, states)
        lyap = np.where(norms > 0, quad / np.maximum(norms, _NORM_FLOOR), 0.0)
    return Trajectory(
        times=times,
        states=states,
        inputs=inputs,
        sat_inputs=sat_inputs,
        lyapunov=lyap,
        reach_time=reach_time,
    )


@dataclass(frozen=True)
class BatchCase:
    """Outcome of one (initial point, vertex weights) simulation."""

    sigma0: np.ndarray
    alpha: np.ndarray
    reach_time: float | None
    lyapunov_violations: int
    saturation_duty: np.ndarray
    max_saturated_run: np.ndarray
    error: str | None = None


@dataclass(frozen=True)
class BatchReport:
    """Aggregate over all batch cases, reduced in input order."""

    cases: tuple[BatchCase, ...]
    step: float

    @property
    def max_reach_time(self) -> float:
        """Largest reach time; +inf if any case failed or never reached."""
        worst = 0.0
        for c in self.cases:
            if c.error is not None or c.reach_time is None:
                return float("inf")
            worst = max(worst, c.reach_time)
        return worst

    @property
    def total_lyapunov_violations(self) -> int:
        return sum(c.lyapunov_violations for c in self.cases)

    @property
    def worst_saturation_duty(self) -> np.ndarray:
        return np.max(np.stack([c.saturation_duty for c in self.cases]), axis=0)

    @property
    def longest_saturated_run(self) -> np.ndarray:
        return np.max(np.stack([c.max_saturated_run for c in self.cases]), axis=0)


def batch_verify(
    design: ControllerDesign,
    system: PolytopicSystem,
    initial_points,
    weight_samples,
    settings: IntegratorSettings,
) -> BatchReport:
    """Simulate every (initial point, weights) pair and collect statistics.

    All cases share the time grid, so they integrate as one vectorized
    Runge-Kutta sweep; per-case failures are recorded without aborting
    the batch.  Reported per case: interpolated reach time, count of
    recorded Lyapunov increases above ``LYAP_INCREASE_TOL`` while outside
    the stop ball, per-actuator saturation duty cycle, and the longest
    contiguous saturated interval per actuator (in seconds, at recording
    resolution).
    """
    points = [np.asarray(p, dtype=float) for p in initial_points]
    weights = [
        w if isinstance(w, SimplexWeights) else SimplexWeights(w)
        for w in weight_samples
    ]
    if not points or not weights:
        raise ValueError("batch_verify needs at least one point and one weight")
    n, m = system.n, system.m
    for p in points:
        if p.shape != (n,):
            raise ValueError(f"initial point has shape {p.shape}, expected ({n},)")
        if float(np.linalg.norm(p)) == 0.0:
            raise ValueError("initial points must be nonzero")

    cases = [(p, w) for p in points for w in weights]
    C = len(cases)
    Bstack = np.stack([blend_vertices(system, w) for _, w in cases])
    sig = np.stack([p for p, _ in cases])
    K = design.K
    P = design.P
    u_lo, u_hi = -design.u_bar.u_bar, design.u_bar.u_bar

    h = settings.step
    delta = settings.delta_stop
    stride = settings.record_stride
    nsteps = int(np.ceil(settings.t_max / h))

    with np.errstate(over="ignore"):
        active = np.linalg.norm(sig, axis=1) > delta
    failed = np.zeros(C, dtype=bool)
    reach = np.full(C, np.nan)
    reach[~active] = 0.0

    n_rec = nsteps // stride + 1
    rec_states = np.empty((n_rec, C, n))
    rec_times = np.empty(n_rec)
    rec_states[0] = sig
    rec_times[0] = 0.0
    rec_count = 1

    def field(states):
        units = _unit_rows(states)
        us = np.clip(units @ K.T, u_lo, u_hi)
        ds = np.einsum("cnm,cm->cn", Bstack, us)
        ds[~active] = 0.0
        return ds

    # Degenerate cases may overflow to inf; they are isolated per case via
    # the finiteness checks rather than aborting the sweep.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for i in range(nsteps):
            if not np.any(active):
                break
            t = i * h
            k1 = field(sig)
            # Reach guard, as in `simulate`: catch first-stage chords
            # traversing the stop ball before the averaged stages cancel.
            a_q = h * h * np.sum(k1 * k1, axis=1)
            b_q = 2.0 * h * np.sum(sig * k1, axis=1)
            r_sq = np.sum(sig * sig, axis=1)
            tau_min = np.clip(-b_q / (2.0 * a_q), 0.0, 1.0)
            tau_min = np.where(a_q > 0.0, tau_min, 0.0)
            dmin_sq = r_sq + b_q * tau_min + a_q * tau_min**2
            disc = b_q * b_q - 4.0 * a_q * (r_sq - delta * delta)
            tau = np.where(
                disc >= 0.0,
                (-b_q - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a_q),
                tau_min,
            )
            finite = np.isfinite(a_q) & np.isfinite(b_q) & np.isfinite(r_sq)
            cross = (
                active
                & finite
                & (a_q > 0.0)
                & (dmin_sq <= delta * delta)
                & (tau > 0.0)
                & (tau <= 1.0)
            )
            if np.any(cross):
                sig[cross] = sig[cross] + tau[cross, None] * h * k1[cross]
                reach[cross] = t + tau[cross] * h
                active &= ~cross
                if not np.any(active):
                    continue
            k2 = field(sig + 0.5 * h * k1)
            k3 = field(sig + 0.5 * h * k2)
            k4 = field(sig + h * k3)
            new = sig + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            bad = active & ~np.all(np.isfinite(new), axis=1)
            if np.any(bad):
                failed |= bad
                active &= ~bad
                new[bad] = sig[bad]
            r_old = np.linalg.norm(sig, axis=1)
            r_new = np.linalg.norm(new, axis=1)
            hit = active & (r_new <= delta)
            if np.any(hit):
                frac = (r_old[hit] - delta) / np.maximum(
                    r_old[hit] - r_new[hit], 1e-300
                )
                reach[hit] = t + h * np.clip(frac, 0.0, 1.0)
                active &= ~hit
            sig = np.where((active | hit)[:, None], new, sig)
            if (i + 1) % stride == 0:
                rec_states[rec_count] = sig
                rec_times[rec_count] = t + h
                rec_count += 1

        rec_states = rec_states[:rec_count]
        rec_times = rec_times[:rec_count]
        norms = np.linalg.norm(rec_states, axis=2)
        quad = np.einsum("tcn,nm,tcm->tc", rec_states, P, rec_states)
        lyap = np.where(norms > 0, quad / np.maximum(norms, _NORM_FLOOR), 0.0)
        units = _unit_rows(rec_states)
        sat_flags = np.abs(np.einsum("tcn,mn->tcm", units, K)) > design.u_bar.u_bar

    out = []
    for c, (p, w) in enumerate(cases):
        err = "numerical-failure" if failed[c] else None
        valid = norms[:, c] > delta
        viol = 0
        dv = np.diff(lyap[:, c])
        both = valid[:-1] & valid[1:]
        viol = int(np.sum(both & (dv > LYAP_INCREASE_TOL)))
        if np.any(valid):
            duty = sat_flags[valid, c, :].mean(axis=0)
            runs = np.zeros(m)
            cols = sat_flags[valid, c, :]
            for ell in range(m):
                best = cur = 0
                for flag in cols[:, ell]:
                    cur = cur + 1 if flag else 0
                    best = max(best, cur)
                runs[ell] = best * stride * h
        else:
            duty = np.zeros(m)
            runs = np.zeros(m)
        rt = None if (failed[c] or np.isnan(reach[c])) else float(reach[c])
        out.append(
            BatchCase(
                sigma0=p,
                alpha=w.alpha,
                reach_time=rt,
                lyapunov_violations=viol,
                saturation_duty=duty,
                max_saturated_run=runs,
                error=err,
            )
        )
    return BatchReport(cases=tuple(out), step=h)
