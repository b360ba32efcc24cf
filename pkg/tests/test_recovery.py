"""Gain recovery from hand-built solver points and from real solves."""

import numpy as np
import pytest

from uvc import (
    IllConditionedError,
    NoDesignError,
    PolytopicSystem,
    SaturationLimits,
    SdpSolution,
    SynthesisParameters,
    decision_layout,
    recover_design,
)


def _solution(x, status="optimal"):
    return SdpSolution(
        status=status,
        x=np.asarray(x, dtype=float),
        objective_value=0.0,
        iterations=1,
        max_residual=0.0,
        block_residuals=(),
    )


def _fixture(n=2, m=2):
    system = PolytopicSystem([np.eye(n) if m == n else np.ones((n, m))])
    limits = SaturationLimits([2.0] * m)
    params = SynthesisParameters(mu=1.0, rho=1.0)
    layout = decision_layout(n, m)
    return system, limits, params, layout


def test_identity_x_returns_z_unchanged():
    system, limits, params, layout = _fixture()
    Z0 = np.array([[0.3, -0.4], [0.1, 0.2]])
    x = layout.pack(
        np.eye(2), [1.0, 1.0], Z0, Z0, 1.001 * np.eye(2), 1.0 + 1e-9
    )
    design = recover_design(_solution(x), layout, system, limits, params)
    np.testing.assert_allclose(design.K, Z0, atol=1e-14)
    np.testing.assert_allclose(design.L, Z0, atol=1e-14)
    np.testing.assert_allclose(design.P, np.eye(2), atol=1e-14)


def test_scaled_x_halves_gain():
    system, limits, params, layout = _fixture()
    x = layout.pack(
        2.0 * np.eye(2), [1.0, 1.0], np.eye(2), np.eye(2),
        4.004 * np.eye(2), 0.5 + 1e-9,
    )
    design = recover_design(_solution(x), layout, system, limits, params)
    np.testing.assert_allclose(design.K, 0.5 * np.eye(2), atol=1e-14)
    # Q = inv(X) Qt inv(X) = Qt / 4
    np.testing.assert_allclose(design.Q, 1.001 * np.eye(2), atol=1e-12)


def test_infeasible_status_raises_no_design():
    system, limits, params, layout = _fixture()
    with pytest.raises(NoDesignError):
        recover_design(
            _solution(np.zeros(layout.total_vars), status="infeasible"),
            layout,
            system,
            limits,
            params,
        )


def test_near_singular_x_raises_ill_conditioned():
    system, limits, params, layout = _fixture()
    x = layout.pack(
        np.diag([1.0, 1e-15]), [1.0, 1.0], np.zeros((2, 2)),
        np.zeros((2, 2)), np.eye(2), 1.0,
    )
    with pytest.raises(IllConditionedError):
        recover_design(_solution(x), layout, system, limits, params)


def test_recovered_design_invariants(example1_design):
    design = example1_design
    # P and Q positive definite
    assert np.linalg.eigvalsh(design.P)[0] > 0
    assert np.linalg.eigvalsh(design.Q)[0] > 0
    # decay floor from the Qmax block
    assert design.lambda_min_Q() >= 1.0 / design.rho - 1e-8
    # flatness cap from the U0max block
    cap = np.linalg.eigvalsh(design.phi * np.eye(design.n) - design.P)[0]
    assert cap >= -1e-8
    # per-row inclusion certificate
    Pinv = np.linalg.inv(design.P)
    rows = design.K - design.L
    for ell in range(design.m):
        peak = rows[ell] @ Pinv @ rows[ell]
        bound = float(design.u_bar.u_bar[ell]) ** 2
        assert peak <= bound * (1.0 + 1e-8)


def test_matrices_are_read_only(example1_design):
    with pytest.raises(ValueError):
        example1_design.K[0, 0] = 0.0
