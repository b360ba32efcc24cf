"""End-to-end design runs, the mu grid search, and solution quality."""

import numpy as np
import pytest

from uvc import (
    NoDesignError,
    PolytopicSystem,
    SaturationLimits,
    SolverSettings,
    SynthesisParameters,
    inclusion_margins,
    mu_grid_search,
    synthesize,
)
from tests.conftest import ROV_FEASIBLE_MU


def test_example1_design_is_certified(example1_design, example1_limits):
    design = example1_design
    worst = max(0.0, -min(v for _, v in design.block_residuals))
    assert worst <= 1e-8
    assert design.lambda_min_Q() >= 1.0 - 1e-6
    assert np.min(inclusion_margins(design, example1_limits)) >= -1e-8
    # the optimal gain exceeds the saturation level in spectral norm:
    # saturation is tolerated rather than avoided
    assert np.linalg.norm(design.K, 2) > 2.0


def test_example2_design_is_certified(example2_design, example2_limits):
    design = example2_design
    worst = max(0.0, -min(v for _, v in design.block_residuals))
    assert worst <= 1e-8
    assert design.lambda_min_Q() >= 0.1 - 1e-6
    assert np.min(inclusion_margins(design, example2_limits)) >= -1e-8
    assert np.linalg.norm(design.K, 2) > 30.0


def test_scalar_system_stabilizing_sign():
    # 1-D plant: the rate is sat(K sign(s)), which converges iff K < 0
    system = PolytopicSystem([np.array([[1.0]])])
    design = synthesize(
        system, SaturationLimits([1.0]), SynthesisParameters(mu=1.0, rho=1.0)
    )
    assert design.K[0, 0] < 0.0


def test_phi_never_worse_when_rho_relaxed():
    system = PolytopicSystem([np.array([[1.0]])])
    limits = SaturationLimits([1.0])
    tight = synthesize(system, limits, SynthesisParameters(mu=1.0, rho=1.0))
    loose = synthesize(system, limits, SynthesisParameters(mu=1.0, rho=2.0))
    assert loose.phi <= tight.phi + 10 * 1e-8


def test_infeasible_polytope_raises_with_report():
    # sign-ambiguous input direction cannot be robustly stabilized
    system = PolytopicSystem([np.array([[1.0]]), np.array([[-1.0]])])
    with pytest.raises(NoDesignError) as err:
        synthesize(
            system, SaturationLimits([1.0]), SynthesisParameters(mu=1.0, rho=1.0)
        )
    assert err.value.report is not None
    assert err.value.report.status == "infeasible"


def test_grid_pinned_mu_returns_that_design(
    example1_system, example1_limits, example1_design
):
    result = mu_grid_search(example1_system, example1_limits, 1.0, [3.0])
    assert [e.mu for e in result.entries] == [3.0]
    assert result.entries[0].status == "optimal"
    np.testing.assert_allclose(result.design.K, example1_design.K, rtol=1e-9)


def test_grid_duplicate_entries_identical_first_taken(
    example1_system, example1_limits
):
    result = mu_grid_search(example1_system, example1_limits, 1.0, [3.0, 3.0])
    assert len(result.entries) == 2
    assert result.entries[0].phi == result.entries[1].phi
    assert result.design.mu == 3.0


def test_grid_mixed_feasibility_reports_and_dominates(
    example2_system, example2_limits
):
    grid = [0.1, ROV_FEASIBLE_MU, 0.4]
    result = mu_grid_search(example2_system, example2_limits, 10.0, grid)
    statuses = {e.mu: e.status for e in result.entries}
    assert statuses[0.4] == "infeasible"
    assert statuses[0.1] == "optimal"
    feasible_phis = [e.phi for e in result.entries if e.phi is not None]
    assert result.design.phi <= min(feasible_phis) + 10 * 1e-8


def test_grid_all_infeasible_raises():
    system = PolytopicSystem([np.array([[1.0]]), np.array([[-1.0]])])
    with pytest.raises(NoDesignError):
        mu_grid_search(system, SaturationLimits([1.0]), 1.0, [0.5, 1.0])


def test_grid_respects_thread_cap(example1_system, example1_limits, monkeypatch):
    monkeypatch.setenv("UVC_THREADS", "1")
    result = mu_grid_search(example1_system, example1_limits, 1.0, [1.0, 3.0])
    assert len(result.entries) == 2
    assert result.design.phi <= min(e.phi for e in result.entries if e.phi) + 1e-7


def test_backoff_zero_still_certifies(example1_system, example1_limits):
    params = SynthesisParameters(mu=3.0, rho=1.0, inclusion_backoff=0.0)
    design = synthesize(example1_system, example1_limits, params)
    assert np.min(inclusion_margins(design, example1_limits)) >= -1e-8
