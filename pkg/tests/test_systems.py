import numpy as np
import pytest

from uvc import (
    PolytopicSystem,
    SaturationLimits,
    SimplexWeights,
    SynthesisParameters,
)


def test_polytope_shape_and_counts():
    system = PolytopicSystem([np.eye(2), 2 * np.eye(2)])
    assert system.n == 2 and system.m == 2 and system.num_vertices == 2


def test_polytope_rejects_mixed_shapes():
    with pytest.raises(ValueError, match="shape"):
        PolytopicSystem([np.eye(2), np.ones((3, 2))])


def test_polytope_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        PolytopicSystem([])
    with pytest.raises(ValueError, match="finite"):
        PolytopicSystem([np.array([[np.nan]])])


def test_polytope_vertices_are_read_only():
    system = PolytopicSystem([np.eye(2)])
    with pytest.raises(ValueError):
        system.vertices[0][0, 0] = 5.0


def test_simplex_weights_validation():
    SimplexWeights([0.25, 0.25, 0.25, 0.25])
    SimplexWeights([1.0])
    with pytest.raises(ValueError, match="nonnegative"):
        SimplexWeights([1.5, -0.5])
    with pytest.raises(ValueError, match="sum"):
        SimplexWeights([0.5, 0.4])


def test_saturation_limits_positive():
    SaturationLimits([2.0, 2.0])
    with pytest.raises(ValueError):
        SaturationLimits([2.0, 0.0])
    with pytest.raises(ValueError):
        SaturationLimits([-1.0])


def test_synthesis_parameters_validation():
    params = SynthesisParameters(mu=3.0, rho=1.0)
    assert params.solver.tol == 1e-8
    with pytest.raises(ValueError):
        SynthesisParameters(mu=0.0, rho=1.0)
    with pytest.raises(ValueError):
        SynthesisParameters(mu=1.0, rho=-1.0)
    with pytest.raises(ValueError):
        SynthesisParameters(mu=1.0, rho=1.0, eps_strict=0.0)


def test_eps_strict_resolution_tracks_vertex_norm():
    small = PolytopicSystem([0.001 * np.eye(2)])
    big = PolytopicSystem([50.0 * np.eye(2)])
    params = SynthesisParameters(mu=1.0, rho=1.0)
    assert params.resolve_eps(small) == pytest.approx(1e-6)
    assert params.resolve_eps(big) == pytest.approx(50e-6)
    pinned = SynthesisParameters(mu=1.0, rho=1.0, eps_strict=1e-7)
    assert pinned.resolve_eps(big) == 1e-7
