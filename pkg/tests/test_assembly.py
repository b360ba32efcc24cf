"""Program assembly checked against independently constructed dense blocks."""

import numpy as np
import pytest

from uvc import (
    SaturationLimits,
    SimplexWeights,
    SynthesisParameters,
    assemble_program,
    decision_layout,
    solve_sdp,
)


def dense_vertex_block(B, Z, Y, S, Qt, mu):
    """Vertex stability block written out with np.block, as an oracle."""
    n, m = B.shape
    return np.block(
        [
            [B @ Z + Z.T @ B.T + (mu / 4) * np.eye(n) + Qt, Y.T - B @ S, Z.T @ B.T],
            [Y - S @ B.T, -2 * S, np.zeros((m, n))],
            [B @ Z, np.zeros((n, m)), -mu * np.eye(n)],
        ]
    )


@pytest.fixture(scope="module")
def example1_program(example1_system, example1_limits, example1_params):
    layout = decision_layout(2, 2)
    program = assemble_program(
        example1_system, example1_limits, example1_params, layout
    )
    return program, layout


def test_block_census_example1(example1_program):
    program, _ = example1_program
    sizes = {b.label: b.size for b in program.blocks}
    assert sizes["Xpos"] == 2 and sizes["Spos"] == 2
    lambdas = [b for b in program.blocks if b.label.startswith("Lambda_vertex_")]
    assert len(lambdas) == 4 and all(b.size == 6 for b in lambdas)
    inclusions = [b for b in program.blocks if b.label.startswith("inclusion_row_")]
    assert len(inclusions) == 2 and all(b.size == 3 for b in inclusions)
    assert sizes["Qmax"] == 4 and sizes["U0max"] == 4


def test_block_census_example2(example2_system, example2_limits):
    layout = decision_layout(3, 4)
    program = assemble_program(
        example2_system,
        example2_limits,
        SynthesisParameters(mu=0.4, rho=10.0),
        layout,
    )
    lambdas = [b for b in program.blocks if b.label.startswith("Lambda_vertex_")]
    assert len(lambdas) == 4 and all(b.size == 10 for b in lambdas)
    inclusions = [b for b in program.blocks if b.label.startswith("inclusion_row_")]
    assert len(inclusions) == 4 and all(b.size == 4 for b in inclusions)
    assert program.num_vars == 41
    assert program.objective[layout.phi_index] == 1.0
    assert np.count_nonzero(program.objective) == 1


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_assembly_matches_dense_oracle(
    example1_program, example1_system, example1_limits, seed
):
    program, layout = example1_program
    mu = 3.0
    rho = 1.0
    eps = program.eps_strict
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(layout.total_vars)
    X, s, Z, Y, Qt, phi = layout.unpack(x)
    S = np.diag(s)
    n = 2
    for i, B in enumerate(example1_system.vertices, start=1):
        oracle = -dense_vertex_block(np.asarray(B), Z, Y, S, Qt, mu) - eps * np.eye(6)
        got = program.block(f"Lambda_vertex_{i}").evaluate(x)
        np.testing.assert_allclose(got, oracle, atol=1e-12)
    for ell in range(2):
        row = (Z - Y)[ell]
        oracle = np.zeros((3, 3))
        oracle[:2, :2] = X
        oracle[:2, 2] = row
        oracle[2, :2] = row
        oracle[2, 2] = float(example1_limits.u_bar[ell]) ** 2
        got = program.block(f"inclusion_row_{ell + 1}").evaluate(x)
        np.testing.assert_allclose(got, oracle, atol=1e-12)
    np.testing.assert_allclose(
        program.block("Qmax").evaluate(x),
        np.block([[Qt, X], [X, rho * np.eye(n)]]),
        atol=1e-12,
    )
    np.testing.assert_allclose(
        program.block("U0max").evaluate(x),
        np.block([[phi * np.eye(n), np.eye(n)], [np.eye(n), X]]),
        atol=1e-12,
    )
    np.testing.assert_allclose(
        program.block("Xpos").evaluate(x), X - eps * np.eye(n), atol=1e-12
    )
    np.testing.assert_allclose(
        program.block("Spos").evaluate(x), S - eps * np.eye(2), atol=1e-12
    )


def test_zero_point_vertex_block_is_constant_part(example1_program):
    program, layout = example1_program
    x = np.zeros(layout.total_vars)
    eps = program.eps_strict
    got = program.block("Lambda_vertex_1").evaluate(x)
    vertex_at_zero = np.diag([0.75, 0.75, 0.0, 0.0, -3.0, -3.0])
    np.testing.assert_allclose(got, -vertex_at_zero - eps * np.eye(6), atol=1e-15)
    # not within the required margin: the constant part is indefinite
    assert np.linalg.eigvalsh(got)[0] < 0


def test_assembly_is_bit_deterministic(example1_system, example1_limits, example1_params):
    layout = decision_layout(2, 2)
    a = assemble_program(example1_system, example1_limits, example1_params, layout)
    b = assemble_program(example1_system, example1_limits, example1_params, layout)
    assert a.objective.tobytes() == b.objective.tobytes()
    for ba, bb in zip(a.blocks, b.blocks):
        assert ba.label == bb.label
        assert ba.F0.tobytes() == bb.F0.tobytes()
        assert ba.coeffs.tobytes() == bb.coeffs.tobytes()


def test_dimension_mismatch_rejected(example1_system, example1_params):
    layout = decision_layout(2, 2)
    with pytest.raises(ValueError, match="channels"):
        assemble_program(
            example1_system, SaturationLimits([2.0] * 3), example1_params, layout
        )
    with pytest.raises(ValueError, match="layout"):
        assemble_program(
            example1_system,
            SaturationLimits([2.0, 2.0]),
            example1_params,
            decision_layout(3, 2),
        )


def test_vertex_closure_under_convex_combination(
    example1_program, example1_params
):
    """Any simplex blend of the vertex blocks stays inside the margin."""
    program, _ = example1_program
    solution = solve_sdp(program, example1_params.solver)
    assert solution.status == "optimal"
    eps = program.eps_strict
    # constraint value is -(Lambda_i) - eps*I, so Lambda_i = -value - eps*I
    lambdas = [
        -(program.block(f"Lambda_vertex_{i}").evaluate(solution.x))
        - eps * np.eye(6)
        for i in range(1, 5)
    ]
    rng = np.random.default_rng(11)
    for _ in range(50):
        draw = rng.standard_exponential(4)
        alpha = SimplexWeights(draw / draw.sum()).alpha
        blended = sum(a * lam for a, lam in zip(alpha, lambdas))
        assert np.linalg.eigvalsh(blended)[-1] <= -eps + 1e-8
