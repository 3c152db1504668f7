import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gpe_lab.errors import NegativePotentialError, NotNormalizedError, ShiftEqualsLambdaError
from gpe_lab.fem1d import Field, build_mesh
from gpe_lab.model import (
    GpeProblem,
    Potential,
    align_sign,
    assemble_A,
    eigen_residual,
    energy,
    eval_potential,
    quartic_integral,
    rayleigh_lambda,
    theta_linf,
    theta_weight,
)

from oracles import GAUSS20_W, GAUSS20_X, dense_A

MESH = build_mesh(-2, 2, 24)
PROBLEM = GpeProblem(MESH, Potential(0.25, 1.0, 2.0), 5.0)


def _quartic_oracle(mesh, u):
    full = u.full()
    total = 0.0
    for k in range(mesh.n_cells):
        x0, x1 = mesh.nodes[k], mesh.nodes[k + 1]
        s = 0.5 * (GAUSS20_X + 1)
        vals = (1 - s) * full[k] + s * full[k + 1]
        total += 0.5 * (x1 - x0) * np.sum(GAUSS20_W * vals**4)
    return total


def test_potential_values():
    p = Potential(0.25, 1.0, 2.0)
    assert p(0.0) == 0.0
    assert p(0.25) == pytest.approx(0.25 * 0.0625 + 1.0)
    assert Potential(0.5)(16.0) == 128.0


def test_tabulated_potential_is_p1():
    mesh = build_mesh(0, 1, 4)
    p = Potential(tabulated=np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(p.at_quad(mesh), 4 * mesh.quad_points)


def test_negative_potential_rejected():
    with pytest.raises(NegativePotentialError):
        eval_potential(Potential(offset=-0.1), MESH)
    with pytest.raises(NegativePotentialError):
        GpeProblem(MESH, Potential(quad_coeff=-1.0), 1.0)


def test_negative_beta_rejected():
    with pytest.raises(ValueError):
        GpeProblem(MESH, Potential(), -1.0)


def test_A_matches_dense_assembly():
    # polynomial V: 3-point Gauss is exact, so the match is to rounding
    problem = GpeProblem(MESH, Potential(0.25), 5.0)
    u = Field.interpolate(MESH, lambda x: np.cos(np.pi * x / 4) ** 2)
    np.testing.assert_allclose(assemble_A(problem, u).to_dense(), dense_A(problem, u.full()), rtol=1e-11, atol=1e-12)


def test_A_with_trigonometric_potential_converges_at_quadrature_order():
    # entries of the V-weighted mass carry the O(h^5) error of the 3-point rule
    errs = []
    for n in (100, 200):
        mesh = build_mesh(-2, 2, n)
        problem = GpeProblem(mesh, Potential(0.25, 1.0, 2.0), 5.0)
        u = Field.interpolate(mesh, lambda x: np.cos(np.pi * x / 4) ** 2)
        errs.append(np.max(np.abs(assemble_A(problem, u).to_dense() - dense_A(problem, u.full()))))
    assert errs[1] < 1e-8
    assert 24 < errs[0] / errs[1] < 40


@settings(max_examples=50, deadline=None)
@given(arrays(float, MESH.n_interior, elements=st.floats(-3, 3)))
def test_quartic_integral_exact(values):
    u = Field(MESH, values)
    assert quartic_integral(PROBLEM, u) == pytest.approx(_quartic_oracle(MESH, u), rel=1e-12, abs=1e-13)


@settings(max_examples=50, deadline=None)
@given(arrays(float, MESH.n_interior, elements=st.floats(0.01, 3)))
def test_lambda_energy_identity(values):
    # lambda(v) = 2 E(v) + beta/2 int |v|^4 for normalized v
    v = Field(MESH, PROBLEM.normalize(values))
    lam = rayleigh_lambda(PROBLEM, v)
    E = energy(PROBLEM, v)
    assert lam == pytest.approx(2 * E + 0.5 * PROBLEM.beta * quartic_integral(PROBLEM, v), rel=1e-12)


def test_rayleigh_requires_normalization():
    with pytest.raises(NotNormalizedError):
        rayleigh_lambda(PROBLEM, Field(MESH, np.ones(MESH.n_interior)))


def test_linear_problem_A_is_independent_of_state():
    lin = GpeProblem(MESH, Potential(0.5), 0.0)
    u = Field(MESH, np.ones(MESH.n_interior))
    np.testing.assert_array_equal(assemble_A(lin, u).diag, lin.linear_part.diag)


def test_sign_alignment():
    u = Field(MESH, -np.ones(MESH.n_interior))
    assert align_sign(u).values.min() > 0
    assert align_sign(-u).values.min() > 0


def test_theta_weight_boundary_and_shift():
    u = Field.interpolate(MESH, lambda x: np.cos(np.pi * x / 4))
    w = theta_weight(PROBLEM, u, 3.0)
    assert w[0] == 1.0 and w[-1] == 1.0
    with pytest.raises(ShiftEqualsLambdaError):
        theta_weight(PROBLEM, u, 3.0, sigma=3.0)


@pytest.mark.parametrize("which", ["mp1", "mp2"])
def test_discrete_linf_bound_and_theta(which, request):
    problem = request.getfixturevalue(which)
    gs = request.getfixturevalue("ref1" if which == "mp1" else "ref2")
    umax = np.max(np.abs(gs.u.values))
    assert problem.beta * umax**2 <= gs.lam * (1 + 5e-3)
    assert theta_linf(problem, gs.u, gs.lam, 0.0) == pytest.approx(1.0, abs=5e-3)


def test_ground_state_residual_small(mp1, ref1):
    assert eigen_residual(mp1, ref1.u, ref1.lam) < 1e-8
    assert ref1.u.values.min() > 0
