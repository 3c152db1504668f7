import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpe_lab import spectral
from gpe_lab.errors import NoConvergenceError, ShiftEqualsLambdaError
from gpe_lab.fem1d import build_mesh, l2_inner, l2_norm
from gpe_lab.harness import model_problem_1, reference_solve
from gpe_lab.model import GpeProblem, Potential
from gpe_lab.spectral import (
    SpectralReport,
    linearized_pair,
    predict_rates,
    shift_diagnostic,
    spectral_report,
    weighted_eigen,
    weighted_mu1,
)

from oracles import dominant, pencil_pairs, weighted_spectrum

# polynomial potentials keep the production assembly exact, so the dense
# comparison measures only the eigensolvers
ORACLE_CASES = [
    ("trap", lambda n: GpeProblem(build_mesh(-2, 2, n), Potential(0.25), 5.0)),
    ("strong", lambda n: GpeProblem(build_mesh(-8, 8, n), Potential(0.5), 60.0)),
    ("linear", lambda n: GpeProblem(build_mesh(0, 3, n), Potential(1.0, offset=0.5), 0.0)),
]


@pytest.fixture(scope="module")
def oracle_states():
    out = {}
    for name, make in ORACLE_CASES:
        for n in (16, 32, 64):
            problem = make(n)
            out[name, n] = (problem, reference_solve(problem))
    return out


@pytest.mark.parametrize("n", [16, 32, 64])
@pytest.mark.parametrize("name", [c[0] for c in ORACLE_CASES])
def test_linearized_pair_matches_dense(oracle_states, name, n):
    problem, gs = oracle_states[name, n]
    lam1, u1, lam2, u2 = linearized_pair(problem, gs)
    vals, vecs = pencil_pairs(problem, gs)
    assert lam1 == pytest.approx(vals[0], abs=1e-8)
    assert lam2 == pytest.approx(vals[1], abs=1e-8)
    # eigenvectors up to sign
    for ours, ref in ((u1.values, vecs[:, 0]), (u2.values, vecs[:, 1])):
        s = np.sign(ours @ ref)
        np.testing.assert_allclose(ours, s * ref, atol=1e-6)


@pytest.mark.parametrize("n", [16, 32, 64])
@pytest.mark.parametrize("name", [c[0] for c in ORACLE_CASES])
def test_weighted_mu1_matches_dense(oracle_states, name, n):
    problem, gs = oracle_states[name, n]
    mu = weighted_spectrum(problem, gs)
    assert weighted_mu1(problem, gs) == pytest.approx(dominant(mu), abs=1e-8)


@pytest.mark.parametrize("n", [16, 32, 64])
def test_linear_case_mu1_is_spectral_gap(oracle_states, n):
    problem, gs = oracle_states["linear", n]
    lam1, _, lam2, _ = linearized_pair(problem, gs)
    assert abs(weighted_mu1(problem, gs)) == pytest.approx(lam1 / lam2, abs=1e-8)


def test_free_particle_spectrum():
    problem = GpeProblem(build_mesh(0, np.pi, 512), Potential(), 0.0)
    gs = reference_solve(problem)
    lam1, _, lam2, _ = linearized_pair(problem, gs)
    assert lam1 == pytest.approx(0.5, abs=1e-3)
    assert lam2 == pytest.approx(2.0, abs=1e-3)


def test_mp1_values(mp1, ref1, report1):
    assert report1.lambda1 == pytest.approx(2.65187, abs=2e-3)
    assert report1.lambda2 == pytest.approx(3.35315, abs=2e-3)
    assert report1.rate_basic == pytest.approx(0.79086, abs=1e-3)
    assert report1.mu1 == pytest.approx(0.26197, abs=2e-3)


def test_mp2_values(report2):
    assert report2.lambda2 == pytest.approx(35.60994, abs=5e-2)
    assert report2.rate_basic == pytest.approx(0.99909, abs=1e-3)
    assert report2.mu1 == pytest.approx(-0.94192, abs=5e-3)


@pytest.mark.parametrize("which", ["1", "2"])
def test_report_invariants(request, which):
    problem = request.getfixturevalue("mp" + which)
    gs = request.getfixturevalue("ref" + which)
    rep = request.getfixturevalue("report" + which)
    assert 0 < rep.lambda1 < rep.lambda2
    assert abs(rep.lambda1 - gs.lam) <= 1e-7 * gs.lam
    assert abs(rep.mu1) <= rep.rate_basic - 1e-3
    _, u1, _, _ = linearized_pair(problem, gs)
    assert abs(l2_inner(u1, gs.u)) == pytest.approx(1.0, abs=1e-7)
    v = weighted_eigen(problem, gs).vector
    assert abs(l2_inner(v * (1 / l2_norm(v)), gs.u)) <= 1e-8


def test_closed_form_predictors():
    rep = SpectralReport(lambda1=2.0, lambda2=3.0, mu1=-0.5, mus=(-0.5, 0.25))
    assert rep.rate_basic == pytest.approx(2 / 3)
    assert rep.rate_damped(1.0) == rep.rate_basic
    assert rep.rate_gfdn(1.0) == pytest.approx(3 / 4)
    assert 1 < rep.tau_crit < 2
    assert rep.rate_damped_sharp(1.0) == pytest.approx(0.5)
    assert rep.rate_damped_sharp(0.5) == pytest.approx(max(0.5, 0.25, 0.625))
    with pytest.raises(ValueError):
        rep.theta_shift(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 50), st.floats(1e-3, 50), st.floats(1e-3, 1e3), st.floats(1.0001, 10))
def test_gfdn_rate_decreases_towards_basic(lam1, gap, tau, factor):
    rep = predict_rates(lam1, lam1 + gap, 0.0)
    assert rep.rate_gfdn(tau * factor) < rep.rate_gfdn(tau)
    assert rep.rate_gfdn(tau) > rep.rate_basic
    assert rep.rate_gfdn(1e8) == pytest.approx(rep.rate_basic, abs=1e-7)


def test_shift_diagnostic_linear_case(oracle_states):
    problem, gs = oracle_states["linear", 64]
    lam1, _, lam2, _ = linearized_pair(problem, gs)
    assert shift_diagnostic(problem, gs, 0.0, lam2) == pytest.approx(lam1 / lam2, rel=1e-12)


def test_shift_diagnostic_blows_up_on_mp1(mp1, ref1, report1):
    lam = ref1.lam
    sigmas = np.linspace(0.0, lam - 0.5, 12)
    values = [shift_diagnostic(mp1, ref1, s, report1.lambda2) for s in sigmas]
    assert values[0] < 1 < values[-1]
    near = [shift_diagnostic(mp1, ref1, lam - d, report1.lambda2) for d in (0.3, 0.1, 0.01)]
    assert near[0] < near[1] < near[2]
    with pytest.raises(ShiftEqualsLambdaError):
        shift_diagnostic(mp1, ref1, lam, report1.lambda2)
    with pytest.raises(ShiftEqualsLambdaError):
        shift_diagnostic(mp1, ref1, report1.lambda2, report1.lambda2)


def test_power_iteration_failure_reports_candidates(mp2, ref2, monkeypatch):
    monkeypatch.setattr(spectral, "MU_MAX_ITER", 5)
    with pytest.raises(NoConvergenceError) as info:
        weighted_mu1(mp2, ref2)
    plus, minus = info.value.candidates
    assert plus == -minus > 0
    assert info.value.iterations == 5


def test_mp1_extremes_against_dense_solve():
    # both ends of the weighted spectrum on a 200-cell MP1; the oracle's
    # 20-point quadrature of sin^2 differs from the 3-point rule by ~1e-9
    problem = model_problem_1(200)
    gs = reference_solve(problem)
    rep = spectral_report(problem, gs, sharp=True)
    mu = weighted_spectrum(problem, gs)
    assert rep.mu1 == pytest.approx(mu.max(), abs=1e-6)
    assert rep.mus[1] == pytest.approx(mu.min(), abs=1e-6)
    assert rep.rate_damped_sharp(1.0) == pytest.approx(abs(rep.mu1))


def test_mp1_negative_extreme(report1):
    assert len(report1.mus) == 2
    assert -abs(report1.mu1) < report1.mus[1] < 0
