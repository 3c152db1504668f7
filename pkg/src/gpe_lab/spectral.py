"""Auxiliary eigenvalue problems that predict the contraction rates.

* the linearized pencil ``a_u(u_i, v) = lambda_i (u_i, v)`` at the ground
  state, whose two smallest eigenvalues give the spectral-gap rate
  ``lambda_1 / lambda_2``;
* the weighted problem ``((lambda - 2 beta |u|^2) v, w) = mu a_u(v, w)`` on
  the L2-orthogonal complement of ``u``, whose largest eigenvalue in
  magnitude ``mu_1`` is the sharp asymptotic rate of the basic scheme.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NoConvergenceError, ShiftEqualsLambdaError
from .fem1d import BandedSymMatrix, Field, LDLFactor, assemble_weighted_mass
from .model import GpeProblem, GroundState, theta_linf

PAIR_MAX_ITER = 500
PAIR_RESIDUAL_RTOL = 1e-9
# inverse iterations run on A - s M with s just below lambda_1
PAIR_SHIFT_FRACTION = 1e-3

MU_MAX_ITER = 2000
MU_TOL = 1e-10


@dataclass
class SpectralReport:
    lambda1: float
    lambda2: float
    mu1: float
    mus: tuple = ()
    problem: Optional[GpeProblem] = field(default=None, repr=False)
    ground_state: Optional[GroundState] = field(default=None, repr=False)

    @property
    def rate_basic(self) -> float:
        return self.lambda1 / self.lambda2

    @property
    def tau_crit(self) -> float:
        return 2.0 / (1.0 + self.rate_basic)

    def rate_gfdn(self, tau: float) -> float:
        return (1.0 + tau * self.lambda1) / (1.0 + tau * self.lambda2)

    def rate_damped(self, tau: float) -> float:
        return abs(1.0 - tau) + tau * self.rate_basic

    def rate_damped_sharp(self, tau: float) -> float:
        """``max_j |1 - tau + tau mu_j|`` over the known weighted eigenvalues.

        ``|1 - tau|`` is always included since the weighted eigenvalues
        accumulate at zero.
        """
        mus = self.mus or (self.mu1,)
        return max([abs(1.0 - tau)] + [abs(1.0 - tau + tau * m) for m in mus])

    def theta_shift(self, sigma: float) -> float:
        if self.problem is None or self.ground_state is None:
            raise ValueError("theta_shift needs the problem and ground state")
        return shift_diagnostic(self.problem, self.ground_state, sigma, self.lambda2)


def _m_normalize(M: BandedSymMatrix, x: np.ndarray) -> np.ndarray:
    return x / math.sqrt(M.quad_form(x))


def _shift_factor(A: BandedSymMatrix, M: BandedSymMatrix, estimate: float) -> LDLFactor:
    """Factor ``A - s M`` with ``s`` below the smallest eigenvalue (all pivots positive)."""
    s = (1.0 - PAIR_SHIFT_FRACTION) * estimate
    for _ in range(60):
        fac = LDLFactor(A - s * M)
        if fac.inertia[1] == 0:
            return fac
        s -= PAIR_SHIFT_FRACTION * abs(estimate) + (estimate - s)
    raise NoConvergenceError("could not find a shift below the smallest eigenvalue")


def _inverse_iteration(fac, A, M, x, deflate=None):
    for k in range(1, PAIR_MAX_ITER + 1):
        if deflate is not None:
            x = x - M.quad_form(x, deflate) * deflate
        x = _m_normalize(M, x)
        Ax = A.matvec(x)
        lam = float(np.dot(x, Ax))
        res = np.linalg.norm(Ax - lam * M.matvec(x))
        if res <= PAIR_RESIDUAL_RTOL * np.linalg.norm(x):
            return lam, x, k
        x = fac.solve(M.matvec(x))
    raise NoConvergenceError(
        f"inverse iteration stalled after {PAIR_MAX_ITER} iterations (residual {res:.3e})",
        iterations=PAIR_MAX_ITER,
    )


def linearized_pair(problem: GpeProblem, gs: GroundState, seed: int = 0):
    """Two smallest eigenpairs of the pencil ``(A_u, M)``.

    Returns ``(lambda1, u1, lambda2, u2)`` with M-normalized eigenvectors,
    ``u1`` of positive mean.  Both pairs come from shift-and-invert
    iteration with a shift just below ``lambda1``; the second pair is kept
    M-orthogonal to ``u1`` at every step.
    """
    u = gs.u.values
    A = problem.a_matrix(u)
    M = problem.mass
    fac = _shift_factor(A, M, A.quad_form(u) / M.quad_form(u))
    lam1, x1, _ = _inverse_iteration(fac, A, M, u.copy())
    if x1.sum() < 0:
        x1 = -x1
    start = np.random.default_rng(seed).standard_normal(u.size)
    lam2, x2, _ = _inverse_iteration(fac, A, M, start, deflate=x1)
    return lam1, Field(problem.mesh, x1), lam2, Field(problem.mesh, x2)


@dataclass
class WeightedEigen:
    mu: float
    vector: Field
    iterations: int


def weighted_eigen(
    problem: GpeProblem, gs: GroundState, shift: float = 0.0, seed: int = 0
) -> WeightedEigen:
    """Dominant eigenpair of ``v -> P A_u^{-1} M_theta v - shift * v``.

    ``P`` is the L2 projector onto the complement of ``u`` and
    ``theta = lambda - 2 beta |u|^2``.  Power iteration, normalized in the
    ``A_u`` norm; the returned ``mu`` is the Rayleigh quotient
    ``(theta v, v) / a_u(v, v)`` of the limit vector (the shift is not
    subtracted from it).
    """
    u = gs.u.values
    M = problem.mass
    A = problem.a_matrix(u)
    fac = LDLFactor(A)
    uq = gs.u.at_quad()
    m_theta = assemble_weighted_mass(problem.mesh, gs.lam - 2.0 * problem.beta * uq * uq)
    mu_ = M.matvec(u)
    uu = float(np.dot(u, mu_))

    def project(x):
        return x - (np.dot(mu_, x) / uu) * u

    def a_normalize(x):
        return x / math.sqrt(A.quad_form(x))

    v = a_normalize(project(np.random.default_rng(seed).standard_normal(u.size)))
    rq_prev = math.nan
    history = []
    for k in range(1, MU_MAX_ITER + 1):
        w = project(fac.solve(m_theta.matvec(v)))
        if shift:
            w = w - shift * v
        v = a_normalize(w)
        rq = m_theta.quad_form(v) / A.quad_form(v)
        history.append(rq)
        if abs(rq - rq_prev) < MU_TOL:
            return WeightedEigen(rq, Field(problem.mesh, v), k)
        rq_prev = rq
    # two-step Rayleigh quotient gives |mu|^2 even when +mu and -mu compete
    w = project(fac.solve(m_theta.matvec(v)))
    mag = math.sqrt(abs(A.quad_form(w) / A.quad_form(v)))
    raise NoConvergenceError(
        f"power iteration did not settle in {MU_MAX_ITER} iterations "
        f"(last Rayleigh quotients {history[-2]:.6g}, {history[-1]:.6g}); "
        f"dominant magnitude ~{mag:.6g}, candidates +{mag:.6g} and -{mag:.6g}",
        iterations=MU_MAX_ITER,
        candidates=(mag, -mag),
    )


def weighted_mu1(problem: GpeProblem, gs: GroundState) -> float:
    """Signed eigenvalue of largest magnitude of the weighted problem."""
    return weighted_eigen(problem, gs).mu


def weighted_opposite(problem: GpeProblem, gs: GroundState, mu1: float) -> float:
    """Extreme weighted eigenvalue on the other side of the spectrum from ``mu1``."""
    return weighted_eigen(problem, gs, shift=mu1).mu


def predict_rates(
    lambda1: float,
    lambda2: float,
    mu1: float,
    mus: Sequence[float] = (),
    problem: Optional[GpeProblem] = None,
    ground_state: Optional[GroundState] = None,
) -> SpectralReport:
    return SpectralReport(lambda1, lambda2, mu1, tuple(mus), problem, ground_state)


def shift_diagnostic(problem: GpeProblem, gs: GroundState, sigma: float, lambda_j: float) -> float:
    """Rate bound ``|lambda - sigma| / |lambda_j - sigma| * ||theta_sigma||_inf`` for the shifted scheme."""
    lam = gs.lam
    if abs(lam - sigma) < 1e-14:
        raise ShiftEqualsLambdaError(f"shift {sigma!r} coincides with lambda {lam!r}")
    if abs(lambda_j - sigma) < 1e-14:
        raise ShiftEqualsLambdaError(f"shift {sigma!r} coincides with lambda_j {lambda_j!r}")
    return abs(lam - sigma) / abs(lambda_j - sigma) * theta_linf(problem, gs.u, lam, sigma)


def spectral_report(problem: GpeProblem, gs: GroundState, sharp: bool = False) -> SpectralReport:
    """Compute lambda1, lambda2 and mu1 (optionally the opposite extreme) for ``gs``."""
    lam1, _, lam2, _ = linearized_pair(problem, gs)
    mu1 = weighted_mu1(problem, gs)
    mus = [mu1]
    if sharp:
        try:
            mus.append(weighted_opposite(problem, gs, mu1))
        except NoConvergenceError:
            pass
    return predict_rates(lam1, lam2, mu1, mus, problem, gs)
