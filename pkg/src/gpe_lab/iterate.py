"""Generalized inverse iterations for the GP ground state.

Four schemes share one loop:

* ``basic``   -- ``w = A_{u^n}^{-1} M u^n``
* ``gfdn``    -- ``w = (M + tau A_{u^n})^{-1} M u^n``
* ``shifted`` -- ``w = (A_{u^n} - sigma M)^{-1} M u^n``
* ``damped``  -- ``w = (1 - tau) u^n + tau gamma(u^n) A_{u^n}^{-1} M u^n``

each followed by L2 normalization.  The loop stops once two consecutive
eigenvalue approximations ``lambda^(n) = a_{u^n}(u^n, u^n)`` differ by at
most ``tol``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MeshMismatchError, NonPositiveGammaError, NotNormalizedError
from .fem1d import BandedSymMatrix, Field, LDLFactor, Mesh1D, assemble_mass, solve_guarded
from .model import GpeProblem, GroundState, align_sign

log = logging.getLogger(__name__)

SCHEMES = ("basic", "gfdn", "shifted", "damped")

TAU_MIN, TAU_MAX = 0.05, 1.95
LINE_SEARCH_GRID = 21
LINE_SEARCH_XTOL = 1e-4
# relative energy gain below which the line search keeps tau = 1
LINE_SEARCH_NOISE = 1e-14

NORM_TOL = 1e-8
DEFAULT_REFERENCE_TOL = 1e-13
RATE_CUTOFF_FACTOR = 50.0


@dataclass
class SchemeConfig:
    scheme: str = "basic"
    tau: float = 1.0
    sigma: float = 0.0
    tol: float = 1e-10
    max_iter: int = 1000
    line_search: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.scheme == "gfdn" and not self.tau > 0:
            raise ValueError(f"gfdn needs tau > 0, got {self.tau}")
        if self.scheme == "damped" and not self.line_search and not 0 < self.tau < 2:
            raise ValueError(f"damped scheme needs 0 < tau < 2, got {self.tau}")
        if self.line_search and self.scheme != "damped":
            raise ValueError("line_search only applies to the damped scheme")


@dataclass
class IterationRecord:
    n: int
    lam: float
    energy: float
    increment: float
    residual: float
    tau: float = math.nan
    h1_error: float = math.nan
    rate: float = math.nan


@dataclass
class IterationTrace:
    """Per-iteration history of one run.

    Record ``n`` describes ``u^n`` (record 0 is the initial value).  When a
    reference is supplied, ``h1_error`` is ``||u - u^n||_{H^1}`` after sign
    alignment and ``rate`` is the contraction achieved by step ``n``,
    ``h1_error[n] / h1_error[n-1]``; it is left as NaN while the denominator
    is below ``rate_cutoff``.
    """

    config: SchemeConfig
    records: list = field(default_factory=list)
    converged: bool = False
    message: str = ""
    rate_cutoff: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def lambdas(self) -> np.ndarray:
        return self.column("lam")

    @property
    def energies(self) -> np.ndarray:
        return self.column("energy")

    @property
    def h1_errors(self) -> np.ndarray:
        return self.column("h1_error")

    @property
    def rates(self) -> np.ndarray:
        return self.column("rate")

    @property
    def final_increment(self) -> float:
        return self.records[-1].increment if len(self.records) > 1 else math.nan


def random_initial(mesh: Mesh1D, seed: int) -> Field:
    """I.i.d. uniform (0, 1) nodal values, L2-normalized."""
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, mesh.n_interior)
    return Field(mesh, values / np.sqrt(assemble_mass(mesh).quad_form(values)))


# array kernels

def _normalized(problem: GpeProblem, w: np.ndarray) -> np.ndarray:
    return w / problem.l2_norm(w)


def _apply_g(problem: GpeProblem, u: np.ndarray, A: BandedSymMatrix) -> np.ndarray:
    return LDLFactor(A).solve(problem.mass.matvec(u))


def _gamma(problem: GpeProblem, u: np.ndarray, g: np.ndarray) -> float:
    ip = problem.mass.quad_form(g, u)
    if not ip > 0:
        raise NonPositiveGammaError(f"(G_u u, u) = {ip:.6g} is not positive")
    return 1.0 / ip


def _energy_along(problem: GpeProblem, u: np.ndarray, d: np.ndarray, tau: float) -> float:
    w = (1.0 - tau) * u + tau * d
    nrm = problem.l2_norm(w)
    if not nrm > 0:
        return math.inf
    return problem.energy(w / nrm)


def _line_search(problem: GpeProblem, u: np.ndarray, d: np.ndarray) -> float:
    def phi(t):
        return _energy_along(problem, u, d, t)

    grid = np.linspace(TAU_MIN, TAU_MAX, LINE_SEARCH_GRID)
    values = [phi(t) for t in grid]
    k = int(np.argmin(values))
    best_tau, best_e = float(grid[k]), values[k]
    if 0 < k < len(grid) - 1:
        lo, hi = float(grid[k - 1]), float(grid[k + 1])
        t, e = _golden_section(phi, lo, hi, LINE_SEARCH_XTOL)
        if e < best_e:
            best_tau, best_e = t, e
    e_one = phi(1.0)
    if best_e >= e_one - LINE_SEARCH_NOISE * max(1.0, abs(e_one)):
        # gain not resolvable in floating point; take the undamped step
        return 1.0
    return best_tau


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo: float, hi: float, xtol: float) -> tuple[float, float]:
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _step(problem: GpeProblem, u: np.ndarray, A: BandedSymMatrix, cfg: SchemeConfig):
    """One update of ``cfg.scheme`` from ``u`` (with ``A = A_u``); returns (u_next, tau)."""
    M = problem.mass
    if cfg.scheme == "basic":
        w = LDLFactor(A).solve(M.matvec(u))
        return _normalized(problem, w), math.nan
    if cfg.scheme == "gfdn":
        w = LDLFactor(M + cfg.tau * A).solve(M.matvec(u))
        return _normalized(problem, w), cfg.tau
    if cfg.scheme == "shifted":
        if cfg.sigma == 0:
            w = LDLFactor(A).solve(M.matvec(u))
        else:
            w = solve_guarded(A - cfg.sigma * M, M.matvec(u))
        return _normalized(problem, w), math.nan
    g = _apply_g(problem, u, A)
    d = _gamma(problem, u, g) * g
    tau = _line_search(problem, u, d) if cfg.line_search else cfg.tau
    return _normalized(problem, (1.0 - tau) * u + tau * d), tau


def _check_normalized(problem: GpeProblem, u: Field) -> None:
    if u.mesh != problem.mesh:
        raise MeshMismatchError("field and problem live on different meshes")
    norm = problem.l2_norm(u.values)
    if abs(norm - 1.0) > NORM_TOL:
        raise NotNormalizedError(f"||u||_L2 = {norm!r}, expected 1")


# Field-level API

def apply_inverse(problem: GpeProblem, u: Field) -> Field:
    """``G_u u = A_u^{-1} M u`` (not normalized)."""
    return Field(problem.mesh, _apply_g(problem, u.values, problem.a_matrix(u.values)))


def step_basic(problem: GpeProblem, u: Field) -> Field:
    _check_normalized(problem, u)
    cfg = SchemeConfig("basic")
    return Field(problem.mesh, _step(problem, u.values, problem.a_matrix(u.values), cfg)[0])


def step_gfdn(problem: GpeProblem, u: Field, tau: float) -> Field:
    _check_normalized(problem, u)
    cfg = SchemeConfig("gfdn", tau=tau)
    return Field(problem.mesh, _step(problem, u.values, problem.a_matrix(u.values), cfg)[0])


def step_shifted(problem: GpeProblem, u: Field, sigma: float) -> Field:
    _check_normalized(problem, u)
    cfg = SchemeConfig("shifted", sigma=sigma)
    return Field(problem.mesh, _step(problem, u.values, problem.a_matrix(u.values), cfg)[0])


def gamma(problem: GpeProblem, u: Field, g: Field) -> float:
    """``1 / (G_u u, u)_{L2}`` given ``g = G_u u``."""
    return _gamma(problem, u.values, g.values)


def step_damped(problem: GpeProblem, u: Field, tau: float) -> Field:
    _check_normalized(problem, u)
    cfg = SchemeConfig("damped", tau=tau)
    return Field(problem.mesh, _step(problem, u.values, problem.a_matrix(u.values), cfg)[0])


def line_search_tau(problem: GpeProblem, u: Field, g: Field, gamma_val: float) -> float:
    """Damping parameter approximately minimizing the energy of the next iterate.

    Scans a uniform grid on [0.05, 1.95], refines the best bracket by golden
    section, and falls back to 1 when no gain over the undamped step is
    resolvable.
    """
    return _line_search(problem, u.values, gamma_val * g.values)


def _h1_error(problem: GpeProblem, u: np.ndarray, ref: np.ndarray) -> float:
    s = problem.mass.quad_form(u, ref)
    diff = ref - u if s >= 0 else ref + u
    return problem.h1_norm(diff)


def run(
    problem: GpeProblem,
    config: SchemeConfig,
    reference: Optional[GroundState] = None,
    initial: Optional[Field] = None,
    rate_cutoff: Optional[float] = None,
) -> tuple[GroundState, IterationTrace]:
    """Iterate ``config.scheme`` until the eigenvalue increment drops below ``config.tol``.

    Hitting ``max_iter`` is not an exception: the trace is returned with
    ``converged = False``.  Solver failures (singular shifted systems,
    non-positive gamma) propagate.
    """
    u = (initial if initial is not None else random_initial(problem.mesh, config.seed)).values
    u = _normalized(problem, u)
    ref = None
    if reference is not None:
        ref = reference.u.values
        if rate_cutoff is None:
            tol = reference.tol if math.isfinite(reference.tol) else DEFAULT_REFERENCE_TOL
            rate_cutoff = RATE_CUTOFF_FACTOR * tol
    trace = IterationTrace(config=config, rate_cutoff=rate_cutoff or 0.0)
    M = problem.mass

    def record(n, u, A, lam, inc, tau):
        rec = IterationRecord(
            n=n,
            lam=lam,
            energy=problem.energy(u),
            increment=inc,
            residual=float(np.linalg.norm(A.matvec(u) - lam * M.matvec(u))),
            tau=tau,
        )
        if ref is not None:
            rec.h1_error = _h1_error(problem, u, ref)
            if trace.records:
                prev = trace.records[-1].h1_error
                if prev > trace.rate_cutoff:
                    rec.rate = rec.h1_error / prev
        trace.records.append(rec)

    A = problem.a_matrix(u)
    lam = A.quad_form(u)
    record(0, u, A, lam, math.nan, math.nan)
    for n in range(1, config.max_iter + 1):
        u_next, tau = _step(problem, u, A, config)
        if not np.all(np.isfinite(u_next)):
            trace.message = f"non-finite iterate at step {n}"
            break
        u = u_next
        A = problem.a_matrix(u)
        lam_next = A.quad_form(u)
        inc = abs(lam_next - lam)
        lam = lam_next
        record(n, u, A, lam, inc, tau)
        if inc <= config.tol:
            trace.converged = True
            trace.message = f"converged after {n} iterations"
            break
    else:
        trace.message = f"max-iter exceeded: {config.max_iter} iterations without |dlambda| <= {config.tol:g}"
    if not trace.converged:
        log.info("%s run did not converge: %s", config.scheme, trace.message)

    last = trace.records[-1]
    state = GroundState(
        u=align_sign(Field(problem.mesh, u)),
        lam=last.lam,
        energy=last.energy,
        residual=last.residual,
        iterations=trace.iterations,
        tol=config.tol,
    )
    return state, trace
