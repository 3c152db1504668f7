"""Experiment orchestration: presets, reference solves, observed vs predicted rates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import GPEError, InsufficientDataError, MaxIterError, MeshMismatchError
from .fem1d import build_mesh
from .iterate import (
    DEFAULT_REFERENCE_TOL,
    RATE_CUTOFF_FACTOR,
    IterationTrace,
    SchemeConfig,
    run,
)
from .model import GpeProblem, GroundState, Potential
from .spectral import SpectralReport, spectral_report

TERMINAL_WINDOW = 5
REFERENCE_MAX_ITER = 5000
# a run counts as having found the ground state only if its final
# eigenvalue agrees with the reference to this relative accuracy
GROUND_STATE_RTOL = 1e-6


def model_problem_1(n_cells: int = 1000) -> GpeProblem:
    """V(x) = x^2/4 + sin(2 pi x)^2 on (-2, 2), beta = 5."""
    return GpeProblem(build_mesh(-2.0, 2.0, n_cells), Potential(quad_coeff=0.25, sin_amp=1.0, sin_k=2.0), 5.0)


def model_problem_2(n_cells: int = 1000) -> GpeProblem:
    """Harmonic trap V(x) = x^2/2 on (-16, 16), beta = 400."""
    return GpeProblem(build_mesh(-16.0, 16.0, n_cells), Potential(quad_coeff=0.5), 400.0)


PRESETS = {"mp1": model_problem_1, "mp2": model_problem_2}


def reference_solve(
    problem: GpeProblem,
    seed: int = 0,
    tol: float = DEFAULT_REFERENCE_TOL,
    max_iter: int = REFERENCE_MAX_ITER,
) -> GroundState:
    """Damped iteration with energy line search from a positive random start."""
    cfg = SchemeConfig("damped", line_search=True, tol=tol, max_iter=max_iter, seed=seed)
    gs, trace = run(problem, cfg)
    if not trace.converged:
        raise MaxIterError(f"reference solve: {trace.message}", iterations=trace.iterations)
    gs.meta["reference"] = True
    return gs


@dataclass
class RateSummary:
    rates: np.ndarray  # r(n) per record, NaN where invalid
    terminal_rate: float

    @property
    def valid(self) -> np.ndarray:
        return self.rates[np.isfinite(self.rates)]


def contraction_rates(
    data: Union[IterationTrace, Sequence[float]],
    cutoff: Optional[float] = None,
    window: int = TERMINAL_WINDOW,
) -> RateSummary:
    """Ratios of successive H1 errors and their terminal mean.

    ``data`` is a trace or a plain error sequence ``e_0, e_1, ...``.  Entry
    ``n`` is ``e_n / e_{n-1}``; it is invalid (NaN) when ``e_{n-1}`` is not
    above ``cutoff`` (default: the trace's own cutoff, or 50 times the
    default reference tolerance for a plain sequence).
    """
    if isinstance(data, IterationTrace):
        errors = data.h1_errors
        if cutoff is None:
            cutoff = data.rate_cutoff
    else:
        errors = np.asarray(data, dtype=float)
    if cutoff is None:
        cutoff = RATE_CUTOFF_FACTOR * DEFAULT_REFERENCE_TOL
    rates = np.full(errors.shape, math.nan)
    if errors.size > 1:
        prev, cur = errors[:-1], errors[1:]
        ok = np.isfinite(prev) & np.isfinite(cur) & (prev > cutoff)
        rates[1:][ok] = cur[ok] / prev[ok]
    valid = rates[np.isfinite(rates)]
    if valid.size < window + 1:
        raise InsufficientDataError(
            f"need at least {window + 1} valid contraction ratios, got {valid.size}"
        )
    return RateSummary(rates, float(np.mean(valid[-window:])))


def predicted_rate(report: SpectralReport, cfg: SchemeConfig) -> float:
    """Closed-form rate bound matching ``cfg`` (NaN for line-searched damping)."""
    if cfg.scheme == "basic":
        return report.rate_basic
    if cfg.scheme == "gfdn":
        return report.rate_gfdn(cfg.tau)
    if cfg.scheme == "damped":
        return math.nan if cfg.line_search else report.rate_damped(cfg.tau)
    return report.theta_shift(cfg.sigma)


def sharp_rate(report: SpectralReport, cfg: SchemeConfig) -> float:
    """The tighter weighted-eigenvalue predictor where one is available."""
    if cfg.scheme == "basic" or (cfg.scheme == "shifted" and cfg.sigma == 0.0):
        return abs(report.mu1)
    if cfg.scheme == "damped" and not cfg.line_search:
        return report.rate_damped_sharp(cfg.tau)
    return math.nan


def reached_ground_state(gs: GroundState, trace: IterationTrace, reference: GroundState) -> bool:
    return trace.converged and abs(gs.lam - reference.lam) <= GROUND_STATE_RTOL * abs(reference.lam)


@dataclass
class TableRow:
    scheme: str
    parameter: float
    predicted: float
    predicted_sharp: float
    observed: float
    iterations: int
    converged: bool


@dataclass
class ExperimentResult:
    problem_id: str
    reference: GroundState
    report: SpectralReport
    traces: list = field(default_factory=list)  # (SchemeConfig, IterationTrace)
    terminal_rates: list = field(default_factory=list)
    table: list = field(default_factory=list)

    @property
    def terminal_rate(self) -> float:
        """Terminal rate of the first scheme run."""
        return self.terminal_rates[0] if self.terminal_rates else math.nan

    def format_table(self) -> str:
        lines = [f"{'scheme':<8} {'param':>8} {'predicted':>10} {'sharp':>10} {'observed':>10} {'iters':>6} conv"]
        for r in self.table:
            lines.append(
                f"{r.scheme:<8} {r.parameter:>8.4g} {r.predicted:>10.5f} {r.predicted_sharp:>10.5f} "
                f"{r.observed:>10.5f} {r.iterations:>6d} {r.converged}"
            )
        return "\n".join(lines)


def _parameter(cfg: SchemeConfig) -> float:
    if cfg.scheme == "shifted":
        return cfg.sigma
    if cfg.scheme in ("gfdn", "damped"):
        return math.nan if cfg.line_search else cfg.tau
    return math.nan


def run_experiment(
    problem: GpeProblem,
    configs: Iterable[SchemeConfig],
    problem_id: str = "custom",
    reference: Optional[GroundState] = None,
    report: Optional[SpectralReport] = None,
) -> ExperimentResult:
    """Reference solve, spectral report, then every scheme run against the reference."""
    if reference is None:
        reference = reference_solve(problem)
    elif reference.u.mesh != problem.mesh:
        raise MeshMismatchError("reference and problem must share one mesh")
    if report is None:
        report = spectral_report(problem, reference, sharp=True)
    result = ExperimentResult(problem_id, reference, report)
    for cfg in configs:
        gs, trace = run(problem, cfg, reference=reference)
        try:
            observed = contraction_rates(trace).terminal_rate
        except InsufficientDataError:
            observed = math.nan
        result.traces.append((cfg, trace))
        result.terminal_rates.append(observed)
        result.table.append(
            TableRow(
                cfg.scheme,
                _parameter(cfg),
                predicted_rate(report, cfg),
                sharp_rate(report, cfg),
                observed,
                trace.iterations,
                reached_ground_state(gs, trace, reference),
            )
        )
    return result


@dataclass
class SweepRow:
    parameter: float
    predicted: float
    observed: float
    converged: bool
    message: str = ""


SWEEP_PARAMETERS = {"gfdn": "tau", "damped": "tau", "shifted": "sigma"}


def sweep(
    problem: GpeProblem,
    base: SchemeConfig,
    values: Sequence[float],
    reference: GroundState,
    report: SpectralReport,
) -> list:
    """Run ``base`` once per grid value of its tau (gfdn, damped) or sigma (shifted).

    A cell counts as converged only if the eigenvalue increment test passed
    and the final eigenvalue is the reference one; solver failures are
    recorded as non-converged cells instead of aborting the sweep.
    """
    if base.scheme not in SWEEP_PARAMETERS:
        raise ValueError(f"no sweep parameter for scheme {base.scheme!r}")
    if len(values) == 0:
        raise ValueError("sweep grid is empty")
    name = SWEEP_PARAMETERS[base.scheme]
    rows = []
    for value in values:
        cfg = replace(base, **{name: float(value)})
        try:
            predicted = predicted_rate(report, cfg)
        except GPEError:
            predicted = math.nan
        try:
            gs, trace = run(problem, cfg, reference=reference)
        except (GPEError, ArithmeticError) as exc:
            rows.append(SweepRow(float(value), predicted, math.nan, False, str(exc)))
            continue
        try:
            observed = contraction_rates(trace).terminal_rate
        except InsufficientDataError:
            observed = math.nan
        ok = reached_ground_state(gs, trace, reference)
        message = trace.message
        if trace.converged and not ok:
            message += f" to lambda={gs.lam:.8g}, not the ground state"
        rows.append(SweepRow(float(value), predicted, observed, ok, message))
    return rows
