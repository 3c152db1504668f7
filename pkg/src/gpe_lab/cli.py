"""Command-line entry point: ``gpe-lab solve|rates|spectrum|sweep``.

Runs are described by an INI file with three sections::

    [problem]     preset, a, b, n_cells, potential, quad_coeff, sin_amp,
                  sin_k, offset, potential_file, beta
    [scheme]      scheme, tau, sigma, tol, max_iter, line_search, seed
    [experiment]  reference_seed, reference_tol, sweep_values, taus, sigmas,
                  output, write_state

Grid entries (``sweep_values``, ``sigmas``) may be plain numbers or offsets
from the reference eigenvalue written as ``lambda-0.1`` / ``lambda+0.2``.
Every value is validated before any computation starts.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import os
import re
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, GPEError
from .fem1d import build_mesh
from .harness import (
    PRESETS,
    SWEEP_PARAMETERS,
    contraction_rates,
    reference_solve,
    sweep,
)
from .iterate import DEFAULT_REFERENCE_TOL, SCHEMES, SchemeConfig, run
from .model import GpeProblem, Potential
from .spectral import spectral_report

log = logging.getLogger("gpe_lab")

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2

RATES_HEADER = ("n", "lambda_n", "energy_n", "h1_error", "r_n", "tau_n")
SWEEP_HEADER = ("parameter", "predicted_rate", "observed_rate", "converged")

PROBLEM_KEYS = {
    "preset", "a", "b", "n_cells", "potential", "quad_coeff", "sin_amp",
    "sin_k", "offset", "potential_file", "beta",
}
SCHEME_KEYS = {"scheme", "tau", "sigma", "tol", "max_iter", "line_search", "seed"}
EXPERIMENT_KEYS = {
    "reference_seed", "reference_tol", "sweep_values", "taus", "sigmas",
    "output", "write_state",
}
SECTIONS = {"problem": PROBLEM_KEYS, "scheme": SCHEME_KEYS, "experiment": EXPERIMENT_KEYS}

# problem parameters of the presets, overridable key by key
PRESET_VALUES = {
    "mp1": dict(a=-2.0, b=2.0, n_cells=1000, quad_coeff=0.25, sin_amp=1.0, sin_k=2.0, offset=0.0, beta=5.0),
    "mp2": dict(a=-16.0, b=16.0, n_cells=1000, quad_coeff=0.5, sin_amp=0.0, sin_k=0.0, offset=0.0, beta=400.0),
}

_GRID_TOKEN = re.compile(r"^\s*lambda\s*(?:([+-])\s*([0-9.eE+-]+))?\s*$")


@dataclass(frozen=True)
class GridValue:
    """A grid entry: ``value`` or ``lambda + value`` when ``relative``."""

    value: float
    relative: bool = False

    def resolve(self, lam: float) -> float:
        return lam + self.value if self.relative else self.value

    def __str__(self):
        if not self.relative:
            return repr(self.value)
        return f"lambda{self.value:+g}"


@dataclass
class RunPlan:
    problem: GpeProblem
    problem_id: str
    scheme: SchemeConfig
    reference_seed: int = 0
    reference_tol: float = DEFAULT_REFERENCE_TOL
    sweep_values: tuple = ()
    taus: tuple = ()
    sigmas: tuple = ()
    output: Optional[Path] = None
    write_state: bool = False
    source: Optional[Path] = None


# parsing


def _read_ini(path: Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        parser.read_string(text, source=str(path))
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"{path}:{line}: cannot parse line {exc.errors[0][1].strip()!r}", line=line) from exc
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: key outside of any section", line=exc.lineno) from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: duplicate key {exc.option!r}", key=exc.option, line=exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: duplicate section [{exc.section}]", line=exc.lineno) from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key in parser[section]:
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key)
    return parser


def _float(raw: str, key: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {raw!r}", key=key) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {raw!r}", key=key)
    return value


def _int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}", key=key) from None


def _bool(raw: str, key: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {raw!r}", key=key)


def _grid(raw: str, key: str, allow_relative: bool) -> tuple:
    out = []
    for token in (t for t in raw.replace("\n", ",").split(",") if t.strip()):
        m = _GRID_TOKEN.match(token)
        if m and allow_relative:
            offset = 0.0 if m.group(1) is None else _float(m.group(2), key)
            out.append(GridValue(-offset if m.group(1) == "-" else offset, relative=True))
        else:
            out.append(GridValue(_float(token, key)))
    return tuple(out)


def _problem_from(section, base_dir: Path) -> tuple[GpeProblem, str]:
    sec = dict(section) if section is not None else {}
    preset = sec.get("preset", "").strip().lower() or None
    if preset is not None and preset not in PRESET_VALUES:
        raise ConfigError(f"preset: unknown preset {preset!r} (choose mp1 or mp2)", key="preset")
    values = dict(PRESET_VALUES.get(preset, {}))
    for key in ("a", "b", "quad_coeff", "sin_amp", "sin_k", "offset", "beta"):
        if key in sec:
            values[key] = _float(sec[key], key)
    if "n_cells" in sec:
        values["n_cells"] = _int(sec["n_cells"], "n_cells")
    for key in ("a", "b", "n_cells", "beta"):
        if key not in values:
            raise ConfigError(f"{key}: missing from [problem] (and no preset given)", key=key)
    if values["beta"] < 0:
        raise ConfigError(f"beta: must be >= 0, got {values['beta']}", key="beta")
    if values["n_cells"] < 2:
        raise ConfigError(f"n_cells: must be >= 2, got {values['n_cells']}", key="n_cells")
    if not values["a"] < values["b"]:
        raise ConfigError(f"a: need a < b, got a={values['a']}, b={values['b']}", key="a")

    family = sec.get("potential", "tabulated" if "potential_file" in sec else "analytic").strip().lower()
    if family not in ("analytic", "tabulated"):
        raise ConfigError(f"potential: expected analytic or tabulated, got {family!r}", key="potential")
    mesh = build_mesh(values["a"], values["b"], values["n_cells"])
    if family == "tabulated":
        if "potential_file" not in sec:
            raise ConfigError("potential_file: required for a tabulated potential", key="potential_file")
        path = Path(sec["potential_file"])
        path = path if path.is_absolute() else base_dir / path
        if not path.is_file():
            raise ConfigError(f"potential_file: {path} does not exist", key="potential_file")
        try:
            table = np.loadtxt(path, delimiter=",", ndmin=2)[:, -1]
        except ValueError as exc:
            raise ConfigError(f"potential_file: cannot read {path}: {exc}", key="potential_file") from exc
        if table.size != mesh.n_cells + 1:
            raise ConfigError(
                f"potential_file: {table.size} values for {mesh.n_cells + 1} nodes", key="potential_file"
            )
        potential = Potential(tabulated=table)
    else:
        potential = Potential(
            quad_coeff=values.get("quad_coeff", 0.0),
            sin_amp=values.get("sin_amp", 0.0),
            sin_k=values.get("sin_k", 0.0),
            offset=values.get("offset", 0.0),
        )
    try:
        problem = GpeProblem(mesh, potential, values["beta"])
    except GPEError as exc:
        raise ConfigError(f"potential: {exc}", key="potential") from exc
    return problem, preset or "custom"


def _scheme_from(section, seed_override: Optional[int]) -> SchemeConfig:
    sec = dict(section) if section is not None else {}
    kw = {}
    if "scheme" in sec:
        kw["scheme"] = sec["scheme"].strip().lower()
        if kw["scheme"] not in SCHEMES:
            raise ConfigError(f"scheme: expected one of {', '.join(SCHEMES)}, got {sec['scheme']!r}", key="scheme")
    for key in ("tau", "sigma", "tol"):
        if key in sec:
            kw[key] = _float(sec[key], key)
    for key in ("max_iter", "seed"):
        if key in sec:
            kw[key] = _int(sec[key], key)
    if "line_search" in sec:
        kw["line_search"] = _bool(sec["line_search"], "line_search")
    if seed_override is not None:
        kw["seed"] = seed_override
    if kw.get("tol", 1.0) <= 0:
        raise ConfigError("tol: must be positive", key="tol")
    if kw.get("max_iter", 1) < 1:
        raise ConfigError("max_iter: must be >= 1", key="max_iter")
    try:
        return SchemeConfig(**kw)
    except ValueError as exc:
        key = "line_search" if "line_search" in str(exc) else "tau"
        raise ConfigError(f"{key}: {exc}", key=key) from exc


def parse_config(
    path: Optional[os.PathLike] = None,
    preset: Optional[str] = None,
    seed: Optional[int] = None,
    out: Optional[os.PathLike] = None,
) -> RunPlan:
    """Read and validate a run description.

    ``preset`` (mp1/mp2) supplies problem defaults that the file may
    override; ``seed`` and ``out`` override the file's scheme seed and
    output directory.
    """
    if path is None and preset is None:
        raise ConfigError("need --config or --preset")
    parser = configparser.ConfigParser()
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        parser = _read_ini(path)
        base_dir = path.parent
    psec = dict(parser["problem"]) if parser.has_section("problem") else {}
    if preset is not None:
        if "preset" in psec and psec["preset"].strip().lower() != preset:
            raise ConfigError(f"preset: file says {psec['preset']!r}, command line says {preset!r}", key="preset")
        psec["preset"] = preset
    problem, problem_id = _problem_from(psec, base_dir)
    scheme = _scheme_from(parser["scheme"] if parser.has_section("scheme") else None, seed)

    esec = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    plan = RunPlan(problem=problem, problem_id=problem_id, scheme=scheme, source=path)
    if "reference_seed" in esec:
        plan.reference_seed = _int(esec["reference_seed"], "reference_seed")
    if "reference_tol" in esec:
        plan.reference_tol = _float(esec["reference_tol"], "reference_tol")
        if plan.reference_tol <= 0:
            raise ConfigError("reference_tol: must be positive", key="reference_tol")
    if "sweep_values" in esec:
        plan.sweep_values = _grid(esec["sweep_values"], "sweep_values", allow_relative=True)
    if "taus" in esec:
        plan.taus = tuple(g.value for g in _grid(esec["taus"], "taus", allow_relative=False))
    if "sigmas" in esec:
        plan.sigmas = _grid(esec["sigmas"], "sigmas", allow_relative=True)
    if "write_state" in esec:
        plan.write_state = _bool(esec["write_state"], "write_state")
    if out is not None:
        plan.output = Path(out)
    elif esec.get("output", "").strip():
        plan.output = base_dir / esec["output"].strip()
    if plan.output is not None and plan.output.exists() and not plan.output.is_dir():
        raise ConfigError(f"output: {plan.output} exists and is not a directory", key="output")
    return plan


# output


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(plan: RunPlan, name: str, text: str, out) -> None:
    if plan.output is None:
        out.write(text)
    else:
        target = plan.output / name
        write_atomic(target, text)
        print(f"wrote {target}", file=out)


def rates_rows(trace):
    """Rows of the per-iteration CSV, in ``RATES_HEADER`` order."""
    try:
        rates = contraction_rates(trace).rates
    except GPEError:
        rates = trace.rates
    for rec, r in zip(trace.records, rates):
        yield (rec.n, rec.lam, rec.energy, rec.h1_error, r, rec.tau)


# subcommands


def cmd_solve(plan: RunPlan, out=None) -> int:
    """Run one scheme and print lambda, energy, iterations."""
    out = out or sys.stdout
    gs, trace = run(plan.problem, plan.scheme)
    print(
        f"lambda={gs.lam:.12g} energy={gs.energy:.12g} iterations={trace.iterations} "
        f"residual={gs.residual:.3e}",
        file=out,
    )
    if plan.write_state and plan.output is not None:
        x = plan.problem.mesh.nodes
        _emit(plan, "state.csv", csv_text(("x", "u"), zip(x, gs.u.full())), out)
    if not trace.converged:
        print(f"error: {trace.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_rates(plan: RunPlan, out=None) -> int:
    """Per-iteration CSV of lambda, energy, H1 error and r(n)."""
    out = out or sys.stdout
    reference = reference_solve(plan.problem, seed=plan.reference_seed, tol=plan.reference_tol)
    gs, trace = run(plan.problem, plan.scheme, reference=reference)
    _emit(plan, "rates.csv", csv_text(RATES_HEADER, rates_rows(trace)), out)
    if not trace.converged:
        print(f"error: {trace.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_spectrum(plan: RunPlan, out=None) -> int:
    """Print lambda1, lambda2, mu1 and the rate predictors."""
    out = out or sys.stdout
    reference = reference_solve(plan.problem, seed=plan.reference_seed, tol=plan.reference_tol)
    rep = spectral_report(plan.problem, reference, sharp=True)
    rows = [
        ("lambda", reference.lam),
        ("lambda1", rep.lambda1),
        ("lambda2", rep.lambda2),
        ("mu1", rep.mu1),
        ("abs_mu1", abs(rep.mu1)),
        ("rate_basic", rep.rate_basic),
        ("tau_crit", rep.tau_crit),
    ]
    for tau in plan.taus:
        rows.append((f"rate_gfdn(tau={tau:g})", rep.rate_gfdn(tau)))
        if 0 < tau < 2:
            rows.append((f"rate_damped(tau={tau:g})", rep.rate_damped(tau)))
            rows.append((f"rate_damped_sharp(tau={tau:g})", rep.rate_damped_sharp(tau)))
    for g in plan.sigmas:
        sigma = g.resolve(reference.lam)
        try:
            value = rep.theta_shift(sigma)
        except GPEError:
            value = math.nan
        rows.append((f"theta_shift(sigma={sigma:.6g})", value))
    for name, value in rows:
        print(f"{name}={value:.10g}", file=out)
    if plan.output is not None:
        _emit(plan, "spectrum.csv", csv_text(("quantity", "value"), ((n, float(v)) for n, v in rows)), out)
    return EXIT_OK


def validate_sweep(plan: RunPlan) -> None:
    if plan.scheme.scheme not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"scheme: sweeps need gfdn, damped or shifted, got {plan.scheme.scheme!r}", key="scheme"
        )
    if not plan.sweep_values:
        raise ConfigError("sweep_values: the sweep grid is empty", key="sweep_values")
    if plan.scheme.scheme != "shifted" and any(g.relative for g in plan.sweep_values):
        raise ConfigError("sweep_values: lambda offsets only make sense for sigma", key="sweep_values")
    for g in plan.sweep_values:
        if plan.scheme.scheme == "gfdn" and not g.value > 0:
            raise ConfigError(f"sweep_values: gfdn needs tau > 0, got {g}", key="sweep_values")
        if plan.scheme.scheme == "damped" and not plan.scheme.line_search and not 0 < g.value < 2:
            raise ConfigError(f"sweep_values: damped needs 0 < tau < 2, got {g}", key="sweep_values")


def cmd_sweep(plan: RunPlan, out=None) -> int:
    """Observed vs predicted rates over a tau or sigma grid."""
    out = out or sys.stdout
    validate_sweep(plan)
    reference = reference_solve(plan.problem, seed=plan.reference_seed, tol=plan.reference_tol)
    rep = spectral_report(plan.problem, reference, sharp=True)
    values = [g.resolve(reference.lam) for g in plan.sweep_values]
    rows = sweep(plan.problem, plan.scheme, values, reference, rep)
    text = csv_text(SWEEP_HEADER, ((r.parameter, r.predicted, r.observed, r.converged) for r in rows))
    _emit(plan, "sweep.csv", text, out)
    for r in rows:
        if not r.converged:
            log.info("cell %s did not converge: %s", _fmt(r.parameter), r.message)
    # individual failures are data; only a sweep with no successful cell fails
    return EXIT_OK if any(r.converged for r in rows) else EXIT_NUMERICAL


COMMANDS = {"solve": cmd_solve, "rates": cmd_rates, "spectrum": cmd_spectrum, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gpe-lab", description="1D Gross-Pitaevskii inverse-iteration lab")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.rstrip("."))
        p.add_argument("--config", type=Path, help="INI run description")
        p.add_argument("--out", type=Path, help="output directory (default: CSV to stdout)")
        p.add_argument("--seed", type=int, help="override the scheme seed")
        p.add_argument("--preset", choices=sorted(PRESETS), help="model problem defaults")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        plan = parse_config(args.config, preset=args.preset, seed=args.seed, out=args.out)
        if args.command == "sweep":
            validate_sweep(plan)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](plan)
    except (GPEError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
