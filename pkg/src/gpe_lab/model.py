"""The Gross-Pitaevskii problem on a 1D P1 space.

Energy::

    E(v) = 1/2 * int( 1/2 |v'|^2 + V |v|^2 + beta/2 |v|^4 )

and the bilinear form linearized at ``z``::

    a_z(w, v) = 1/2 (w', v') + (V w, v) + beta (|z|^2 w, v)

whose matrix is ``A_z = K/2 + M_V + beta * M_{|z|^2}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import MeshMismatchError, NegativePotentialError, NotNormalizedError, ShiftEqualsLambdaError
from .fem1d import (
    BandedSymMatrix,
    Field,
    Mesh1D,
    assemble_mass,
    assemble_stiffness,
    assemble_weighted_mass,
    integrate,
    p1_at_quad,
)

NEGATIVE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Potential:
    """``V(x) = quad_coeff x^2 + sin_amp sin(sin_k pi x)^2 + offset``.

    If ``tabulated`` is given (values on all ``n_cells + 1`` nodes) the
    analytic parameters are ignored and V is the P1 interpolant of the table.
    """

    quad_coeff: float = 0.0
    sin_amp: float = 0.0
    sin_k: float = 0.0
    offset: float = 0.0
    tabulated: Optional[np.ndarray] = None

    def __call__(self, x):
        if self.tabulated is not None:
            raise TypeError("a tabulated potential is only defined on its mesh")
        x = np.asarray(x, dtype=float)
        return (
            self.quad_coeff * x**2
            + self.sin_amp * np.sin(self.sin_k * np.pi * x) ** 2
            + self.offset
        )

    def nodal(self, mesh: Mesh1D) -> np.ndarray:
        if self.tabulated is not None:
            tab = np.asarray(self.tabulated, dtype=float)
            if tab.shape != (mesh.n_cells + 1,):
                raise MeshMismatchError(
                    f"tabulated potential has {tab.size} values, mesh has {mesh.n_cells + 1} nodes"
                )
            return tab.copy()
        return self(mesh.nodes)

    def at_quad(self, mesh: Mesh1D) -> np.ndarray:
        if self.tabulated is not None:
            return p1_at_quad(self.nodal(mesh))
        return self(mesh.quad_points)


def eval_potential(p: Potential, mesh: Mesh1D) -> np.ndarray:
    """Nodal values of V on all nodes; raises if V is negative anywhere we sample it."""
    nodal = p.nodal(mesh)
    worst = min(float(nodal.min()), float(p.at_quad(mesh).min()))
    if worst < -NEGATIVE_TOL:
        raise NegativePotentialError(f"potential takes the negative value {worst:.6g}")
    return nodal


@dataclass(eq=False)
class GpeProblem:
    mesh: Mesh1D
    potential: Potential
    beta: float

    def __post_init__(self):
        if not np.isfinite(self.beta) or self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        eval_potential(self.potential, self.mesh)

    @cached_property
    def stiffness(self) -> BandedSymMatrix:
        return assemble_stiffness(self.mesh)

    @cached_property
    def mass(self) -> BandedSymMatrix:
        return assemble_mass(self.mesh)

    @cached_property
    def potential_quad(self) -> np.ndarray:
        return self.potential.at_quad(self.mesh)

    @cached_property
    def potential_mass(self) -> BandedSymMatrix:
        return assemble_weighted_mass(self.mesh, self.potential_quad)

    @cached_property
    def linear_part(self) -> BandedSymMatrix:
        """``K/2 + M_V``, the z-independent part of ``A_z``."""
        return 0.5 * self.stiffness + self.potential_mass

    def field(self, values) -> Field:
        return Field(self.mesh, values)

    # array-level kernels used by the iteration loops

    def a_matrix(self, z: np.ndarray) -> BandedSymMatrix:
        if self.beta == 0.0:
            return self.linear_part
        zq = _interior_at_quad(z)
        return self.linear_part + self.beta * assemble_weighted_mass(self.mesh, zq * zq)

    def l2_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(self.mass.quad_form(v), 0.0)))

    def normalize(self, v: np.ndarray) -> np.ndarray:
        return v / self.l2_norm(v)

    def quartic(self, v: np.ndarray) -> float:
        vq = _interior_at_quad(v)
        return integrate(self.mesh, vq**4)

    def energy(self, v: np.ndarray) -> float:
        kin = 0.5 * self.stiffness.quad_form(v)
        pot = self.potential_mass.quad_form(v)
        return 0.5 * (kin + pot + 0.5 * self.beta * self.quartic(v))

    def h1_norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(self.mass.quad_form(v) + self.stiffness.quad_form(v), 0.0)))


def _interior_at_quad(v: np.ndarray) -> np.ndarray:
    return p1_at_quad(np.concatenate(([0.0], v, [0.0])))


@dataclass
class GroundState:
    """Converged (or reference) state with its eigenvalue.

    ``tol`` is the eigenvalue-increment tolerance the state was computed with.
    """

    u: Field
    lam: float
    energy: float
    residual: float
    iterations: int = 0
    tol: float = float("nan")
    meta: dict = field(default_factory=dict)


def _check_mesh(problem: GpeProblem, f: Field) -> None:
    if f.mesh != problem.mesh:
        raise MeshMismatchError("field and problem live on different meshes")


def assemble_A(problem: GpeProblem, z: Field) -> BandedSymMatrix:
    _check_mesh(problem, z)
    return problem.a_matrix(z.values)


def energy(problem: GpeProblem, v: Field) -> float:
    _check_mesh(problem, v)
    return problem.energy(v.values)


def quartic_integral(problem: GpeProblem, v: Field) -> float:
    """``int |v|^4`` (exact for P1 v)."""
    _check_mesh(problem, v)
    return problem.quartic(v.values)


def rayleigh_lambda(problem: GpeProblem, v: Field, tol: float = 1e-8) -> float:
    """``a_v(v, v)`` for an L2-normalized ``v``."""
    _check_mesh(problem, v)
    norm = problem.l2_norm(v.values)
    if abs(norm - 1.0) > tol:
        raise NotNormalizedError(f"||v||_L2 = {norm!r}, expected 1")
    return problem.a_matrix(v.values).quad_form(v.values)


def eigen_residual(problem: GpeProblem, u: Field, lam: float) -> float:
    """Euclidean norm of ``A_u u - lam M u``."""
    _check_mesh(problem, u)
    r = problem.a_matrix(u.values).matvec(u.values) - lam * problem.mass.matvec(u.values)
    return float(np.linalg.norm(r))


def align_sign(u: Field) -> Field:
    """Flip ``u`` so that its nodal mean is non-negative."""
    return -u if u.values.sum() < 0 else u


def theta_weight(problem: GpeProblem, u: Field, lam: float, sigma: float = 0.0) -> np.ndarray:
    """Nodal values (boundary included) of ``1 - 2 beta |u|^2 / (lam - sigma)``."""
    _check_mesh(problem, u)
    if abs(lam - sigma) < 1e-14:
        raise ShiftEqualsLambdaError(f"shift {sigma!r} coincides with lambda {lam!r}")
    full = u.full()
    return 1.0 - 2.0 * problem.beta / (lam - sigma) * full**2


def theta_linf(problem: GpeProblem, u: Field, lam: float, sigma: float = 0.0) -> float:
    """Nodal sup-norm of the theta weight over the closed domain.

    The boundary nodes, where u = 0 and the weight equals 1, are included.
    """
    return float(np.max(np.abs(theta_weight(problem, u, lam, sigma))))
