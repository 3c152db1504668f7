"""Uniform 1D P1 finite elements with homogeneous Dirichlet boundary.

Unknowns live on the interior nodes of a uniform mesh; every matrix is
symmetric tridiagonal and is stored as a (diag, offdiag) pair.  Integrals
with variable weights use 3-point Gauss-Legendre quadrature per cell, which
is exact up to polynomial degree 5 (enough for |u_h|^2 phi_i phi_j and
|u_h|^4 with u_h piecewise linear).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np

from .errors import InvalidDomainError, MeshMismatchError, NearSingularError

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)
# P1 hat functions on the reference cell, evaluated at the Gauss points
_PHI_LEFT = 0.5 * (1.0 - _GAUSS_X)
_PHI_RIGHT = 0.5 * (1.0 + _GAUSS_X)

PIVOT_RTOL = 1e-14
# ||A|| ||x|| / ||b|| bounds cond(A) from below; past this the matrix is
# singular to working precision
GROWTH_LIMIT = 1e-3 / np.finfo(float).eps


@dataclass(frozen=True)
class Mesh1D:
    """Uniform partition of ``[a, b]`` into ``n_cells`` cells."""

    a: float
    b: float
    n_cells: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise InvalidDomainError(f"need a < b, got a={self.a}, b={self.b}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise InvalidDomainError(f"need n_cells >= 2, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_cells

    @property
    def n_interior(self) -> int:
        return self.n_cells - 1

    @cached_property
    def nodes(self) -> np.ndarray:
        """All ``n_cells + 1`` node coordinates, boundary included."""
        return self.a + self.h * np.arange(self.n_cells + 1)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.nodes[1:-1]

    @cached_property
    def quad_points(self) -> np.ndarray:
        """Gauss points, shape ``(n_cells, 3)``."""
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])
        return mid[:, None] + 0.5 * self.h * _GAUSS_X[None, :]

    @property
    def quad_weights(self) -> np.ndarray:
        """Gauss weights of one cell (identical for every cell)."""
        return 0.5 * self.h * _GAUSS_W


def build_mesh(a: float, b: float, n_cells: int) -> Mesh1D:
    return Mesh1D(float(a), float(b), n_cells)


@dataclass(frozen=True, eq=False)
class Field:
    """P1 function given by its values on the interior nodes."""

    mesh: Mesh1D
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_interior,):
            raise MeshMismatchError(
                f"expected {self.mesh.n_interior} interior values, got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, mesh: Mesh1D) -> Field:
        return cls(mesh, np.zeros(mesh.n_interior))

    @classmethod
    def interpolate(cls, mesh: Mesh1D, f: Callable[[np.ndarray], np.ndarray]) -> Field:
        return cls(mesh, np.asarray(f(mesh.interior_nodes), dtype=float))

    def full(self) -> np.ndarray:
        """Nodal values including the two zero boundary values."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def at_quad(self) -> np.ndarray:
        """Values at the Gauss points, shape ``(n_cells, 3)``."""
        return p1_at_quad(self.full())

    def _check(self, other: Field) -> None:
        if self.mesh != other.mesh:
            raise MeshMismatchError("fields live on different meshes")

    def __add__(self, other: Field) -> Field:
        self._check(other)
        return Field(self.mesh, self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        self._check(other)
        return Field(self.mesh, self.values - other.values)

    def __mul__(self, c: float) -> Field:
        return Field(self.mesh, c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> Field:
        return Field(self.mesh, -self.values)


def p1_at_quad(full_nodal: np.ndarray) -> np.ndarray:
    return full_nodal[:-1, None] * _PHI_LEFT + full_nodal[1:, None] * _PHI_RIGHT


@dataclass
class BandedSymMatrix:
    """Symmetric tridiagonal matrix."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        self.offdiag = np.asarray(self.offdiag, dtype=float)
        if self.diag.ndim != 1 or self.offdiag.shape != (max(self.dim - 1, 0),):
            raise ValueError("offdiag must have length dim - 1")

    @property
    def dim(self) -> int:
        return self.diag.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    def __matmul__(self, x):
        return self.matvec(np.asarray(x, dtype=float))

    def quad_form(self, x: np.ndarray, y: np.ndarray | None = None) -> float:
        """``y^T A x`` (``x^T A x`` when ``y`` is omitted)."""
        return float(np.dot(x if y is None else y, self.matvec(x)))

    def norm_inf(self) -> float:
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.offdiag)
        row[1:] += np.abs(self.offdiag)
        return float(row.max()) if row.size else 0.0

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def __add__(self, other: BandedSymMatrix) -> BandedSymMatrix:
        return BandedSymMatrix(self.diag + other.diag, self.offdiag + other.offdiag)

    def __sub__(self, other: BandedSymMatrix) -> BandedSymMatrix:
        return BandedSymMatrix(self.diag - other.diag, self.offdiag - other.offdiag)

    def __mul__(self, c: float) -> BandedSymMatrix:
        return BandedSymMatrix(c * self.diag, c * self.offdiag)

    __rmul__ = __mul__

    def factor(self) -> LDLFactor:
        return LDLFactor(self)


class LDLFactor:
    """LDL^T factorization without pivoting of a symmetric tridiagonal matrix.

    Works for indefinite matrices as long as no pivot vanishes; a pivot below
    ``PIVOT_RTOL * max|diag|`` raises :class:`NearSingularError`.
    """

    def __init__(self, matrix: BandedSymMatrix):
        a = matrix.diag.tolist()
        b = matrix.offdiag.tolist()
        n = len(a)
        tol = PIVOT_RTOL * max(float(np.max(np.abs(matrix.diag))), np.finfo(float).tiny)
        d = [0.0] * n
        l = [0.0] * (n - 1)
        piv = a[0]
        for i in range(n - 1):
            if abs(piv) < tol:
                raise NearSingularError(f"pivot {piv:.3e} at row {i}", index=i, pivot=piv)
            d[i] = piv
            li = b[i] / piv
            l[i] = li
            piv = a[i + 1] - li * b[i]
        if abs(piv) < tol:
            raise NearSingularError(f"pivot {piv:.3e} at row {n - 1}", index=n - 1, pivot=piv)
        d[n - 1] = piv
        self.d = d
        self.l = l
        self.dim = n

    @property
    def inertia(self) -> tuple[int, int]:
        """(number of positive pivots, number of negative pivots)."""
        pos = sum(1 for p in self.d if p > 0)
        return pos, self.dim - pos

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        d, l, n = self.d, self.l, self.dim
        y = np.asarray(rhs, dtype=float).tolist()
        if len(y) != n:
            raise ValueError(f"rhs has length {len(y)}, matrix has dim {n}")
        for i in range(n - 1):
            y[i + 1] -= l[i] * y[i]
        x = [0.0] * n
        x[n - 1] = y[n - 1] / d[n - 1]
        for i in range(n - 2, -1, -1):
            x[i] = y[i] / d[i] - l[i] * x[i + 1]
        return np.array(x)


def solve_banded(matrix: BandedSymMatrix, rhs: np.ndarray) -> np.ndarray:
    return LDLFactor(matrix).solve(rhs)


def solve_guarded(matrix: BandedSymMatrix, rhs: np.ndarray) -> np.ndarray:
    """Like :func:`solve_banded`, but also rejects numerically singular matrices.

    A shift that hits an eigenvalue in floating point rarely produces an
    exactly vanishing pivot; it shows up as a solution growth
    ``||A|| ||x|| / ||b||`` near ``1/eps`` instead.
    """
    x = LDLFactor(matrix).solve(rhs)
    bnorm = float(np.max(np.abs(rhs))) if rhs.size else 0.0
    growth = matrix.norm_inf() * float(np.max(np.abs(x))) / bnorm if bnorm > 0 else 0.0
    if not growth < GROWTH_LIMIT:
        raise NearSingularError(f"matrix is singular to working precision (growth {growth:.2e})")
    return x


def assemble_stiffness(mesh: Mesh1D) -> BandedSymMatrix:
    n, h = mesh.n_interior, mesh.h
    return BandedSymMatrix(np.full(n, 2.0 / h), np.full(n - 1, -1.0 / h))


def assemble_mass(mesh: Mesh1D) -> BandedSymMatrix:
    n, h = mesh.n_interior, mesh.h
    return BandedSymMatrix(np.full(n, 2.0 * h / 3.0), np.full(n - 1, h / 6.0))


Weight = Union[float, Field, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def weight_at_quad(mesh: Mesh1D, w: Weight) -> np.ndarray:
    """Evaluate a weight at the Gauss points.

    ``w`` may be a scalar, a callable of x, a :class:`Field`, an array of
    quadrature values of shape ``(n_cells, 3)``, or nodal values (interior or
    full) that are interpolated as a P1 function.
    """
    if isinstance(w, Field):
        if w.mesh != mesh:
            raise MeshMismatchError("weight field lives on a different mesh")
        return w.at_quad()
    if callable(w):
        return np.broadcast_to(np.asarray(w(mesh.quad_points), dtype=float), (mesh.n_cells, 3))
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        return np.full((mesh.n_cells, 3), float(w))
    if w.shape == (mesh.n_cells, 3):
        return w
    if w.shape == (mesh.n_cells + 1,):
        return p1_at_quad(w)
    if w.shape == (mesh.n_interior,):
        return p1_at_quad(np.concatenate(([0.0], w, [0.0])))
    raise MeshMismatchError(f"cannot interpret weight of shape {w.shape} on this mesh")


def assemble_weighted_mass(mesh: Mesh1D, w: Weight) -> BandedSymMatrix:
    """Matrix of ``int w phi_i phi_j dx`` over the interior hat functions."""
    wq = weight_at_quad(mesh, w) * mesh.quad_weights
    m_ll = wq @ (_PHI_LEFT * _PHI_LEFT)
    m_rr = wq @ (_PHI_RIGHT * _PHI_RIGHT)
    m_lr = wq @ (_PHI_LEFT * _PHI_RIGHT)
    # cell k couples nodes k and k+1; interior node i is full-node i+1
    return BandedSymMatrix(m_rr[:-1] + m_ll[1:], m_lr[1:-1])


def integrate(mesh: Mesh1D, values_at_quad: np.ndarray) -> float:
    return float(np.sum(values_at_quad @ mesh.quad_weights))


def _pair(u: Field, v: Field) -> Mesh1D:
    if u.mesh != v.mesh:
        raise MeshMismatchError("fields live on different meshes")
    return u.mesh


def l2_inner(u: Field, v: Field) -> float:
    mesh = _pair(u, v)
    return assemble_mass(mesh).quad_form(u.values, v.values)


def l2_norm(u: Field) -> float:
    return float(np.sqrt(max(l2_inner(u, u), 0.0)))


def h1_norm(u: Field) -> float:
    """Standard H^1 norm sqrt(||u||^2 + ||u'||^2), no 1/2 on the gradient."""
    m = assemble_mass(u.mesh).quad_form(u.values)
    k = assemble_stiffness(u.mesh).quad_form(u.values)
    return float(np.sqrt(max(m + k, 0.0)))


def linf_nodal(u: Field) -> float:
    if u.values.size == 0:
        return 0.0
    return float(np.max(np.abs(u.values)))
