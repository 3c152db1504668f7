"""Dense, independently assembled reference computations for the tests.

Matrices are built cell by cell with a 20-point Gauss rule and solved with
LAPACK through scipy, sharing nothing with the banded production code
except the mesh geometry.
"""
import numpy as np
from scipy.linalg import eigh, null_space

GAUSS20_X, GAUSS20_W = np.polynomial.legendre.leggauss(20)


def _cells(mesh):
    x0 = mesh.nodes[:-1]
    h = mesh.h
    xq = x0[:, None] + 0.5 * h * (GAUSS20_X[None, :] + 1.0)
    wq = 0.5 * h * GAUSS20_W
    s = 0.5 * (GAUSS20_X + 1.0)
    return xq, wq, 1.0 - s, s


def nodal_at_points(mesh, full_nodal, xq):
    return np.interp(xq, mesh.nodes, full_nodal)


def dense_weighted_mass(mesh, weight):
    """``int w phi_i phi_j`` over interior hats; ``weight(xq)`` evaluated at 20 points per cell."""
    xq, wq, phl, phr = _cells(mesh)
    w = weight(xq) * wq
    n = mesh.n_cells + 1
    full = np.zeros((n, n))
    for k in range(mesh.n_cells):
        full[k, k] += np.sum(w[k] * phl * phl)
        full[k + 1, k + 1] += np.sum(w[k] * phr * phr)
        full[k, k + 1] += np.sum(w[k] * phl * phr)
        full[k + 1, k] += np.sum(w[k] * phl * phr)
    return full[1:-1, 1:-1]


def dense_stiffness(mesh):
    n = mesh.n_cells + 1
    full = np.zeros((n, n))
    loc = np.array([[1.0, -1.0], [-1.0, 1.0]]) / mesh.h
    for k in range(mesh.n_cells):
        full[k : k + 2, k : k + 2] += loc
    return full[1:-1, 1:-1]


def dense_A(problem, u_full):
    mesh = problem.mesh

    def weight(xq):
        uq = nodal_at_points(mesh, u_full, xq)
        return problem.potential(xq) + problem.beta * uq**2

    return 0.5 * dense_stiffness(mesh) + dense_weighted_mass(mesh, weight)


def dense_mass(mesh):
    return dense_weighted_mass(mesh, np.ones_like)


def pencil_pairs(problem, gs, k=2):
    """Smallest ``k`` eigenpairs of (A_u, M), M-normalized."""
    A = dense_A(problem, gs.u.full())
    M = dense_mass(problem.mesh)
    vals, vecs = eigh(A, M, subset_by_index=[0, k - 1])
    return vals, vecs


def weighted_spectrum(problem, gs):
    """All eigenvalues of (theta v, w) = mu a_u(v, w) on the L2 complement of u."""
    mesh = problem.mesh
    u_full = gs.u.full()

    def theta(xq):
        uq = nodal_at_points(mesh, u_full, xq)
        return gs.lam - 2.0 * problem.beta * uq**2

    A = dense_A(problem, u_full)
    M = dense_mass(mesh)
    T = dense_weighted_mass(mesh, theta)
    Q = null_space((M @ gs.u.values)[None, :])
    return eigh(Q.T @ T @ Q, Q.T @ A @ Q, eigvals_only=True)


def dominant(values):
    values = np.asarray(values)
    return values[np.argmax(np.abs(values))]
