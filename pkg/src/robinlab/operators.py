"""Discrete Laplacians with Robin or Dirichlet boundary closure.

Interior nodes carry the standard 3-point / 5-point second-difference
stencil.  Robin rows eliminate the ghost node through the centered
boundary-derivative relation

    u_ghost = u_inner - 2*h*beta*u_node,

which keeps second-order accuracy; in 1D the resulting boundary row is
diagonal (2 + 2*h*beta)/h^2 with off-diagonal -2/h^2.  At a rectangle
corner both axis directions are closed this way, one ghost per normal.
With the trapezoid quadrature weights D from grid.py the rescaled matrix
D @ A is symmetric and equals the Hessian of the discrete Dirichlet/Robin
energy  1/2*int |grad u|^2 + beta/2 * oint u^2,  exactly -- eigenvalue
work and the parabolic energy ledger both lean on this.

beta = 0 degenerates to the Neumann operator, which annihilates
constants; such operators are flagged singular and refuse direct solves.

Operators are immutable after assembly (the factorization is computed
eagerly) and safe for concurrent solves against different right sides.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .grid import Grid, GridError, ScalarField

__all__ = [
    "RobinOperator",
    "DirichletOperator",
    "SingularOperatorError",
    "LinearSolveError",
    "assemble_robin",
    "assemble_dirichlet",
    "symmetrized",
    "solve_linear",
    "robin_apply",
    "domain_integral",
    "boundary_integral",
]

#: direct factorization above this per-axis resolution is replaced by CG
DIRECT_LIMIT = 512

#: relative residual contract for solve_linear
SOLVE_RTOL = 1e-10


class SingularOperatorError(RuntimeError):
    """Direct solve requested on a singular (beta = 0, Neumann) operator."""


class LinearSolveError(RuntimeError):
    """Linear solve failed to meet the residual contract."""


def _robin_axis_matrix(n: int, h: float, beta: float) -> sp.csr_matrix:
    # 1D second difference with ghost-eliminated Robin ends
    main = np.full(n + 1, 2.0)
    main[0] = main[-1] = 2.0 + 2.0 * h * beta
    lower = np.full(n, -1.0)
    upper = np.full(n, -1.0)
    lower[-1] = -2.0
    upper[0] = -2.0
    A = sp.diags([lower, main, upper], [-1, 0, 1], format="csr")
    return (A / (h * h)).tocsr()


def _identity(n: int) -> sp.csr_matrix:
    return sp.identity(n + 1, format="csr")


@dataclass(frozen=True)
class RobinOperator:
    grid: Grid
    beta: float
    matrix: sp.csr_matrix = field(repr=False)
    is_singular: bool = False
    _solver: object | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class DirichletOperator:
    """Laplacian with identity rows at boundary nodes (zero trace)."""

    grid: Grid
    matrix: sp.csr_matrix = field(repr=False)
    _solver: object | None = field(default=None, repr=False, compare=False)


def _factorize(matrix: sp.csr_matrix, n_per_axis: int):
    if n_per_axis > DIRECT_LIMIT:
        return None  # iterative fallback, see solve_linear
    return spla.splu(matrix.tocsc())


def assemble_robin(grid: Grid, beta: float) -> RobinOperator:
    if not np.isfinite(beta) or beta < 0.0:
        raise GridError(f"beta must be finite and >= 0, got {beta}")
    n = grid.n_per_axis
    if grid.ndim == 1:
        A = _robin_axis_matrix(n, grid.spacing[0], beta)
    else:
        Ax = _robin_axis_matrix(n, grid.spacing[0], beta)
        Ay = _robin_axis_matrix(n, grid.spacing[1], beta)
        I = _identity(n)
        # x-fastest flattening: x stencil acts within a row block
        A = (sp.kron(I, Ax) + sp.kron(Ay, I)).tocsr()
    singular = beta == 0.0
    solver = None if singular else _factorize(A, n)
    return RobinOperator(grid=grid, beta=beta, matrix=A, is_singular=singular,
                         _solver=solver)


def assemble_dirichlet(grid: Grid) -> DirichletOperator:
    n = grid.n_per_axis
    if grid.ndim == 1:
        h = grid.spacing[0]
        main = np.full(n + 1, 2.0) / (h * h)
        off = np.full(n, -1.0) / (h * h)
        A = sp.diags([off, main, off], [-1, 0, 1]).tolil()
    else:
        hx, hy = grid.spacing
        Dx = sp.diags(
            [np.full(n, -1.0), np.full(n + 1, 2.0), np.full(n, -1.0)], [-1, 0, 1]
        ) / (hx * hx)
        Dy = sp.diags(
            [np.full(n, -1.0), np.full(n + 1, 2.0), np.full(n, -1.0)], [-1, 0, 1]
        ) / (hy * hy)
        I = _identity(n)
        A = (sp.kron(I, Dx) + sp.kron(Dy, I)).tolil()
    # boundary rows become identity; callers supply zero boundary data
    for k in np.flatnonzero(grid.boundary_mask):
        A.rows[k] = [int(k)]
        A.data[k] = [1.0]
    A = A.tocsr()
    return DirichletOperator(grid=grid, matrix=A, _solver=_factorize(A, n))


def symmetrized(op: RobinOperator | DirichletOperator) -> sp.csr_matrix:
    """Quadrature-rescaled matrix D @ A; symmetric for Robin assembly."""
    D = sp.diags(op.grid.quad_weights)
    return (D @ op.matrix).tocsr()


def _apply_op(op, u: NDArray) -> NDArray:
    # difference-form evaluation has a far lower rounding floor than the
    # assembled matvec; use it wherever the operator carries its beta
    if isinstance(op, RobinOperator):
        return robin_apply(op.grid, op.beta, u)
    return op.matrix @ u


def _residual(op, u: NDArray, rhs: NDArray) -> float:
    return float(np.abs(_apply_op(op, u) - rhs).max())


def _storage_floor(op, u: NDArray) -> float:
    """Residual floor forced by storing u in float64.

    Rounding the exact solution to doubles perturbs each node by up to
    half an ulp of |u|; pushing that noise through the stencil bounds the
    best residual any algorithm can report.  No tolerance below this is
    meaningful for large-amplitude solutions (e.g. beta -> 0).
    """
    eps_half = float(np.finfo(np.float64).eps) / 2.0
    beta = op.beta if isinstance(op, RobinOperator) else 0.0
    row = sum(4.0 / h**2 + 2.0 * beta / h for h in op.grid.spacing)
    return 2.0 * eps_half * float(np.abs(u).max()) * row


def _solve_cg(op, rhs: NDArray) -> NDArray:
    # large grids: CG on the symmetric rescaled system D A u = D rhs
    S = symmetrized(op)
    S = (S + S.T) * 0.5
    b = op.grid.quad_weights * rhs
    M = sp.diags(1.0 / S.diagonal())
    u = np.zeros_like(rhs)
    for _ in range(8):
        r = b - S @ u
        du, info = spla.cg(S, r, rtol=1e-14, atol=0.0, maxiter=40 * op.grid.node_count, M=M)
        if info != 0 and np.abs(du).max() == 0.0:
            break
        u = u + du
        if _residual(op, u, rhs) <= 0.01 * SOLVE_RTOL * (1.0 + np.abs(rhs).max()):
            break
    return u


def solve_linear(op: RobinOperator | DirichletOperator, rhs: ScalarField) -> ScalarField:
    """Solve op.matrix @ u = rhs with residual <= 1e-10 * (1 + |rhs|_inf).

    Direct sparse factorization plus a few steps of iterative refinement;
    grids beyond DIRECT_LIMIT nodes per axis go through preconditioned CG
    on the symmetrized system instead.
    """
    if rhs.grid is not op.grid and rhs.grid != op.grid:
        raise GridError("right-hand side lives on a different grid")
    if isinstance(op, RobinOperator) and op.is_singular:
        raise SingularOperatorError(
            "beta = 0 gives the Neumann operator (constants in kernel); "
            "no direct solve is defined"
        )
    b = rhs.values
    tol = SOLVE_RTOL * (1.0 + float(np.abs(b).max()))
    if op._solver is None:
        u = _solve_cg(op, b)
    else:
        u = op._solver.solve(b)
        # refinement drives the residual to the rounding floor of the
        # difference-form evaluation
        for _ in range(3):
            if _residual(op, u, b) <= max(0.01 * tol, _storage_floor(op, u)):
                break
            u = u + op._solver.solve(b - _apply_op(op, u))
    res = _residual(op, u, b)
    if res > tol + _storage_floor(op, u):
        raise LinearSolveError(f"linear solve residual {res:.3e} exceeds {tol:.3e}")
    return ScalarField(op.grid, u)


def robin_apply(grid: Grid, beta: float, values: NDArray) -> NDArray[np.float64]:
    """Apply the Robin operator in difference form.

    Matrix-free evaluation that forms nodal differences first and scales
    afterwards.  Nearby nodal values subtract exactly in floating point,
    so the result carries rounding at the size of the *stencil output*
    rather than of 4*u/h^2; nonlinear residual checks use this to reach
    tolerances well below what a sparse matvec can resolve.
    """
    n = grid.n_per_axis
    if grid.ndim == 1:
        u = np.asarray(values)
        h = grid.spacing[0]
        out = np.empty_like(u)
        out[1:-1] = ((u[1:-1] - u[:-2]) + (u[1:-1] - u[2:])) / (h * h)
        out[0] = 2.0 * (u[0] - u[1]) / (h * h) + 2.0 * beta * u[0] / h
        out[-1] = 2.0 * (u[-1] - u[-2]) / (h * h) + 2.0 * beta * u[-1] / h
        return out
    hx, hy = grid.spacing
    U = np.asarray(values).reshape(n + 1, n + 1)  # [j, i], x-fastest flat order
    out = np.empty_like(U)
    ax = np.empty_like(U)
    ax[:, 1:-1] = ((U[:, 1:-1] - U[:, :-2]) + (U[:, 1:-1] - U[:, 2:])) / (hx * hx)
    ax[:, 0] = 2.0 * (U[:, 0] - U[:, 1]) / (hx * hx) + 2.0 * beta * U[:, 0] / hx
    ax[:, -1] = 2.0 * (U[:, -1] - U[:, -2]) / (hx * hx) + 2.0 * beta * U[:, -1] / hx
    ay = np.empty_like(U)
    ay[1:-1, :] = ((U[1:-1, :] - U[:-2, :]) + (U[1:-1, :] - U[2:, :])) / (hy * hy)
    ay[0, :] = 2.0 * (U[0, :] - U[1, :]) / (hy * hy) + 2.0 * beta * U[0, :] / hy
    ay[-1, :] = 2.0 * (U[-1, :] - U[-2, :]) / (hy * hy) + 2.0 * beta * U[-1, :] / hy
    out = ax + ay
    return out.ravel()


def domain_integral(fld: ScalarField) -> float:
    """Trapezoid integral over the domain."""
    return float(np.dot(fld.grid.quad_weights, fld.values))


def boundary_integral(a: ScalarField, b: ScalarField) -> float:
    """Trapezoid integral of a*b over the boundary.

    In 1D the boundary measure is counting measure on the two endpoints,
    so this returns a(0)*b(0) + a(1)*b(1).
    """
    if a.grid is not b.grid and a.grid != b.grid:
        raise GridError("boundary integral requires a shared grid")
    w = a.grid.boundary_weights
    return float(np.dot(w, a.values * b.values))
