"""Discrete domains and nodal scalar fields.

Node-centered uniform grids on an interval (a, b) or an axis-aligned
rectangle (ax, bx) x (ay, by).  Nodes include the boundary, so boundary
conditions are imposed at nodes; a rectangle corner lies on two sides and
carries both outward normals.

Quadrature is nodal trapezoid: weight h^d at interior nodes, h^d/2 on
faces, h^d/4 at corners.  These weights are not a convenience choice --
they make the diagonally rescaled Robin operator exactly the Hessian of
the discrete energy (see operators.py), which the parabolic bookkeeping
relies on.

Grids and fields are immutable after construction (backing arrays are
frozen) and safe to share across concurrent workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Interval",
    "Rectangle",
    "Grid",
    "ScalarField",
    "ProblemSpec",
    "GridError",
    "make_grid",
    "field_from_function",
    "constant_field",
    "field_to_csv",
    "field_from_csv",
]

#: significant digits that round-trip any finite double exactly
_FLOAT_FMT = "%.17g"


class GridError(ValueError):
    """Invalid domain description or mismatched grid/field pairing."""


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def validate(self) -> None:
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise GridError("interval endpoints must be finite")
        if not self.a < self.b:
            raise GridError(f"interval requires a < b, got ({self.a}, {self.b})")


@dataclass(frozen=True)
class Rectangle:
    ax: float
    bx: float
    ay: float
    by: float

    def validate(self) -> None:
        vals = (self.ax, self.bx, self.ay, self.by)
        if not all(np.isfinite(v) for v in vals):
            raise GridError("rectangle bounds must be finite")
        if not (self.ax < self.bx and self.ay < self.by):
            raise GridError(f"rectangle requires ax < bx and ay < by, got {vals}")


def _axis_weights(n: int, h: float) -> NDArray[np.float64]:
    # 1D trapezoid: h at interior nodes, h/2 at the two endpoints
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2.0
    return w


def _freeze(a: NDArray) -> NDArray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid over an Interval or Rectangle.

    Node ordering is x-fastest: in 2D the flat index of node (i, j) is
    j*(n+1) + i, matching the CSV row order emitted by field_to_csv.
    """

    kind: Interval | Rectangle
    n_per_axis: int
    # derived geometry, filled by make_grid
    ndim: int = field(init=False)
    spacing: tuple[float, ...] = field(init=False)
    node_count: int = field(init=False)
    coords: NDArray[np.float64] = field(init=False, repr=False)
    boundary_mask: NDArray[np.bool_] = field(init=False, repr=False)
    boundary_normals: tuple[tuple[int, tuple[str, ...]], ...] = field(
        init=False, repr=False
    )
    quad_weights: NDArray[np.float64] = field(init=False, repr=False)
    boundary_weights: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.kind.validate()
        if self.n_per_axis < 4:
            raise GridError(f"n_per_axis must be >= 4, got {self.n_per_axis}")
        n = self.n_per_axis
        if isinstance(self.kind, Interval):
            h = (self.kind.b - self.kind.a) / n
            x = self.kind.a + h * np.arange(n + 1)
            coords = x[:, None].copy()
            bmask = np.zeros(n + 1, dtype=bool)
            bmask[[0, -1]] = True
            normals = ((0, ("-x",)), (n, ("+x",)))
            qw = _axis_weights(n, h)
            bw = np.zeros(n + 1)
            # the boundary of an interval is two points with counting measure
            bw[[0, -1]] = 1.0
            object.__setattr__(self, "ndim", 1)
            object.__setattr__(self, "spacing", (h,))
        else:
            hx = (self.kind.bx - self.kind.ax) / n
            hy = (self.kind.by - self.kind.ay) / n
            x = self.kind.ax + hx * np.arange(n + 1)
            y = self.kind.ay + hy * np.arange(n + 1)
            X, Y = np.meshgrid(x, y, indexing="xy")  # rows j, cols i
            coords = np.column_stack([X.ravel(), Y.ravel()])
            ii, jj = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="xy")
            ii = ii.ravel()
            jj = jj.ravel()
            bmask = (ii == 0) | (ii == n) | (jj == 0) | (jj == n)
            normal_list: list[tuple[int, tuple[str, ...]]] = []
            for k in np.flatnonzero(bmask):
                tags: list[str] = []
                if ii[k] == 0:
                    tags.append("-x")
                if ii[k] == n:
                    tags.append("+x")
                if jj[k] == 0:
                    tags.append("-y")
                if jj[k] == n:
                    tags.append("+y")
                normal_list.append((int(k), tuple(tags)))
            normals = tuple(normal_list)
            wx = _axis_weights(n, hx)
            wy = _axis_weights(n, hy)
            qw = (wy[:, None] * wx[None, :]).ravel()
            # line measure on the four sides; corners belong to two sides
            bw = np.zeros((n + 1) * (n + 1))
            for k, tags in normal_list:
                w = 0.0
                if "-x" in tags or "+x" in tags:
                    w += wy[jj[k]]
                if "-y" in tags or "+y" in tags:
                    w += wx[ii[k]]
                bw[k] = w
            object.__setattr__(self, "ndim", 2)
            object.__setattr__(self, "spacing", (hx, hy))
        object.__setattr__(self, "node_count", coords.shape[0])
        object.__setattr__(self, "coords", _freeze(coords))
        object.__setattr__(self, "boundary_mask", _freeze(bmask))
        object.__setattr__(self, "boundary_normals", normals)
        object.__setattr__(self, "quad_weights", _freeze(qw))
        object.__setattr__(self, "boundary_weights", _freeze(bw))

    @property
    def interior_count(self) -> int:
        return self.node_count - int(self.boundary_mask.sum())

    @property
    def boundary_count(self) -> int:
        return int(self.boundary_mask.sum())

    def shape(self) -> tuple[int, ...]:
        n = self.n_per_axis + 1
        return (n,) if self.ndim == 1 else (n, n)


def make_grid(kind: Interval | Rectangle, n_per_axis: int) -> Grid:
    """Build a grid, validating bounds and resolution."""
    return Grid(kind=kind, n_per_axis=int(n_per_axis))


@dataclass(frozen=True)
class ScalarField:
    """Nodal values over a grid, in the grid's node order."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.node_count,):
            raise GridError(
                f"field has {vals.shape} values for {self.grid.node_count} nodes"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("field values must be finite")
        if vals is self.values and vals.flags.writeable:
            vals = vals.copy()
        object.__setattr__(self, "values", _freeze(vals))

    def max(self) -> float:
        return float(self.values.max())

    def min(self) -> float:
        return float(self.values.min())


def field_from_function(grid: Grid, rule: Callable[..., float]) -> ScalarField:
    """Sample rule(x) or rule(x, y) at every node."""
    if grid.ndim == 1:
        vals = np.array([float(rule(x)) for (x,) in grid.coords])
    else:
        vals = np.array([float(rule(x, y)) for (x, y) in grid.coords])
    return ScalarField(grid, vals)


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.node_count, float(value)))


@dataclass(frozen=True)
class ProblemSpec:
    """Stationary problem data: -lap(u) = u^p + f with du/dnu + beta*u = 0.

    Requires p > 1, beta >= 0 and f >= 0 everywhere on the grid.  f may be
    identically zero (the homogeneous problem); admissibility of a nonzero
    f against the torsion bound is a separate check in elliptic.py.
    """

    grid: Grid
    p: float
    beta: float
    f: ScalarField

    def __post_init__(self) -> None:
        if not np.isfinite(self.p) or self.p <= 1.0:
            raise GridError(f"exponent p must be finite and > 1, got {self.p}")
        if not np.isfinite(self.beta) or self.beta < 0.0:
            raise GridError(f"beta must be finite and >= 0, got {self.beta}")
        if self.f.grid is not self.grid and self.f.grid != self.grid:
            raise GridError("source field lives on a different grid")
        if self.f.min() < 0.0:
            raise GridError(f"source must be nonnegative, min is {self.f.min()}")


# ----------------------------------------------------------------------
# delimited field output: x[,y],value rows in node order, 17 significant
# digits so a write/read cycle reproduces the exact bits
# ----------------------------------------------------------------------

def field_to_csv(fld: ScalarField, path_or_buf) -> None:
    grid = fld.grid
    header = "x,value" if grid.ndim == 1 else "x,y,value"
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    buf = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        buf.write(header + "\n")
        for row, v in zip(grid.coords, fld.values):
            cells = [_FLOAT_FMT % c for c in row] + [_FLOAT_FMT % v]
            buf.write(",".join(cells) + "\n")
    finally:
        if own:
            buf.close()


def field_from_csv(grid: Grid, path_or_buf) -> ScalarField:
    """Read a field written by field_to_csv back onto its grid.

    Node coordinates in the file must match the grid's nodes (same order,
    equal after float round-trip); a mismatch means the file belongs to a
    different discretization and is refused.
    """
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    buf = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        header = buf.readline().strip()
        expect = "x,value" if grid.ndim == 1 else "x,y,value"
        if header != expect:
            raise GridError(f"bad field header {header!r}, expected {expect!r}")
        rows = [line.strip().split(",") for line in buf if line.strip()]
    finally:
        if own:
            buf.close()
    if len(rows) != grid.node_count:
        raise GridError(f"field file has {len(rows)} rows for {grid.node_count} nodes")
    data = np.array([[float(c) for c in r] for r in rows])
    if not np.array_equal(data[:, : grid.ndim], grid.coords):
        raise GridError("node coordinates in file do not match the grid")
    return ScalarField(grid, data[:, -1].copy())
