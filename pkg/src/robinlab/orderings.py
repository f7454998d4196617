"""Scalar ordering facts about x -> x^p and the ordered data built from them.

These are the pointwise ingredients behind the threshold dynamics: the
difference quotient of x^p is increasing, the chord of a convex power
lies above the function between its feet and below outside, and convex
combinations/extrapolations of two ordered stationary solutions are
super- or sub-solutions accordingly.  Everything here is elementary and
exact up to rounding, which is why the parabolic experiments can trust
the residual signs they inherit.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .grid import GridError, ProblemSpec, ScalarField

__all__ = [
    "power_difference_quotient",
    "convexity_gap",
    "build_threshold_datum",
    "intersection_identity_residual",
]

#: below this fraction of b the quotient switches to its series form
_SERIES_CUT = 1e-8


def power_difference_quotient(t: ArrayLike, b: ArrayLike, p: float) -> NDArray[np.float64]:
    """((t + b)^p - b^p) / t, strictly increasing in t > 0 for p > 1.

    For t below 1e-8*b the direct quotient loses all its digits to
    cancellation, so the two-term Taylor expansion around t = 0 is used
    instead: p*b^(p-1) + (p*(p-1)/2)*b^(p-2)*t.  t = 0 returns the limit
    slope p*b^(p-1).
    """
    t = np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(t < 0.0) or np.any(b < 0.0):
        raise ValueError("difference quotient needs t >= 0 and b >= 0")
    t, b = np.broadcast_arrays(t, b)
    small = t < _SERIES_CUT * np.maximum(b, 1e-300)
    out = np.empty(t.shape, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = (np.power(t[~small] + b[~small], p) - np.power(b[~small], p)) / t[~small]
    bs = b[small]
    out[small] = p * np.power(bs, p - 1.0) + 0.5 * p * (p - 1.0) * np.power(
        np.maximum(bs, 1e-300), p - 2.0
    ) * t[small]
    return out if out.ndim else out[()]


def convexity_gap(eta: ArrayLike, a: ArrayLike, b: ArrayLike, p: float) -> NDArray[np.float64]:
    """Chord-minus-function gap of x^p along the segment from b to a:

        eta*a^p + (1-eta)*b^p - (eta*a + (1-eta)*b)^p.

    Positive for eta in (0, 1) and negative for eta > 1 whenever
    a > b >= 0 (convexity, then extrapolation).  Evaluated in the
    factored form above so eta = 0 and eta = 1 return exactly 0.0.
    """
    eta = np.asarray(eta, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    om = 1.0 - eta
    mix = eta * a + om * b
    out = eta * np.power(a, p) + om * np.power(b, p) - np.power(mix, p)
    return out if out.ndim else out[()]


def build_threshold_datum(
    U: ScalarField, u_sol: ScalarField, eta: float
) -> ScalarField:
    """Interpolate (eta < 1) or extrapolate (eta > 1) along u_sol - U.

    With U the minimal stationary solution and u_sol a stationary
    solution above it, the datum eta*(u_sol - U) + U is a strict
    super-solution for 0 < eta < 1 and a strict sub-solution for
    eta > 1; the sign comes pointwise from convexity_gap applied to
    (a, b) = (u_sol, U).
    """
    if u_sol.grid is not U.grid and u_sol.grid != U.grid:
        raise GridError("threshold datum needs both fields on one grid")
    if not (eta > 0.0 and eta != 1.0):
        raise ValueError(f"eta must be positive and != 1, got {eta}")
    if (u_sol.values - U.values).min() < -1e-12:
        raise ValueError("u_sol must dominate U nodewise")
    return ScalarField(U.grid, eta * (u_sol.values - U.values) + U.values)


def intersection_identity_residual(
    spec: ProblemSpec, U: ScalarField, v1: ScalarField, v2: ScalarField
) -> float:
    """Quadrature value of the cross-symmetry integral

        int v1*v2 * [ q(v1) - q(v2) ] dx,
        q(v) = ((U + v)^p - U^p) / v,

    evaluated in the division-free form
    int v2*((U+v1)^p - U^p) - v1*((U+v2)^p - U^p) dx.  At two exact
    increments of stationary solutions the value is zero (the rescaled
    operator is symmetric), so ordered non-intersecting increments of
    true solutions cannot happen: with 0 < v1 < v2 the integrand is
    strictly negative because the difference quotient increases.
    """
    interior = ~spec.grid.boundary_mask
    if v1.values[interior].min() <= 0.0 or v2.values[interior].min() <= 0.0:
        raise ValueError("increments must be positive at interior nodes")
    Uv, p, w = U.values, spec.p, spec.grid.quad_weights
    lhs = v2.values * (np.power(Uv + v1.values, p) - np.power(Uv, p))
    rhs = v1.values * (np.power(Uv + v2.values, p) - np.power(Uv, p))
    return float(w @ (lhs - rhs))
