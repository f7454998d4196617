"""Stationary solvers for -lap(u) = u^p + f(x) under Robin boundary flux.

The module is organized around the problem's fold structure in beta:

* torsion_report computes the Dirichlet torsion function h (-lap h = 1,
  h = 0 on the boundary), the Robin torsion phi_beta, and the derived
  constants M_h = max h^p, Lambda = (1/(p*M_h))^(1/(p-1)), the
  super-solution gap Lambda - Lambda^p*M_h, and the admissible-source
  bound ((p-1)/p)*Lambda.  The gap equals the bound identically; both
  are computed along separate arithmetic routes so reports can assert
  the identity rather than assume it.

* monotone_iterate runs the fixed-point scheme u_0 = 0,
  -lap u_{j+1} + Robin = u_j^p + f.  The discrete operator is an
  M-matrix, so iterates increase nodewise; bounded iterates converge to
  the minimal nonnegative solution, unbounded ones certify numerical
  nonexistence once they pass the divergence cap.

* find_critical_beta brackets the crossover between those two verdicts
  by bisection; the verdict is monotone in beta (larger beta leaks more
  mass through the boundary), and any observed non-monotonicity aborts.

* linearized_eigenpair returns the smallest eigenvalue of the
  linearization -lap - p*U^(p-1) at a solution U via shifted inverse
  power iteration on the quadrature-symmetrized matrix.  Positivity of
  that eigenvalue is the numerical certificate that U is minimal-stable
  and the quadratic form below is coercive.

* mountain_pass_solution looks for a second solution above the minimal
  one by the classical descent on the reduced functional

      I(v) = 1/2 ||v||_*^2 - int G(x, v+),
      ||v||_*^2 = int |grad v|^2 + beta oint v^2 - p int U^(p-1) v^2,

  where G is the primitive of g(x,v) = (U+v)^p - U^p - p U^(p-1) v in
  its second slot.  A path endpoint e = t*phi1 with I(e) < 0 seeds a ray
  maximization; the maximizer is pushed downhill (gradient taken in the
  ||.||_* inner product) with the ray-maximum constraint re-imposed
  after every step, then polished by Newton.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .grid import Grid, GridError, ProblemSpec, ScalarField, constant_field
from .operators import (
    RobinOperator,
    assemble_dirichlet,
    assemble_robin,
    domain_integral,
    robin_apply,
    solve_linear,
    symmetrized,
)

__all__ = [
    "CONVERGED",
    "DIVERGED",
    "MAX_ITER",
    "TorsionReport",
    "AdmissibilityVerdict",
    "SolveReport",
    "IterationParams",
    "CriticalBetaResult",
    "EigenReport",
    "MountainPassReport",
    "BracketError",
    "InconclusiveProbeError",
    "VerdictOrderError",
    "SingularJacobianError",
    "MountainPassError",
    "torsion_report",
    "check_source_admissibility",
    "stationary_residual",
    "monotone_iterate",
    "newton_refine",
    "find_critical_beta",
    "assert_verdict_monotone",
    "linearized_matrix",
    "linearized_eigenpair",
    "pass_functional",
    "pass_gradient",
    "mountain_pass_solution",
]

CONVERGED = "Converged"
DIVERGED = "Diverged"
MAX_ITER = "MaxIter"


class BracketError(RuntimeError):
    """Bisection bracket endpoints do not straddle the verdict change."""


class InconclusiveProbeError(RuntimeError):
    """A bisection probe hit the iteration cap without a verdict."""


class VerdictOrderError(RuntimeError):
    """Converged/diverged verdicts are not monotone in beta."""


class SingularJacobianError(RuntimeError):
    """Newton linearization is numerically singular (fold proximity)."""


class MountainPassError(RuntimeError):
    """Mountain-pass search failed (collapse, indefinite form, no pass)."""


def _pow(u: NDArray, p: float) -> NDArray[np.float64]:
    # iterates live in the nonnegative cone; clamp guards fractional
    # exponents against -1e-30 style rounding dips
    return np.power(np.maximum(u, 0.0), p)


# ----------------------------------------------------------------------
# torsion functions and derived constants
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TorsionReport:
    grid: Grid
    p: float
    beta: float
    h: ScalarField
    phi_beta: ScalarField
    m_h: float       # max over nodes of h^p
    lam: float       # super-solution amplitude (1/(p*m_h))^(1/(p-1))
    gap: float       # lam - lam^p * m_h
    f_bound: float   # ((p-1)/p) * lam; sources must stay strictly below

    def as_dict(self) -> dict:
        return {
            "M_h": self.m_h,
            "Lambda": self.lam,
            "gap": self.gap,
            "F_bound": self.f_bound,
        }


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    reason: str = ""
    node: int | None = None
    value: float | None = None

    def as_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "reason": self.reason,
            "node": self.node,
            "value": self.value,
        }


def torsion_report(grid: Grid, p: float, beta: float) -> TorsionReport:
    """Solve both torsion problems and derive the source bound.

    Requires p > 1 and beta > 0 (the Robin torsion needs an invertible
    operator).  phi_beta dominates h nodewise; the report refuses to come
    out otherwise, since every bound downstream depends on it.
    """
    if not p > 1.0:
        raise GridError(f"exponent p must be > 1, got {p}")
    if not beta > 0.0:
        raise GridError(f"torsion report needs beta > 0, got {beta}")
    ones = constant_field(grid, 1.0)
    dir_op = assemble_dirichlet(grid)
    rhs = np.where(grid.boundary_mask, 0.0, 1.0)
    h = solve_linear(dir_op, ScalarField(grid, rhs))
    rob_op = assemble_robin(grid, beta)
    phi = solve_linear(rob_op, ones)
    if (phi.values - h.values).min() < -1e-10:
        raise GridError("Robin torsion fell below Dirichlet torsion")
    m_h = float(_pow(h.values, p).max())
    lam = (1.0 / (p * m_h)) ** (1.0 / (p - 1.0))
    gap = lam - lam**p * m_h
    f_bound = (p - 1.0) / p * lam
    return TorsionReport(grid=grid, p=p, beta=beta, h=h, phi_beta=phi,
                         m_h=m_h, lam=lam, gap=gap, f_bound=f_bound)


def check_source_admissibility(report: TorsionReport, f: ScalarField) -> AdmissibilityVerdict:
    """A source is admissible when f is not identically zero and
    0 <= f < f_bound everywhere (strict at every node)."""
    vals = f.values
    if vals.min() < 0.0:
        k = int(vals.argmin())
        return AdmissibilityVerdict(False, "source is negative", k, float(vals[k]))
    if vals.max() == 0.0:
        return AdmissibilityVerdict(False, "source is identically zero")
    k = int(vals.argmax())
    if vals[k] >= report.f_bound:
        return AdmissibilityVerdict(
            False, f"source reaches {vals[k]:.6g} >= bound {report.f_bound:.6g}",
            k, float(vals[k]),
        )
    return AdmissibilityVerdict(True, "0 <= f < bound and f not identically 0")


# ----------------------------------------------------------------------
# monotone iteration and Newton refinement
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class IterationParams:
    tol_increment: float = 1e-10
    tol_residual: float = 1e-8
    max_iter: int = 10000
    divergence_cap: float = 1e6


@dataclass
class SolveReport:
    status: str
    solution: ScalarField | None
    iterations: int
    residual_inf: float
    history: list[tuple[int, float, float]]  # (iter, |u|_inf, increment)
    monotone_violations: int = 0

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "residual_inf": self.residual_inf,
            "monotone_violations": self.monotone_violations,
            "history": [
                {"iter": i, "norm_inf": n, "increment": d} for i, n, d in self.history
            ],
        }


def stationary_residual(spec: ProblemSpec, u: NDArray) -> NDArray[np.float64]:
    """Residual of the stationary equation in difference form.

    Uses the matrix-free stencil so the evaluation floor sits near
    machine epsilon of the stencil output instead of eps*|u|/h^2.
    """
    if isinstance(u, ScalarField):
        u = u.values
    return robin_apply(spec.grid, spec.beta, u) - _pow(u, spec.p) - spec.f.values


def monotone_iterate(spec: ProblemSpec, params: IterationParams = IterationParams()) -> SolveReport:
    """Fixed-point iteration from zero sub-solution.

    Each sweep freezes the reaction at the previous iterate and solves
    one linear Robin problem with the cached factorization.  Iterates
    are nondecreasing (violations beyond 1e-12 are counted and reported,
    never silently clipped).  Convergence requires both a small step and
    a small nonlinear residual; crossing the divergence cap is reported
    as the Diverged verdict, which downstream code reads as numerical
    nonexistence at this beta.  At the crossover itself the verdict is
    whatever the capped iteration reaches first.
    """
    if spec.beta <= 0.0:
        raise GridError("monotone iteration needs beta > 0 for an invertible operator")
    op = assemble_robin(spec.grid, spec.beta)
    fvals = spec.f.values
    u = np.zeros(spec.grid.node_count)
    history: list[tuple[int, float, float]] = []
    violations = 0
    for j in range(1, params.max_iter + 1):
        rhs = _pow(u, spec.p) + fvals
        u_next = solve_linear(op, ScalarField(spec.grid, rhs)).values
        inc = float(np.abs(u_next - u).max())
        violations += int(np.count_nonzero(u_next < u - 1e-12))
        norm = float(np.abs(u_next).max())
        history.append((j, norm, inc))
        if norm > params.divergence_cap:
            return SolveReport(DIVERGED, None, j, float("inf"), history, violations)
        res = float(np.abs(stationary_residual(spec, u_next)).max())
        if inc < params.tol_increment and res < params.tol_residual:
            return SolveReport(CONVERGED, ScalarField(spec.grid, u_next), j, res,
                               history, violations)
        u = u_next
    res = float(np.abs(stationary_residual(spec, u)).max())
    return SolveReport(MAX_ITER, ScalarField(spec.grid, u), params.max_iter, res,
                       history, violations)


def linearized_matrix(grid: Grid, beta: float, p: float, u: NDArray) -> sp.csr_matrix:
    """Robin operator minus the reaction derivative p*u^(p-1).

    Single assembly point shared by Newton's Jacobian and the eigenvalue
    operator, so the two are identical by construction.
    """
    op = assemble_robin(grid, beta)
    return (op.matrix - sp.diags(p * _pow(u, p - 1.0))).tocsr()


def newton_refine(
    spec: ProblemSpec,
    initial: ScalarField,
    tol: float = 1e-12,
    max_steps: int = 50,
) -> SolveReport:
    """Damped Newton on the stationary equation.

    Steps are damped until the residual norm drops and the iterate stays
    inside the nonnegative cone up to -1e-10.  A numerically singular
    Jacobian is raised as SingularJacobianError: the linearization's
    smallest eigenvalue is crossing zero, i.e. the run sits near the
    fold in beta.
    """
    u = initial.values.copy()
    history: list[tuple[int, float, float]] = []
    res_vec = stationary_residual(spec, u)
    res = float(np.abs(res_vec).max())
    for step in range(1, max_steps + 1):
        if res <= tol:
            return SolveReport(CONVERGED, ScalarField(spec.grid, u), step - 1, res, history)
        J = linearized_matrix(spec.grid, spec.beta, spec.p, u)
        try:
            delta = spla.splu(J.tocsc()).solve(-res_vec)
        except RuntimeError as exc:
            raise SingularJacobianError(
                f"singular linearization at step {step} (fold proximity): {exc}"
            ) from exc
        if not np.all(np.isfinite(delta)):
            raise SingularJacobianError(f"non-finite Newton step at step {step}")
        alpha = 1.0
        while alpha >= 1e-10:
            u_try = u + alpha * delta
            if u_try.min() >= -1e-10:
                try_vec = stationary_residual(spec, u_try)
                try_res = float(np.abs(try_vec).max())
                if try_res < res:
                    break
            alpha *= 0.5
        else:
            history.append((step, float(np.abs(u).max()), 0.0))
            return SolveReport(MAX_ITER, ScalarField(spec.grid, u), step, res, history)
        history.append((step, float(np.abs(u_try).max()), float(np.abs(alpha * delta).max())))
        u, res_vec, res = u_try, try_vec, try_res
    return SolveReport(CONVERGED if res <= tol else MAX_ITER,
                       ScalarField(spec.grid, u), max_steps, res, history)


# ----------------------------------------------------------------------
# critical beta by bisection on the iteration verdict
# ----------------------------------------------------------------------

@dataclass
class CriticalBetaResult:
    beta_lo: float
    beta_hi: float
    width: float
    probes: list[tuple[float, str]]

    def as_dict(self) -> dict:
        return {
            "beta_lo": self.beta_lo,
            "beta_hi": self.beta_hi,
            "width": self.width,
            "probes": [{"beta": b, "status": s} for b, s in self.probes],
        }


def assert_verdict_monotone(probes: Sequence[tuple[float, str]]) -> None:
    """Every diverged probe must sit below every converged probe."""
    div = [b for b, s in probes if s == DIVERGED]
    con = [b for b, s in probes if s == CONVERGED]
    if div and con and max(div) > min(con):
        raise VerdictOrderError(
            f"diverged at beta={max(div)} above converged at beta={min(con)}; "
            f"probes: {sorted(probes)}"
        )


def find_critical_beta(
    grid: Grid,
    p: float,
    f: ScalarField,
    bracket: tuple[float, float] = (1e-3, 10.0),
    tol: float = 1e-3,
    params: IterationParams = IterationParams(),
) -> CriticalBetaResult:
    """Bisection for the beta below which no bounded solution survives.

    The oracle is the monotone-iteration verdict.  The lower endpoint
    must diverge and the upper must converge, else the bracket is
    rejected.  A probe that exhausts the iteration cap is inconclusive
    and aborts loudly rather than being guessed at.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (0.0 < lo < hi):
        raise BracketError(f"need 0 < lo < hi, got ({lo}, {hi})")
    probes: list[tuple[float, str]] = []

    def verdict(beta: float) -> str:
        spec = ProblemSpec(grid=grid, p=p, beta=beta, f=f)
        status = monotone_iterate(spec, params).status
        probes.append((beta, status))
        if status == MAX_ITER:
            raise InconclusiveProbeError(
                f"iteration cap {params.max_iter} hit at beta={beta}; "
                "raise max_iter or widen the tolerance"
            )
        return status

    if verdict(lo) != DIVERGED:
        raise BracketError(f"lower bracket beta={lo} did not diverge")
    if verdict(hi) != CONVERGED:
        raise BracketError(f"upper bracket beta={hi} did not converge")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if verdict(mid) == DIVERGED:
            lo = mid
        else:
            hi = mid
    assert_verdict_monotone(probes)
    return CriticalBetaResult(beta_lo=lo, beta_hi=hi, width=hi - lo, probes=probes)


# ----------------------------------------------------------------------
# smallest eigenvalue of the linearization at a solution
# ----------------------------------------------------------------------

@dataclass
class EigenReport:
    lambda1: float
    phi1: ScalarField     # positive, sup-normalized
    iterations: int
    residual: float

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def _sym_similarity(grid: Grid, A: sp.csr_matrix) -> sp.csr_matrix:
    # W^(1/2) A W^(-1/2) with W the quadrature weights: symmetric because
    # W A is, and it shares A's spectrum
    rt = np.sqrt(grid.quad_weights)
    C = sp.diags(rt) @ A @ sp.diags(1.0 / rt)
    return ((C + C.T) * 0.5).tocsr()


def linearized_eigenpair(
    spec: ProblemSpec,
    U: ScalarField,
    tol: float = 1e-8,
    max_rounds: int = 12,
    iters_per_round: int = 60,
) -> EigenReport:
    """Shifted inverse power iteration for the bottom eigenpair.

    Works on the weight-symmetrized similarity of the linearization, with
    the initial shift strictly below the Gershgorin lower bound (the
    shifted matrix is then an M-matrix, so iterates started positive stay
    positive and the limit eigenvector is positive).  The shift is pulled
    up toward the Rayleigh estimate between rounds to sharpen the
    contraction.  The residual is measured on the original unsymmetrized
    operator with the eigenvector sup-normalized.
    """
    C = _sym_similarity(spec.grid, linearized_matrix(spec.grid, spec.beta, spec.p, U.values))
    d = C.diagonal()
    off = np.asarray(np.abs(C).sum(axis=1)).ravel() - np.abs(d)
    gersh = float((d - off).min())
    shift = gersh - 1e-3 * (1.0 + abs(gersh))
    x = np.ones(spec.grid.node_count)
    x /= np.linalg.norm(x)
    rt = np.sqrt(spec.grid.quad_weights)
    total = 0
    lam = float("nan")
    residual = float("inf")
    for _ in range(max_rounds):
        lu = spla.splu((C - shift * sp.identity(C.shape[0], format="csr")).tocsc())
        for _ in range(iters_per_round):
            y = lu.solve(x)
            x = y / np.linalg.norm(y)
            total += 1
            lam = float(x @ (C @ x))
            phi = x / rt
            phi = phi / np.abs(phi).max()
            if phi[np.abs(phi).argmax()] < 0:
                phi = -phi
            r = (
                robin_apply(spec.grid, spec.beta, phi)
                - spec.p * _pow(U.values, spec.p - 1.0) * phi
                - lam * phi
            )
            residual = float(np.abs(r).max())
            if residual <= tol:
                if phi.min() < -1e-10:
                    raise GridError("bottom eigenvector lost positivity")
                return EigenReport(lambda1=lam, phi1=ScalarField(spec.grid, phi),
                                   iterations=total, residual=residual)
        # re-shift just below the current Rayleigh estimate (always >= lambda1)
        shift = lam - max(1e-6 * (1.0 + abs(lam)), residual)
    raise GridError(
        f"eigen iteration stalled at residual {residual:.3e} (target {tol:.3e})"
    )


# ----------------------------------------------------------------------
# mountain-pass search for a second solution
# ----------------------------------------------------------------------

@dataclass
class MountainPassReport:
    status: str
    u: ScalarField            # U + v
    v: ScalarField            # the positive increment
    pass_value: float         # I(v) at the accepted critical point
    iterations: int
    residual_inf: float       # residual of the increment equation
    history: list[tuple[int, float, float, float]]  # (iter, I, |grad|_inf, max v)
    v_descent: ScalarField | None = None  # increment before the Newton polish

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "pass_value": self.pass_value,
            "iterations": self.iterations,
            "residual_inf": self.residual_inf,
        }


def _G_closed(Uv: NDArray, vplus: NDArray, p: float) -> NDArray:
    # primitive of g in v, evaluated in closed form (no quadrature in v)
    return (
        (_pow(Uv + vplus, p + 1.0) - _pow(Uv, p + 1.0)) / (p + 1.0)
        - _pow(Uv, p) * vplus
        - 0.5 * p * _pow(Uv, p - 1.0) * vplus * vplus
    )


def _g(Uv: NDArray, vplus: NDArray, p: float) -> NDArray:
    return _pow(Uv + vplus, p) - _pow(Uv, p) - p * _pow(Uv, p - 1.0) * vplus


def pass_functional(spec: ProblemSpec, U: ScalarField, SU: sp.csr_matrix, v: NDArray) -> float:
    """I(v) = 1/2 v' SU v - int G(x, v+), with SU the symmetrized form."""
    vplus = np.maximum(v, 0.0)
    quad = 0.5 * float(v @ (SU @ v))
    return quad - float(spec.grid.quad_weights @ _G_closed(U.values, vplus, spec.p))


def pass_gradient(spec: ProblemSpec, U: ScalarField, SU: sp.csr_matrix, v: NDArray) -> NDArray:
    vplus = np.maximum(v, 0.0)
    return SU @ v - spec.grid.quad_weights * _g(U.values, vplus, spec.p)


def _ray_max(I, w: NDArray, s_seed: float) -> tuple[float, float]:
    """Maximize s -> I(s*w) over s > 0.

    I is zero with zero slope at s = 0 and drops to -inf for large s, so
    a maximizer exists whenever the quadratic part is positive.  Expands
    an upper bound until I goes negative, then runs bounded scalar
    optimization.
    """
    from scipy.optimize import minimize_scalar

    s_hi = max(s_seed, 1e-6)
    val = I(s_hi * w)
    grow = 0
    while val > 0.0 and grow < 200:
        s_hi *= 2.0
        val = I(s_hi * w)
        grow += 1
    if grow >= 200:
        raise MountainPassError("functional never became negative along the ray")
    res = minimize_scalar(
        lambda s: -I(s * w), bounds=(0.0, s_hi), method="bounded",
        options={"xatol": 1e-12 * s_hi},
    )
    s_star = float(res.x)
    if s_star <= 1e-10:
        raise MountainPassError("ray maximizer collapsed to the origin")
    return s_star, float(-res.fun)


def _newton_increment_polish(
    spec: ProblemSpec,
    U: ScalarField,
    v: NDArray,
    tol: float,
    max_steps: int = 40,
) -> tuple[NDArray, float]:
    """Newton on the increment equation -lap v + Robin = g(x,v) + p U^(p-1) v."""
    grid, p, beta = spec.grid, spec.p, spec.beta
    Uv = U.values
    op = assemble_robin(grid, beta)

    def F(vv: NDArray) -> NDArray:
        vp = np.maximum(vv, 0.0)
        rhs = _pow(Uv + vp, p) - _pow(Uv, p) + p * _pow(Uv, p - 1.0) * (vv - vp)
        return robin_apply(grid, beta, vv) - rhs

    res_vec = F(v)
    res = float(np.abs(res_vec).max())
    scale0 = float(np.abs(v).max())
    for _ in range(max_steps):
        if res <= tol:
            break
        slope = np.where(v > 0.0, _pow(Uv + np.maximum(v, 0.0), p - 1.0), _pow(Uv, p - 1.0))
        J = op.matrix - sp.diags(p * slope)
        try:
            delta = spla.splu(J.tocsc()).solve(-res_vec)
        except RuntimeError as exc:
            raise MountainPassError(f"singular polish Jacobian: {exc}") from exc
        alpha = 1.0
        while alpha >= 1e-10:
            v_try = v + alpha * delta
            try_vec = F(v_try)
            try_res = float(np.abs(try_vec).max())
            if try_res < res:
                break
            alpha *= 0.5
        else:
            break
        v, res_vec, res = v_try, try_vec, try_res
        if float(np.abs(v).max()) < 1e-8 * max(scale0, 1.0):
            raise MountainPassError("polish collapsed toward the minimal solution")
    return v, res


def mountain_pass_solution(
    spec: ProblemSpec,
    U: ScalarField,
    grad_tol: float = 1e-6,
    max_outer: int = 800,
    residual_tol: float = 1e-8,
) -> MountainPassReport:
    """Second solution above the minimal one, by constrained descent.

    Requires the linearization at U to have a positive bottom eigenvalue
    (checked; the quadratic part of I is then positive definite).  The
    endpoint e = t*phi1 is scaled until I(e) < 0, the ray through it is
    maximized, and the maximizer is steepest-descended in the ||.||_*
    metric with the ray-max constraint re-imposed each step.  Newton
    polish finishes the increment equation; the returned u = U + v must
    dominate U strictly at interior nodes.
    """
    eig = linearized_eigenpair(spec, U)
    if eig.lambda1 <= 0.0:
        raise MountainPassError(
            f"quadratic form is not positive (lambda1 = {eig.lambda1:.6g}); "
            "beta is at or below the critical value"
        )
    grid = spec.grid
    A = assemble_robin(grid, spec.beta)
    SU = symmetrized(A) - sp.diags(
        grid.quad_weights * spec.p * _pow(U.values, spec.p - 1.0)
    )
    SU = ((SU + SU.T) * 0.5).tocsr()
    SU_lu = spla.splu(SU.tocsc())

    def I(v: NDArray) -> float:
        return pass_functional(spec, U, SU, v)

    def gradI(v: NDArray) -> NDArray:
        return pass_gradient(spec, U, SU, v)

    e = eig.phi1.values.copy()
    t = 1.0
    for _ in range(80):
        if I(t * e) < 0.0:
            break
        t *= 2.0
    else:
        raise MountainPassError("could not find a negative endpoint along phi1")

    s, level = _ray_max(I, t * e, 1.0)
    w = s * t * e
    history: list[tuple[int, float, float, float]] = []
    it = 0
    for it in range(1, max_outer + 1):
        g = gradI(w)
        gn = float(np.abs(g).max())
        history.append((it, I(w), gn, float(w.max())))
        if gn <= grad_tol:
            break
        # descent direction in the ||.||_* metric: SU d = grad
        dvec = SU_lu.solve(g)
        base = I(w)
        alpha = 1.0
        accepted = False
        while alpha >= 1e-12:
            trial = w - alpha * dvec
            if trial.max() <= 0.0:
                alpha *= 0.5
                continue
            s_t, lvl = _ray_max(I, trial, 1.0)
            cand = s_t * trial
            if lvl < base - 1e-14 * (1.0 + abs(base)):
                w = cand
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        if float(w.max()) < 1e-8:
            raise MountainPassError("descent collapsed toward the minimal solution")

    v_descent = w.copy()
    v, res = _newton_increment_polish(spec, U, w, tol=min(residual_tol, 1e-13) * 10)
    if res > residual_tol:
        raise MountainPassError(f"increment residual {res:.3e} above {residual_tol:.3e}")
    level = I(v)
    if level <= 0.0:
        raise MountainPassError(f"pass level I(v) = {level:.6g} is not positive")
    interior = ~grid.boundary_mask
    if (v[interior]).min() < 1e-10:
        raise MountainPassError("second solution does not dominate the minimal one")
    u2 = ScalarField(grid, U.values + v)
    history.append((it + 1, level, float(np.abs(gradI(v)).max()), float(v.max())))
    return MountainPassReport(
        status=CONVERGED,
        u=u2,
        v=ScalarField(grid, v),
        pass_value=level,
        iterations=it,
        residual_inf=res,
        history=history,
        v_descent=ScalarField(grid, v_descent),
    )
