"""Semilinear heat flow u_t - lap(u) = u^p + f with Robin boundary flux.

Time stepping is first-order IMEX: diffusion implicit, reaction explicit,

    (Id + dt*A) u(n+1) = u(n) + dt*(u(n)^p + f),

with A the Robin operator.  One sparse factorization per distinct dt is
cached; halving/doubling keeps the set of distinct dt values tiny.

Step control rejects and halves dt when the sup-norm grows faster than
the growth cap in a single step or when the relative increment
|du|_inf / (1 + |u|_inf) exceeds its cap, and doubles dt (capped at dt0)
after 20 consecutive quiet steps.  The growth cap defaults to 1.5% per
step: a first-order reaction step is late on blow-up trajectories by
roughly the per-step growth fraction, so a 10% cap would misplace
blow-up times by several percent while 1.5% keeps them within the 2%
reporting target.

A run ends in one of three verdicts: ConvergedToSteady (the discrete
time derivative fell below steady_tol; the limit is a stationary
solution of the scheme by construction), BlowUp (sup-norm passed the
cap while dt was pinned at dt_min with still-increasing growth rate),
or GlobalBounded (reached t_end with neither).  dt_min reached without
the blow-up signature raises StiffnessFailure instead of guessing.

Energy bookkeeping follows the discrete functional

    E(u) = 1/2 u' S u - int( u^(p+1)/(p+1) + f u ),

where S is the quadrature-symmetrized Robin matrix, which is exactly
the Hessian of the quadratic part; each accepted step logs the
dissipation int |u_t|^2 and the defect of the identity dE = -dt*int
|u_t|^2 so energy monotonicity can be audited after the fact.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.typing import NDArray

from .grid import Grid, GridError, Interval, ProblemSpec, Rectangle, ScalarField
from .operators import assemble_robin, domain_integral, symmetrized
from .orderings import build_threshold_datum

__all__ = [
    "GLOBAL_BOUNDED",
    "STEADY",
    "BLOWUP",
    "EvolutionConfig",
    "TraceSample",
    "EnergyTrace",
    "ThresholdVerdict",
    "StiffnessFailure",
    "EnergyFloorError",
    "energy",
    "energy_floor",
    "evolve",
    "trace_to_csv",
    "trace_from_csv",
    "threshold_experiment",
    "homogeneous_threshold",
    "boundedness_probe",
]

GLOBAL_BOUNDED = "GlobalBounded"
STEADY = "ConvergedToSteady"
BLOWUP = "BlowUp"

_TRACE_HEADER = "t,dt,max_u,E,dissipation,identity_residual"
_FMT = "%.17g"


class StiffnessFailure(RuntimeError):
    """dt hit dt_min without the blow-up signature."""


class EnergyFloorError(AssertionError):
    """Energy fell below the global-existence floor on a non-blow-up run."""


@dataclass(frozen=True)
class EvolutionConfig:
    dt0: float = 0.01
    t_end: float | None = None          # None: 50 diffusion times of the domain
    blowup_cap: float = 1e6
    dt_min: float = 1e-12
    steady_tol: float = 1e-9
    growth_cap: float = 0.015           # max relative sup-norm growth per step
    increment_cap: float = 0.1          # cap on |du|_inf / (1 + |u|_inf)
    quiet_steps_to_double: int = 20
    sample_stride: int = 1
    max_steps: int = 500_000
    disable_diffusion: bool = False     # test hook: pure reaction ODE per node
    scheme: str = "imex"

    def __post_init__(self) -> None:
        if self.scheme != "imex":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (self.dt0 > 0 and self.dt_min > 0 and self.dt_min <= self.dt0):
            raise ValueError("need 0 < dt_min <= dt0")
        if not (0 < self.growth_cap and 0 < self.increment_cap):
            raise ValueError("growth and increment caps must be positive")


@dataclass(frozen=True)
class TraceSample:
    t: float
    dt: float
    max_u: float
    energy: float
    dissipation: float
    identity_residual: float


@dataclass
class EnergyTrace:
    samples: list[TraceSample]
    verdict: str
    t_detect: float | None
    t_final: float
    final: ScalarField | None
    moments: list[tuple[float, float, float, float]] | None = None
    states: list[tuple[float, NDArray]] | None = None

    @property
    def limit(self) -> ScalarField | None:
        return self.final if self.verdict == STEADY else None


def _default_t_end(grid: Grid) -> float:
    if isinstance(grid.kind, Interval):
        L = grid.kind.b - grid.kind.a
    else:
        L = max(grid.kind.bx - grid.kind.ax, grid.kind.by - grid.kind.ay)
    return 50.0 * L * L


def energy(spec: ProblemSpec, u: ScalarField) -> float:
    S = symmetrized(assemble_robin(spec.grid, spec.beta))
    return _energy_values(spec, S, u.values)


def _energy_values(spec: ProblemSpec, S: sp.csr_matrix, u: NDArray) -> float:
    w = spec.grid.quad_weights
    quad = 0.5 * float(u @ (S @ u))
    up = np.power(np.maximum(u, 0.0), spec.p + 1.0)
    return quad - float(w @ (up / (spec.p + 1.0) + spec.f.values * u))


def energy_floor(spec: ProblemSpec) -> float:
    """Lower energy bound that every globally bounded run must respect:

        E(t) >= -1/4 * (2^(p+1) * p / (p-1))^(1/p) * int f^((p+1)/p).

    Crossing below it is a certificate of finite-time blow-up.
    """
    p = spec.p
    c = (2.0 ** (p + 1.0) * p / (p - 1.0)) ** (1.0 / p)
    fint = float(spec.grid.quad_weights @ np.power(spec.f.values, (p + 1.0) / p))
    return -0.25 * c * fint


def evolve(
    spec: ProblemSpec,
    u0: ScalarField,
    cfg: EvolutionConfig = EvolutionConfig(),
    record_moments: bool = False,
    record_states: bool = False,
) -> EnergyTrace:
    """Run the IMEX flow from u0 until steady state, blow-up, or t_end."""
    if u0.min() < 0.0:
        raise GridError("initial datum must be nonnegative")
    if spec.beta <= 0.0 and not cfg.disable_diffusion:
        raise GridError("evolution needs beta > 0 for an invertible implicit step")
    grid = spec.grid
    p = spec.p
    fvals = spec.f.values
    fmax = float(fvals.max())
    w = grid.quad_weights
    A = None if cfg.disable_diffusion else assemble_robin(grid, spec.beta)
    S = symmetrized(assemble_robin(grid, spec.beta))
    t_end = cfg.t_end if cfg.t_end is not None else _default_t_end(grid)
    solvers: dict[float, object] = {}

    def step(u: NDArray, dt: float) -> NDArray:
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = u + dt * (np.power(np.maximum(u, 0.0), p) + fvals)
        if cfg.disable_diffusion or not np.all(np.isfinite(rhs)):
            return rhs
        lu = solvers.get(dt)
        if lu is None:
            lu = spla.splu((sp.identity(grid.node_count, format="csr") + dt * A.matrix).tocsc())
            solvers[dt] = lu
        return lu.solve(rhs)

    u = u0.values.copy()
    max_u = float(np.abs(u).max())
    E = _energy_values(spec, S, u)
    t = 0.0
    dt = cfg.dt0
    quiet = 0
    forced = 0
    growth_hist: deque[float] = deque(maxlen=3)
    samples = [TraceSample(0.0, 0.0, max_u, E, 0.0, 0.0)]
    moments = [(0.0, float(w @ (u * u)),
                float(w @ np.power(np.maximum(u, 0.0), p + 1.0)),
                float(w @ (fvals * u)))] if record_moments else None
    states = [(0.0, u.copy())] if record_states else None
    verdict = GLOBAL_BOUNDED
    t_detect: float | None = None
    accepted = 0
    recorded_at = 0

    def record(sample: TraceSample, uu: NDArray) -> None:
        nonlocal recorded_at
        samples.append(sample)
        recorded_at = accepted
        if moments is not None:
            moments.append((sample.t, float(w @ (uu * uu)),
                            float(w @ np.power(np.maximum(uu, 0.0), p + 1.0)),
                            float(w @ (fvals * uu))))
        if states is not None:
            states.append((sample.t, uu.copy()))

    steps = 0
    while t < t_end * (1.0 - 1e-14):
        steps += 1
        if steps > cfg.max_steps:
            raise StiffnessFailure(f"step budget {cfg.max_steps} exhausted at t={t:.6g}")
        dt_eff = min(dt, t_end - t)
        trial = step(u, dt_eff)
        finite = bool(np.all(np.isfinite(trial)))
        at_floor = dt <= cfg.dt_min * (1.0 + 1e-9)
        if finite:
            new_max = float(np.abs(trial).max())
            inc = float(np.abs(trial - u).max())
            # linear forcing dt*f is benign growth; only reaction-driven
            # amplification beyond the cap triggers a halving
            growth_fire = new_max > (1.0 + cfg.growth_cap) * max_u + 2.0 * dt_eff * fmax \
                + 1e-14 * (1.0 + max_u)
            inc_fire = inc > cfg.increment_cap * (1.0 + max_u)
            fire = growth_fire or inc_fire
        else:
            fire = True
        if fire and not at_floor:
            dt = max(dt / 2.0, cfg.dt_min)
            quiet = 0
            continue
        if not finite:
            # overflow at the dt floor: blow-up if the signature was
            # already in place, otherwise an honest failure
            if max_u >= cfg.blowup_cap and _growth_increasing(growth_hist):
                verdict, t_detect = BLOWUP, t
                break
            raise StiffnessFailure(f"non-finite state at t={t:.6g} with dt={dt:.3e}")
        # accept
        accepted += 1
        du = trial - u
        diss = float((du / dt_eff) @ (w * (du / dt_eff)))
        E_new = _energy_values(spec, S, trial)
        identity_residual = E_new - E + dt_eff * diss
        growth_hist.append((new_max - max_u) / dt_eff)
        t += dt_eff
        u, E = trial, E_new
        prev_max, max_u = max_u, new_max
        if accepted % cfg.sample_stride == 0:
            record(TraceSample(t, dt_eff, max_u, E, diss, identity_residual), u)
        if fire:
            forced += 1
            quiet = 0
        else:
            forced = 0
            quiet += 1
            if quiet >= cfg.quiet_steps_to_double:
                dt = min(2.0 * dt, cfg.dt0)
                quiet = 0
        if max_u >= cfg.blowup_cap and at_floor and _growth_increasing(growth_hist):
            verdict, t_detect = BLOWUP, t
            break
        if forced > 50_000:
            raise StiffnessFailure(
                f"dt pinned at dt_min for {forced} steps without blow-up signature"
            )
        if inc / dt_eff < cfg.steady_tol:
            verdict, t_detect = STEADY, t
            break
    if accepted != recorded_at:
        diss = float((du / dt_eff) @ (w * (du / dt_eff))) if accepted else 0.0
        record(TraceSample(t, dt_eff if accepted else 0.0, max_u, E,
                           diss, 0.0), u)
    final = ScalarField(grid, u) if np.all(np.isfinite(u)) else None
    return EnergyTrace(samples=samples, verdict=verdict, t_detect=t_detect,
                       t_final=t, final=final, moments=moments, states=states)


def _growth_increasing(hist: deque[float]) -> bool:
    return len(hist) >= 2 and hist[-1] > hist[-2] > 0.0


# ----------------------------------------------------------------------
# trace serialization
# ----------------------------------------------------------------------

def trace_to_csv(trace: EnergyTrace, path_or_buf) -> None:
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    buf = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        buf.write(_TRACE_HEADER + "\n")
        for s in trace.samples:
            row = (s.t, s.dt, s.max_u, s.energy, s.dissipation, s.identity_residual)
            buf.write(",".join(_FMT % v for v in row) + "\n")
    finally:
        if own:
            buf.close()


def trace_from_csv(path_or_buf) -> list[TraceSample]:
    own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
    buf = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        header = buf.readline().strip()
        if header != _TRACE_HEADER:
            raise ValueError(f"bad trace header {header!r}")
        out = []
        for line in buf:
            if line.strip():
                out.append(TraceSample(*(float(c) for c in line.strip().split(","))))
        return out
    finally:
        if own:
            buf.close()


# ----------------------------------------------------------------------
# threshold experiments
# ----------------------------------------------------------------------

@dataclass
class ThresholdVerdict:
    eta_below: float
    eta_above: float
    below: EnergyTrace
    above: EnergyTrace
    limit_distance: float | None
    failures: list[str]

    @property
    def consistent(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "eta_below": self.eta_below,
            "eta_above": self.eta_above,
            "below_verdict": self.below.verdict,
            "above_verdict": self.above.verdict,
            "below_t_detect": self.below.t_detect,
            "above_t_detect": self.above.t_detect,
            "limit_distance": self.limit_distance,
            "consistent": self.consistent,
            "failures": self.failures,
        }


def _run_leg(spec: ProblemSpec, datum: ScalarField, cfg: EvolutionConfig) -> EnergyTrace:
    return evolve(spec, datum, cfg)


def threshold_experiment(
    spec: ProblemSpec,
    U_min: ScalarField,
    u_other: ScalarField,
    eta_below: float = 0.5,
    eta_above: float = 1.05,
    cfg: EvolutionConfig = EvolutionConfig(),
) -> ThresholdVerdict:
    """Evolve one datum strictly between the ordered solutions and one
    strictly above the larger; expect decay to the minimal solution and
    finite-time blow-up respectively.

    A deviation from the expected pair of verdicts is recorded in
    .failures and never silently accepted.
    """
    if not (0.0 < eta_below < 1.0):
        raise ValueError(f"eta_below must lie in (0,1), got {eta_below}")
    if not eta_above > 1.0:
        raise ValueError(f"eta_above must exceed 1, got {eta_above}")
    below = _run_leg(spec, build_threshold_datum(U_min, u_other, eta_below), cfg)
    above = _run_leg(spec, build_threshold_datum(U_min, u_other, eta_above), cfg)
    failures: list[str] = []
    limit_distance = None
    if below.verdict != STEADY:
        failures.append(f"below-threshold run ended {below.verdict}, expected {STEADY}")
    if below.final is not None:
        limit_distance = float(np.abs(below.final.values - U_min.values).max())
        if below.verdict == STEADY and limit_distance > 1e-6:
            failures.append(
                f"below-threshold limit sits {limit_distance:.3e} from the minimal solution"
            )
    if above.verdict != BLOWUP:
        failures.append(f"above-threshold run ended {above.verdict}, expected {BLOWUP}")
    return ThresholdVerdict(eta_below, eta_above, below, above, limit_distance, failures)


def homogeneous_threshold(
    spec: ProblemSpec,
    U_pos: ScalarField,
    eta_below: float = 0.9,
    eta_above: float = 1.1,
    cfg: EvolutionConfig = EvolutionConfig(),
) -> ThresholdVerdict:
    """Threshold experiment for f identically zero.

    U_pos is a positive stationary solution of the homogeneous problem;
    the data are its scalar multiples eta*U_pos.  Below threshold the
    flow decays to zero, above it blows up.
    """
    if spec.f.max() != 0.0:
        raise GridError("homogeneous threshold requires f identically zero")
    zero = ScalarField(spec.grid, np.zeros(spec.grid.node_count))
    below = _run_leg(spec, build_threshold_datum(zero, U_pos, eta_below), cfg)
    above = _run_leg(spec, build_threshold_datum(zero, U_pos, eta_above), cfg)
    failures: list[str] = []
    limit_distance = None
    if below.verdict != STEADY:
        failures.append(f"below run ended {below.verdict}, expected decay to zero")
    if below.final is not None:
        limit_distance = float(np.abs(below.final.values).max())
        if below.verdict == STEADY and limit_distance > 1e-6:
            failures.append(f"below run settled at {limit_distance:.3e}, expected zero")
    if above.verdict != BLOWUP:
        failures.append(f"above run ended {above.verdict}, expected {BLOWUP}")
    return ThresholdVerdict(eta_below, eta_above, below, above, limit_distance, failures)


def boundedness_probe(
    spec: ProblemSpec,
    u0: ScalarField,
    cfg: EvolutionConfig = EvolutionConfig(),
) -> tuple[float, EnergyTrace]:
    """Evolve and audit the energy floor.

    Returns (sup over the trace of max_u, trace).  Bounded runs must
    keep their energy above the floor; if any recorded energy fell
    below it while the run did not end in blow-up, this raises.
    """
    trace = evolve(spec, u0, cfg)
    floor = energy_floor(spec)
    slack = 1e-9 * (1.0 + abs(floor))
    dipped = [s for s in trace.samples if s.energy < floor - slack]
    if dipped and trace.verdict != BLOWUP:
        raise EnergyFloorError(
            f"energy reached {min(s.energy for s in dipped):.6g} below floor "
            f"{floor:.6g} on a {trace.verdict} run"
        )
    bound = max(s.max_u for s in trace.samples)
    return bound, trace
