"""Acceptance gate: ten headline properties of the laboratory.

Each criterion prints one [PASS]/[FAIL] line. Oracles are recomputed
here from scratch: closed-form torsion, the double sine series, the
transcendental Robin eigenvalue, the separable blow-up time, and
finite differences of the pass functional.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

from robinlab import (
    BLOWUP,
    CONVERGED,
    DIVERGED,
    EvolutionConfig,
    Interval,
    ProblemSpec,
    Rectangle,
    ScalarField,
    assemble_robin,
    build_threshold_datum,
    check_source_admissibility,
    constant_field,
    energy_floor,
    evolve,
    find_critical_beta,
    homogeneous_threshold,
    intersection_identity_residual,
    linearized_eigenpair,
    make_grid,
    monotone_iterate,
    mountain_pass_solution,
    newton_refine,
    pass_functional,
    pass_gradient,
    stationary_residual,
    symmetrized,
    threshold_experiment,
    torsion_report,
)
import scipy.sparse as sp


def report(num: int, label: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {label} ({detail})")
    assert ok, f"criterion {num}: {label} ({detail})"


def series_square_torsion(x: float, y: float, terms: int = 399) -> float:
    m = np.arange(1, terms + 1, 2, dtype=float)
    M, K = np.meshgrid(m, m, indexing="ij")
    c = np.sin(M * np.pi * x) * np.sin(K * np.pi * y) / (M * K * (M * M + K * K))
    return float(16.0 / np.pi**4 * c.sum())


# ----------------------------------------------------------------------
# shared heavy computations
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def grid64():
    return make_grid(Interval(0.0, 1.0), 64)


@pytest.fixture(scope="module")
def bracket64(grid64):
    return find_critical_beta(grid64, 2.0, constant_field(grid64, 1.0),
                              (1e-3, 10.0), 1e-3)


@pytest.fixture(scope="module")
def two_beta_star(grid64, bracket64):
    beta = 2.0 * bracket64.beta_hi
    spec = ProblemSpec(grid64, 2.0, beta, constant_field(grid64, 1.0))
    U = newton_refine(spec, monotone_iterate(spec).solution).solution
    mp = mountain_pass_solution(spec, U)
    return spec, U, mp


# collected (ProblemSpec, EnergyTrace) pairs for the floor criterion
_FLOOR_RUNS: list[tuple[ProblemSpec, object]] = []


@pytest.fixture(scope="module")
def threshold_runs(two_beta_star):
    spec, U, mp = two_beta_star
    verdict = threshold_experiment(spec, U, mp.u, 0.5, 1.05,
                                   EvolutionConfig(dt0=1e-3))
    _FLOOR_RUNS.append((spec, verdict.below))
    _FLOOR_RUNS.append((spec, verdict.above))
    return verdict


# ----------------------------------------------------------------------
# criteria
# ----------------------------------------------------------------------

def test_criterion_01_torsion_oracles():
    g = make_grid(Interval(0.0, 1.0), 64)
    rep = torsion_report(g, 2.0, 1.0)
    x = g.coords[:, 0]
    err_1d = float(np.abs(rep.h.values - x * (1.0 - x) / 2.0).max())

    g2 = make_grid(Rectangle(0.0, 1.0, 0.0, 1.0), 128)
    rep2 = torsion_report(g2, 2.0, 1.0)
    err_2d = abs(rep2.h.values.max() - series_square_torsion(0.5, 0.5))

    gap_ok = True
    for p in (1.5, 2.0, 3.0):
        r = torsion_report(g, p, 1.0)
        gap_ok &= abs(r.gap - r.f_bound) <= 1e-12 * r.f_bound
    report(1, "torsion oracles", err_1d <= 1e-12 and err_2d < 1e-4 and gap_ok,
           f"1D nodewise {err_1d:.2e}; 2D max vs series {err_2d:.2e}; gap==bound at p in {{1.5,2,3}}")


def test_criterion_02_robin_torsion_monotone():
    g = make_grid(Interval(0.0, 1.0), 64)
    x = g.coords[:, 0]
    analytic_err = 0.0
    monotone = True
    prev = None
    for beta in (0.5, 1.0, 2.0, 4.0, 8.0):
        phi = torsion_report(g, 2.0, beta).phi_beta.values
        analytic_err = max(analytic_err,
                           float(np.abs(phi - (x * (1 - x) / 2 + 1.0 / (2 * beta))).max()))
        if prev is not None:
            monotone &= bool(np.all(phi <= prev + 1e-10))
        prev = phi
    report(2, "Robin torsion analytic + monotone in beta",
           analytic_err <= 1e-10 and monotone,
           f"max analytic err {analytic_err:.2e}; nodewise decreasing over 5 betas")


def test_criterion_03_monotone_iteration_random_sources(grid64):
    rng = np.random.default_rng(2024)
    rep = torsion_report(grid64, 2.0, 1.0)
    violations = 0
    capped = 0
    checked = 0
    for k in range(20):
        beta = 2.425 if k % 2 == 0 else 12.0
        raw = rng.uniform(0.2, 1.0, grid64.node_count)
        f = ScalarField(grid64, raw / raw.max() * rng.uniform(0.05, 0.5) * rep.f_bound)
        assert check_source_admissibility(rep, f).admissible
        spec = ProblemSpec(grid64, 2.0, beta, f)
        sol = monotone_iterate(spec)
        violations += sol.monotone_violations
        if sol.status != CONVERGED:
            continue
        phi = torsion_report(grid64, 2.0, beta).phi_beta.values
        lam = rep.lam
        if np.all(lam >= lam**2 * phi**2 + f.values):   # discrete super-solution test
            checked += 1
            capped += int(np.all(sol.solution.values <= lam * phi + 1e-9))
    report(3, "monotone sweeps on 20 random admissible sources",
           violations == 0 and capped == checked and checked > 0,
           f"0 ordering violations; super-solution cap held on {capped}/{checked} applicable runs")


def test_criterion_04_critical_beta_structure(grid64, bracket64):
    statuses = []
    for beta in np.geomspace(1e-3, 10.0, 16):
        spec = ProblemSpec(grid64, 2.0, beta, constant_field(grid64, 1.0))
        statuses.append(monotone_iterate(spec).status)
    flips = sum(1 for a, b in zip(statuses, statuses[1:]) if a != b)
    monotone = flips == 1 and statuses[0] == DIVERGED and statuses[-1] == CONVERGED

    g128 = make_grid(Interval(0.0, 1.0), 128)
    b128 = find_critical_beta(g128, 2.0, constant_field(g128, 1.0), (1e-3, 10.0), 1e-3)
    mid64 = 0.5 * (bracket64.beta_lo + bracket64.beta_hi)
    mid128 = 0.5 * (b128.beta_lo + b128.beta_hi)
    drift = abs(mid64 - mid128) / mid128
    report(4, "critical beta: verdict monotone, bracket tight, grid-stable",
           monotone and bracket64.width <= 1e-3 and drift < 0.05,
           f"1 flip in 16-point sweep; width {bracket64.width:.2e}; n64 vs n128 drift {drift:.2%}")


def test_criterion_05_linearized_eigenvalue(two_beta_star):
    mu = brentq(lambda m: m * np.tan(m / 2.0) - 1.0, 1e-12, np.pi - 1e-9, xtol=1e-15)
    lam_exact = mu * mu
    g256 = make_grid(Interval(0.0, 1.0), 256)
    zero = constant_field(g256, 0.0)
    eig = linearized_eigenpair(ProblemSpec(g256, 2.0, 1.0, zero), zero)
    oracle_err = abs(eig.lambda1 - lam_exact)

    eig_d = linearized_eigenpair(ProblemSpec(g256, 2.0, 1e6, zero), zero)
    dirichlet_rel = abs(eig_d.lambda1 - np.pi**2) / np.pi**2

    spec, U, _ = two_beta_star
    lam_min = linearized_eigenpair(spec, U).lambda1
    rng = np.random.default_rng(7)
    g = spec.grid
    rep = torsion_report(g, 2.0, 1.0)
    audited = 1
    for _ in range(3):
        raw = rng.uniform(0.2, 1.0, g.node_count)
        f = ScalarField(g, raw / raw.max() * 0.1 * rep.f_bound)
        s = ProblemSpec(g, 2.0, spec.beta, f)
        sol = monotone_iterate(s)
        if sol.status != CONVERGED:
            continue  # beta sits below this source's own fold: no solution
        refined = newton_refine(s, sol.solution).solution
        lam_min = min(lam_min, linearized_eigenpair(s, refined).lambda1)
        audited += 1
    report(5, "linearized bottom eigenvalue",
           oracle_err < 1e-3 and dirichlet_rel < 0.01 and lam_min > 0.0 and audited >= 3,
           f"oracle err {oracle_err:.2e} @ n=256; Dirichlet-limit rel {dirichlet_rel:.2e}; "
           f"min lambda1 over {audited} minimal solutions {lam_min:.4f} > 0")


def test_criterion_06_mountain_pass(two_beta_star):
    spec, U, mp = two_beta_star
    g = spec.grid
    SU = symmetrized(assemble_robin(g, spec.beta)) - sp.diags(
        g.quad_weights * 2.0 * U.values
    )
    SU = ((SU + SU.T) * 0.5).tocsr()
    rng = np.random.default_rng(3)
    fd_worst = 0.0
    for _ in range(10):
        v = rng.uniform(-1.0, 2.0, g.node_count)
        d = rng.standard_normal(g.node_count)
        gr = pass_gradient(spec, U, SU, v) @ d
        eps = 1e-6
        fd = (pass_functional(spec, U, SU, v + eps * d)
              - pass_functional(spec, U, SU, v - eps * d)) / (2 * eps)
        fd_worst = max(fd_worst, abs(gr - fd) / max(1.0, abs(fd)))

    scale = 1.0 + float(np.abs(mp.u.values**2 + spec.f.values).max())
    res_norm = np.abs(stationary_residual(spec, mp.u)).max() / scale
    dominates = bool((mp.u.values - U.values)[~g.boundary_mask].min() > 0.0)
    ident = abs(intersection_identity_residual(spec, U, mp.v_descent, mp.v))
    ident_scale = max(1.0, float(mp.v.values.max())) ** (spec.p + 1.0)
    report(6, "mountain-pass second solution",
           fd_worst <= 1e-5 and res_norm <= 1e-12 and dominates
           and ident <= 1e-6 * ident_scale,
           f"grad-vs-FD worst {fd_worst:.1e}; normalized residual {res_norm:.1e}; "
           f"u2 > U inside; cross-identity {ident / ident_scale:.1e} of scale")


def test_criterion_07_scalar_lemmas():
    from robinlab import convexity_gap, power_difference_quotient

    rng = np.random.default_rng(77)
    n = 10_000
    ok = True
    for p in (1.5, 2.0, 3.0):
        t = rng.uniform(0.0, 10.0, n)
        b = rng.uniform(0.0, 10.0, n)
        q = power_difference_quotient(t, b, p)
        ok &= bool(np.all(q >= p * b ** (p - 1.0) - 1e-9 * (1.0 + b ** (p - 1.0))))
        q_up = power_difference_quotient(t, b + rng.uniform(0.0, 5.0, n), p)
        ok &= bool(np.all(q_up >= q - 1e-9 * (1.0 + np.abs(q))))
        eta = rng.uniform(0.0, 1.0, n)
        a2 = rng.uniform(0.0, 8.0, n)
        b2 = rng.uniform(0.0, 8.0, n)
        ok &= bool(np.all(convexity_gap(eta, a2, b2, p) >= -1e-10 * (1 + a2**p + b2**p)))
    report(7, "scalar lemmas, 1e4-sample seeded sweeps", ok,
           "difference-quotient monotone; convex-combination gap sign at p in {1.5,2,3}")


def test_criterion_08_parabolic_oracles():
    g = make_grid(Interval(0.0, 1.0), 32)
    worst_t = 0.0
    for p, u00 in ((2.0, 1.0), (3.0, 1.0), (2.0, 2.0)):
        spec = ProblemSpec(g, p, 1.0, constant_field(g, 0.0))
        tr = evolve(spec, constant_field(g, u00),
                    EvolutionConfig(dt0=1e-3, t_end=5.0, disable_diffusion=True))
        t_exact = u00 ** (1.0 - p) / (p - 1.0)
        assert tr.verdict == BLOWUP
        worst_t = max(worst_t, abs(tr.t_detect - t_exact) / t_exact)

    g64 = make_grid(Interval(0.0, 1.0), 64)
    spec = ProblemSpec(g64, 2.0, 2.425, constant_field(g64, 1.0))
    U = newton_refine(spec, monotone_iterate(spec).solution).solution
    energy_ok = True
    errs = []
    for dt in (2e-3, 1e-3):
        tr = evolve(spec, ScalarField(g64, 0.5 * U.values),
                    EvolutionConfig(dt0=dt, t_end=1.0), record_moments=True)
        _FLOOR_RUNS.append((spec, tr))
        E = np.array([s.energy for s in tr.samples])
        slack = np.abs([s.identity_residual for s in tr.samples])
        energy_ok &= bool(np.all(E[1:] - E[:-1] <= slack[1:] + 1e-12))
        ts = np.array([s.t for s in tr.samples])
        M = np.array(tr.moments)
        lhs = (M[2:, 1] - M[:-2, 1]) / (ts[2:] - ts[:-2])
        k = slice(1, -1)
        rhs = -4.0 * E[k] + (2.0 / 3.0) * M[k, 2] - 2.0 * M[k, 3]
        errs.append(float(np.abs(lhs - rhs).max()))
    moment_ok = errs[1] < 0.7 * errs[0] and errs[1] < 1e-3
    report(8, "parabolic oracles",
           worst_t < 0.02 and energy_ok and moment_ok,
           f"blow-up time err {worst_t:.2%} (<2%); energy monotone within logged "
           f"identity residuals; moment defect {errs[0]:.1e}->{errs[1]:.1e} under dt halving")


def test_criterion_09_threshold_phenomenology(grid64, bracket64, two_beta_star,
                                              threshold_runs):
    spec, U, mp = two_beta_star
    v = threshold_runs
    inhomog_ok = (v.below.verdict == "ConvergedToSteady"
                  and v.limit_distance is not None and v.limit_distance <= 1e-6
                  and v.above.verdict == BLOWUP)

    zspec = ProblemSpec(grid64, 2.0, 1.0, constant_field(grid64, 0.0))
    u_pos = mountain_pass_solution(zspec, constant_field(grid64, 0.0)).u
    hv = homogeneous_threshold(zspec, u_pos, 0.9, 1.1, EvolutionConfig(dt0=1e-3))
    homog_ok = (hv.consistent
                and float(np.abs(hv.below.final.values).max()) <= 1e-6)

    beta_small = bracket64.beta_lo / 10.0
    small_spec = ProblemSpec(grid64, 2.0, beta_small, constant_field(grid64, 1.0))
    all_blow = True
    for datum in (constant_field(grid64, 0.0), constant_field(grid64, 0.5),
                  ScalarField(grid64, U.values)):
        tr = evolve(small_spec, datum, EvolutionConfig(dt0=1e-3))
        _FLOOR_RUNS.append((small_spec, tr))
        all_blow &= tr.verdict == BLOWUP
    report(9, "threshold phenomenology",
           inhomog_ok and homog_ok and all_blow,
           f"eta=0.5 -> steady at distance {v.limit_distance:.1e}; eta=1.05 -> blow-up; "
           f"f=0 pair consistent; all 3 data blow up at beta*/10")


def test_criterion_10_energy_floor(threshold_runs):
    assert _FLOOR_RUNS, "floor criterion needs the earlier runs"
    ok = True
    checked = 0
    worst_margin = np.inf
    for spec, tr in _FLOOR_RUNS:
        if spec.f.max() == 0.0:
            continue
        floor = energy_floor(spec)
        E = np.array([s.energy for s in tr.samples])
        checked += 1
        if tr.verdict == BLOWUP:
            continue
        margin = float(E.min() - floor)
        worst_margin = min(worst_margin, margin)
        ok &= margin >= -1e-9 * (1.0 + abs(floor))
    report(10, "energy floor or blow-up on every admissible-f run",
           ok and checked >= 5,
           f"{checked} traces audited; worst bounded-run margin above floor {worst_margin:.3f}")
