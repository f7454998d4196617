"""Command-line laboratory driver.

Commands mirror the library: torsion | solve | beta-star | eigen |
second | evolve | threshold | suite.  Every command reads one config
file (all keys optional), applies --set section.key=value overrides,
writes delimited/JSON artifacts into --out, and renders SVG figures
next to them when --plot is given.  Every JSON report echoes the fully
resolved configuration under "effective_config".

Exit codes are semantic:

    0  the requested computation succeeded
    2  configuration or domain validation error
    3  a nonexistence / blow-up verdict, where that verdict is the finding
    4  inconclusive: iteration caps, failed pass search, or a threshold
       run that contradicts the expected phenomenology
    1  anything else (internal error)
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_config
from .elliptic import (
    BracketError,
    CONVERGED,
    DIVERGED,
    InconclusiveProbeError,
    MAX_ITER,
    MountainPassError,
    SingularJacobianError,
    VerdictOrderError,
    check_source_admissibility,
    find_critical_beta,
    linearized_eigenpair,
    monotone_iterate,
    mountain_pass_solution,
    newton_refine,
    torsion_report,
)
from .grid import GridError, ProblemSpec, ScalarField, constant_field, field_to_csv
from .orderings import build_threshold_datum
from .parabolic import (
    BLOWUP,
    EnergyTrace,
    EvolutionConfig,
    STEADY,
    StiffnessFailure,
    ThresholdVerdict,
    energy_floor,
    evolve,
    homogeneous_threshold,
    threshold_experiment,
    trace_to_csv,
)

__all__ = ["main"]


def _write_json(path: str, payload: dict, cfg: ExperimentConfig) -> None:
    payload = dict(payload)
    payload["effective_config"] = cfg.effective()
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _status_exit(status: str) -> int:
    if status == CONVERGED:
        return 0
    if status == DIVERGED:
        return 3
    return 4


def _solve_minimal(cfg: ExperimentConfig, spec: ProblemSpec):
    """Monotone iteration then Newton polish; returns (report, polished)."""
    rep = monotone_iterate(spec, cfg.iteration_params())
    if rep.status != CONVERGED:
        return rep, None
    ref = newton_refine(spec, rep.solution)
    return rep, (ref.solution if ref.status == CONVERGED else rep.solution)


# ----------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------

def cmd_torsion(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    rep = torsion_report(grid, cfg.p, cfg.beta)
    f = cfg.source(grid)
    verdict = check_source_admissibility(rep, f)
    field_to_csv(rep.h, os.path.join(cfg.out, "h.csv"))
    field_to_csv(rep.phi_beta, os.path.join(cfg.out, "phi_beta.csv"))
    payload = rep.as_dict()
    payload["admissibility"] = verdict.as_dict()
    _write_json(os.path.join(cfg.out, "constants.json"), payload, cfg)
    if args.plot:
        from .plots import save_field_figure

        save_field_figure(rep.h, os.path.join(cfg.out, "h.svg"), "Dirichlet torsion")
        save_field_figure(rep.phi_beta, os.path.join(cfg.out, "phi_beta.svg"),
                          f"Robin torsion, beta={cfg.beta:g}")
    print(f"torsion: M_h={rep.m_h:.12g} Lambda={rep.lam:.12g} "
          f"F_bound={rep.f_bound:.12g} admissible={verdict.admissible}")
    return 0


def cmd_solve(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    spec = ProblemSpec(grid, cfg.p, cfg.beta, cfg.source(grid))
    rep = monotone_iterate(spec, cfg.iteration_params())
    _write_json(os.path.join(cfg.out, "report.json"), rep.as_dict(), cfg)
    if rep.solution is not None:
        field_to_csv(rep.solution, os.path.join(cfg.out, "U_beta.csv"))
        if args.plot:
            from .plots import save_field_figure

            save_field_figure(rep.solution, os.path.join(cfg.out, "U_beta.svg"),
                              f"minimal solution, beta={cfg.beta:g}")
    print(f"solve: {rep.status} after {rep.iterations} sweeps, "
          f"residual={rep.residual_inf:.3e}")
    return _status_exit(rep.status)


def cmd_beta_star(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    f = cfg.source(grid)
    result = find_critical_beta(grid, cfg.p, f, (cfg.bracket_lo, cfg.bracket_hi),
                                cfg.tol, cfg.iteration_params())
    _write_json(os.path.join(cfg.out, "beta_star.json"), result.as_dict(), cfg)
    if args.plot:
        from .plots import save_probe_figure

        save_probe_figure(result, os.path.join(cfg.out, "beta_star.svg"))
    print(f"beta-star: bracket [{result.beta_lo:.6g}, {result.beta_hi:.6g}] "
          f"width={result.width:.3g} ({len(result.probes)} probes)")
    return 0


def cmd_eigen(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    spec = ProblemSpec(grid, cfg.p, cfg.beta, cfg.source(grid))
    rep, U = _solve_minimal(cfg, spec)
    if U is None:
        print(f"eigen: no minimal solution ({rep.status})")
        return _status_exit(rep.status)
    eig = linearized_eigenpair(spec, U)
    field_to_csv(eig.phi1, os.path.join(cfg.out, "phi1.csv"))
    _write_json(os.path.join(cfg.out, "eigen.json"), eig.as_dict(), cfg)
    if args.plot:
        from .plots import save_field_figure

        save_field_figure(eig.phi1, os.path.join(cfg.out, "phi1.svg"),
                          f"bottom eigenfunction, lambda1={eig.lambda1:.6g}")
    print(f"eigen: lambda1={eig.lambda1:.9g} residual={eig.residual:.3e}")
    return 0


def cmd_second(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    spec = ProblemSpec(grid, cfg.p, cfg.beta, cfg.source(grid))
    rep, U = _solve_minimal(cfg, spec)
    if U is None:
        print(f"second: no minimal solution ({rep.status})")
        return _status_exit(rep.status)
    mp = mountain_pass_solution(spec, U, grad_tol=cfg.grad_tol)
    field_to_csv(mp.u, os.path.join(cfg.out, "u2.csv"))
    with open(os.path.join(cfg.out, "pass_history.csv"), "w") as fh:
        fh.write("iter,functional,grad_inf,max_v\n")
        for it, val, gn, mv in mp.history:
            fh.write(f"{it},{val:.17g},{gn:.17g},{mv:.17g}\n")
    _write_json(os.path.join(cfg.out, "second.json"), mp.as_dict(), cfg)
    if args.plot:
        from .plots import save_field_figure

        save_field_figure(mp.u, os.path.join(cfg.out, "u2.svg"), "second solution")
    print(f"second: pass level {mp.pass_value:.9g}, residual={mp.residual_inf:.3e}, "
          f"max(u2-U)={float((mp.u.values - U.values).max()):.6g}")
    return 0


def _verdict_payload(trace: EnergyTrace) -> dict:
    return {
        "verdict": trace.verdict,
        "t_detect": trace.t_detect,
        "t_final": trace.t_final,
        "last_max_u": trace.samples[-1].max_u,
        "last_energy": trace.samples[-1].energy,
    }


def cmd_evolve(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    spec = ProblemSpec(grid, cfg.p, cfg.beta, cfg.source(grid))
    u0 = cfg.initial(grid)
    trace = evolve(spec, u0, cfg.evolution_config())
    trace_to_csv(trace, os.path.join(cfg.out, "trace.csv"))
    payload = _verdict_payload(trace)
    payload["energy_floor"] = energy_floor(spec)
    _write_json(os.path.join(cfg.out, "verdict.json"), payload, cfg)
    if trace.final is not None:
        field_to_csv(trace.final, os.path.join(cfg.out, "u_final.csv"))
    if args.plot:
        from .plots import save_trace_figures

        save_trace_figures(trace, cfg.out, "trace")
    print(f"evolve: {trace.verdict} at t={trace.t_final:.6g} "
          f"(max_u={trace.samples[-1].max_u:.6g})")
    return 3 if trace.verdict == BLOWUP else 0


def _threshold_leg(payload):
    spec, datum, evo = payload
    return evolve(spec, datum, evo)


def _run_threshold(cfg: ExperimentConfig, spec: ProblemSpec, U: ScalarField,
                   upper: ScalarField, homogeneous: bool, workers: int,
                   evo: EvolutionConfig) -> ThresholdVerdict:
    lower = constant_field(spec.grid, 0.0) if homogeneous else U
    eta_b, eta_a = cfg.eta_below, cfg.eta_above
    if workers > 1:
        below_datum = build_threshold_datum(lower, upper, eta_b)
        above_datum = build_threshold_datum(lower, upper, eta_a)
        with ProcessPoolExecutor(max_workers=2) as pool:
            below_f = pool.submit(_threshold_leg, (spec, below_datum, evo))
            above_f = pool.submit(_threshold_leg, (spec, above_datum, evo))
            below, above = below_f.result(), above_f.result()
        failures: list[str] = []
        limit_distance = None
        if below.verdict != STEADY:
            failures.append(f"below run ended {below.verdict}, expected {STEADY}")
        if below.final is not None:
            limit_distance = float(np.abs(below.final.values - lower.values).max())
            if below.verdict == STEADY and limit_distance > 1e-6:
                failures.append(f"below limit off by {limit_distance:.3e}")
        if above.verdict != BLOWUP:
            failures.append(f"above run ended {above.verdict}, expected {BLOWUP}")
        return ThresholdVerdict(eta_b, eta_a, below, above, limit_distance, failures)
    if homogeneous:
        return homogeneous_threshold(spec, upper, eta_b, eta_a, evo)
    return threshold_experiment(spec, U, upper, eta_b, eta_a, evo)


def cmd_threshold(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    f = cfg.source(grid)
    spec = ProblemSpec(grid, cfg.p, cfg.beta, f)
    homogeneous = f.max() == 0.0
    if homogeneous:
        zero = constant_field(grid, 0.0)
        upper = mountain_pass_solution(spec, zero, grad_tol=cfg.grad_tol).u
        U = zero
    else:
        rep, U = _solve_minimal(cfg, spec)
        if U is None:
            print(f"threshold: no minimal solution ({rep.status})")
            return _status_exit(rep.status)
        upper = mountain_pass_solution(spec, U, grad_tol=cfg.grad_tol).u
    verdict = _run_threshold(cfg, spec, U, upper, homogeneous, args.workers,
                             cfg.evolution_config())
    for leg, trace in (("below", verdict.below), ("above", verdict.above)):
        leg_dir = os.path.join(cfg.out, leg)
        os.makedirs(leg_dir, exist_ok=True)
        trace_to_csv(trace, os.path.join(leg_dir, "trace.csv"))
        _write_json(os.path.join(leg_dir, "verdict.json"),
                    _verdict_payload(trace), cfg)
        if args.plot:
            from .plots import save_trace_figures

            save_trace_figures(trace, leg_dir, "trace")
    _write_json(os.path.join(cfg.out, "threshold.json"), verdict.as_dict(), cfg)
    print(f"threshold: below={verdict.below.verdict} above={verdict.above.verdict} "
          f"consistent={verdict.consistent}")
    return 0 if verdict.consistent else 4


def cmd_suite(cfg: ExperimentConfig, args) -> int:
    grid = cfg.grid()
    f = cfg.source(grid)
    index: dict[str, dict] = {}
    if args.plot:
        from .plots import save_field_figure, save_probe_figure, save_trace_figures

    def stage_dir(name: str) -> str:
        d = os.path.join(cfg.out, name)
        os.makedirs(d, exist_ok=True)
        return d

    # torsion constants and admissibility
    rep = torsion_report(grid, cfg.p, cfg.beta)
    verdict = check_source_admissibility(rep, f)
    d = stage_dir("torsion")
    field_to_csv(rep.h, os.path.join(d, "h.csv"))
    field_to_csv(rep.phi_beta, os.path.join(d, "phi_beta.csv"))
    payload = rep.as_dict()
    payload["admissibility"] = verdict.as_dict()
    _write_json(os.path.join(d, "constants.json"), payload, cfg)
    if args.plot:
        save_field_figure(rep.h, os.path.join(d, "h.svg"), "Dirichlet torsion")
        save_field_figure(rep.phi_beta, os.path.join(d, "phi_beta.svg"),
                          f"Robin torsion, beta={cfg.beta:g}")
    index["torsion"] = {"dir": "torsion", "admissible": verdict.admissible}

    # critical beta
    result = find_critical_beta(grid, cfg.p, f, (cfg.bracket_lo, cfg.bracket_hi),
                                cfg.tol, cfg.iteration_params())
    d = stage_dir("beta_star")
    _write_json(os.path.join(d, "beta_star.json"), result.as_dict(), cfg)
    if args.plot:
        save_probe_figure(result, os.path.join(d, "beta_star.svg"))
    index["beta_star"] = {"dir": "beta_star", "beta_lo": result.beta_lo,
                          "beta_hi": result.beta_hi}

    # stationary pair above the fold; the configured beta is used when it
    # already clears the bracket, otherwise twice the upper bracket edge
    beta_run = cfg.beta if cfg.beta > result.beta_hi else 2.0 * result.beta_hi
    spec = ProblemSpec(grid, cfg.p, beta_run, f)
    mono = monotone_iterate(spec, cfg.iteration_params())
    d = stage_dir("solve")
    _write_json(os.path.join(d, "report.json"), mono.as_dict(), cfg)
    index["solve"] = {"dir": "solve", "beta": beta_run, "status": mono.status}
    if mono.status != CONVERGED:
        _write_json(os.path.join(cfg.out, "index.json"), index, cfg)
        print(f"suite: stationary solve {mono.status} at beta={beta_run:g}")
        return _status_exit(mono.status)
    U = newton_refine(spec, mono.solution).solution
    field_to_csv(U, os.path.join(d, "U_beta.csv"))
    if args.plot:
        save_field_figure(U, os.path.join(d, "U_beta.svg"),
                          f"minimal solution, beta={beta_run:g}")

    eig = linearized_eigenpair(spec, U)
    d = stage_dir("eigen")
    field_to_csv(eig.phi1, os.path.join(d, "phi1.csv"))
    _write_json(os.path.join(d, "eigen.json"), eig.as_dict(), cfg)
    if args.plot:
        save_field_figure(eig.phi1, os.path.join(d, "phi1.svg"),
                          f"ground mode, lambda1={eig.lambda1:.6g}")
    index["eigen"] = {"dir": "eigen", "lambda1": eig.lambda1}

    mp = mountain_pass_solution(spec, U, grad_tol=cfg.grad_tol)
    d = stage_dir("second")
    field_to_csv(mp.u, os.path.join(d, "u2.csv"))
    _write_json(os.path.join(d, "second.json"), mp.as_dict(), cfg)
    if args.plot:
        save_field_figure(mp.u, os.path.join(d, "u2.svg"), "second solution")
    index["second"] = {"dir": "second", "pass_value": mp.pass_value}

    evo = cfg.evolution_config()
    verdict_t = _run_threshold(cfg, spec, U, mp.u, False, args.workers, evo)
    d = stage_dir("threshold")
    for leg, trace in (("below", verdict_t.below), ("above", verdict_t.above)):
        leg_dir = os.path.join(d, leg)
        os.makedirs(leg_dir, exist_ok=True)
        trace_to_csv(trace, os.path.join(leg_dir, "trace.csv"))
        if args.plot:
            save_trace_figures(trace, leg_dir, "trace")
    _write_json(os.path.join(d, "threshold.json"), verdict_t.as_dict(), cfg)
    index["threshold"] = {"dir": "threshold", "consistent": verdict_t.consistent}

    # seeded randomized admissible sources: ordering audit of the sweeps
    rng = np.random.default_rng(cfg.seed)
    violations = 0
    statuses = []
    for _ in range(cfg.instances):
        raw = rng.uniform(0.2, 1.0, grid.node_count)
        scale = rng.uniform(0.05, 0.5) * rep.f_bound
        rnd_f = ScalarField(grid, raw / raw.max() * scale)
        rnd = monotone_iterate(ProblemSpec(grid, cfg.p, beta_run, rnd_f),
                               cfg.iteration_params())
        violations += rnd.monotone_violations
        statuses.append(rnd.status)
    d = stage_dir("random_sources")
    _write_json(os.path.join(d, "random_sources.json"),
                {"seed": cfg.seed, "instances": cfg.instances,
                 "monotone_violations": violations, "statuses": statuses}, cfg)
    index["random_sources"] = {"dir": "random_sources", "violations": violations}

    _write_json(os.path.join(cfg.out, "index.json"), index, cfg)
    ok = verdict_t.consistent and violations == 0
    print(f"suite: beta*~[{result.beta_lo:.4g},{result.beta_hi:.4g}] "
          f"lambda1={eig.lambda1:.6g} threshold_consistent={verdict_t.consistent}")
    return 0 if ok else 4


# ----------------------------------------------------------------------
# argument plumbing
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robinlab",
        description="numerical laboratory for -lap(u) = u^p + f(x) with Robin flux",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "torsion": (cmd_torsion, "torsion functions and derived constants"),
        "solve": (cmd_solve, "minimal solution by monotone iteration"),
        "beta-star": (cmd_beta_star, "bracket the critical beta by bisection"),
        "eigen": (cmd_eigen, "bottom eigenvalue of the linearization"),
        "second": (cmd_second, "mountain-pass second solution"),
        "evolve": (cmd_evolve, "parabolic flow from a configured datum"),
        "threshold": (cmd_threshold, "threshold dynamics around the solutions"),
        "suite": (cmd_suite, "full battery with an index of artifacts"),
    }
    for name, (func, help_) in commands.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", default=None, help="path to an INI config file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--plot", action="store_true", help="render SVG figures")
        sp.add_argument("--workers", type=int, default=1,
                        help="process count for independent runs")
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for randomized suite instances")
        sp.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                        help="override one config value (repeatable)")
        sp.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config, args.set)
        if args.out is not None:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        os.makedirs(cfg.out, exist_ok=True)
        return args.func(cfg, args)
    except (ConfigError, GridError, BracketError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (InconclusiveProbeError, MountainPassError, StiffnessFailure,
            VerdictOrderError, SingularJacobianError) as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - defensive
        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
