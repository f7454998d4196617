"""Experiment configuration: flat key = value files with sections.

The on-disk format is INI (configparser); every key has a typed default
below, unknown sections or keys are rejected with their dotted path, and
command-line overrides of the form section.key=value are applied after
the file.  The fully resolved configuration is echoed into every JSON
report so a result can always be traced back to the numbers that
produced it.

Source terms and initial data share a tiny grammar:

    zero
    const C
    bump CX[,CY] WIDTH HEIGHT        (gaussian bump, SD = WIDTH)
    polyprod c0,c1,...[; d0,d1,...]  (P(x) or P(x)*Q(y), ascending coeffs)
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from typing import Callable

import numpy as np

from .elliptic import IterationParams
from .grid import Grid, Interval, Rectangle, ScalarField, constant_field, make_grid
from .parabolic import EvolutionConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "parse_field_spec",
    "build_field",
]


class ConfigError(ValueError):
    """Malformed configuration; the message carries the dotted key path."""


@dataclass
class ExperimentConfig:
    # domain
    kind: str = "interval"
    a: float = 0.0
    b: float = 1.0
    ax: float = 0.0
    bx: float = 1.0
    ay: float = 0.0
    by: float = 1.0
    n: int = 64
    # problem
    p: float = 2.0
    beta: float = 4.0
    f: str = "const 1.0"
    # iteration
    tol_increment: float = 1e-10
    tol_residual: float = 1e-8
    max_iter: int = 10000
    divergence_cap: float = 1e6
    # evolution
    dt0: float = 0.01
    t_end: float = -1.0          # <= 0 means the library default
    blowup_cap: float = 1e6
    dt_min: float = 1e-12
    steady_tol: float = 1e-9
    growth_cap: float = 0.015
    increment_cap: float = 0.1
    quiet_steps_to_double: int = 20
    sample_stride: int = 1
    max_steps: int = 500000
    disable_diffusion: bool = False
    u0: str = "zero"
    # beta_star
    bracket_lo: float = 1e-3
    bracket_hi: float = 10.0
    tol: float = 1e-3
    # threshold
    eta_below: float = 0.5
    eta_above: float = 1.05
    # second (mountain pass)
    grad_tol: float = 1e-6
    # suite
    seed: int = 0
    instances: int = 8
    # output
    out: str = "out"

    # --- builders -----------------------------------------------------

    def grid(self) -> Grid:
        if self.kind == "interval":
            return make_grid(Interval(self.a, self.b), self.n)
        if self.kind == "rectangle":
            return make_grid(Rectangle(self.ax, self.bx, self.ay, self.by), self.n)
        raise ConfigError(f"domain.kind: unknown kind {self.kind!r}")

    def source(self, grid: Grid) -> ScalarField:
        return build_field(grid, self.f, "problem.f")

    def initial(self, grid: Grid) -> ScalarField:
        return build_field(grid, self.u0, "evolution.u0")

    def iteration_params(self) -> IterationParams:
        return IterationParams(
            tol_increment=self.tol_increment,
            tol_residual=self.tol_residual,
            max_iter=self.max_iter,
            divergence_cap=self.divergence_cap,
        )

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(
            dt0=self.dt0,
            t_end=None if self.t_end <= 0 else self.t_end,
            blowup_cap=self.blowup_cap,
            dt_min=self.dt_min,
            steady_tol=self.steady_tol,
            growth_cap=self.growth_cap,
            increment_cap=self.increment_cap,
            quiet_steps_to_double=self.quiet_steps_to_double,
            sample_stride=self.sample_stride,
            max_steps=self.max_steps,
            disable_diffusion=self.disable_diffusion,
        )

    def effective(self) -> dict:
        out: dict[str, dict] = {}
        for sec, keys in _SCHEMA.items():
            out[sec] = {k: getattr(self, _attr(sec, k)) for k in keys}
        return out


# section -> keys; attribute name is the key itself (unique across sections)
_SCHEMA: dict[str, tuple[str, ...]] = {
    "domain": ("kind", "a", "b", "ax", "bx", "ay", "by", "n"),
    "problem": ("p", "beta", "f"),
    "iteration": ("tol_increment", "tol_residual", "max_iter", "divergence_cap"),
    "evolution": (
        "dt0", "t_end", "blowup_cap", "dt_min", "steady_tol", "growth_cap",
        "increment_cap", "quiet_steps_to_double", "sample_stride", "max_steps",
        "disable_diffusion", "u0",
    ),
    "beta_star": ("bracket_lo", "bracket_hi", "tol"),
    "threshold": ("eta_below", "eta_above"),
    "second": ("grad_tol",),
    "suite": ("seed", "instances"),
    "output": ("out",),
}


def _attr(section: str, key: str) -> str:
    return key


def _coerce(path: str, raw: str, target_type: type):
    raw = raw.strip()
    try:
        if target_type is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_config(path: str | None = None, overrides: list[str] = ()) -> ExperimentConfig:
    """Load defaults, then the file (if any), then dotted overrides."""
    cfg = ExperimentConfig()
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    concrete = {f.name: type(getattr(cfg, f.name)) for f in fields(ExperimentConfig)}

    def apply(section: str, key: str, raw: str) -> None:
        path_ = f"{section}.{key}"
        if section not in _SCHEMA:
            raise ConfigError(f"{path_}: unknown section {section!r}")
        if key not in _SCHEMA[section]:
            raise ConfigError(f"{path_}: unknown key {key!r} in [{section}]")
        attr = _attr(section, key)
        setattr(cfg, attr, _coerce(path_, raw, concrete[attr]))

    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                apply(section, key, raw)
    for ov in overrides:
        if "=" not in ov or "." not in ov.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {ov!r}")
        dotted, raw = ov.split("=", 1)
        section, key = dotted.split(".", 1)
        apply(section.strip(), key.strip(), raw)
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.kind not in ("interval", "rectangle"):
        raise ConfigError(f"domain.kind: must be interval or rectangle, got {cfg.kind!r}")
    if cfg.n < 4:
        raise ConfigError(f"domain.n: need n >= 4, got {cfg.n}")
    if cfg.kind == "interval" and not cfg.a < cfg.b:
        raise ConfigError(f"domain.a/domain.b: need a < b, got ({cfg.a}, {cfg.b})")
    if cfg.kind == "rectangle" and not (cfg.ax < cfg.bx and cfg.ay < cfg.by):
        raise ConfigError("domain.ax..by: need ax < bx and ay < by")
    if not cfg.p > 1.0:
        raise ConfigError(f"problem.p: need p > 1, got {cfg.p}")
    if cfg.beta < 0.0:
        raise ConfigError(f"problem.beta: need beta >= 0, got {cfg.beta}")
    if not (0.0 < cfg.bracket_lo < cfg.bracket_hi):
        raise ConfigError("beta_star.bracket_lo/hi: need 0 < lo < hi")
    if not (0.0 < cfg.eta_below < 1.0):
        raise ConfigError(f"threshold.eta_below: need 0 < eta < 1, got {cfg.eta_below}")
    if not cfg.eta_above > 1.0:
        raise ConfigError(f"threshold.eta_above: need eta > 1, got {cfg.eta_above}")
    try:
        cfg.evolution_config()
    except ValueError as exc:
        raise ConfigError(f"evolution.*: {exc}") from exc
    parse_field_spec(cfg.f, 1 if cfg.kind == "interval" else 2, "problem.f")
    parse_field_spec(cfg.u0, 1 if cfg.kind == "interval" else 2, "evolution.u0")


# ----------------------------------------------------------------------
# field grammar
# ----------------------------------------------------------------------

def parse_field_spec(spec: str, ndim: int, path: str = "field") -> Callable[..., float]:
    """Compile a field spec into a nodal rule of (x) or (x, y)."""
    toks = spec.strip().split()
    if not toks:
        raise ConfigError(f"{path}: empty field spec")
    head, rest = toks[0], toks[1:]
    if head == "zero":
        if rest:
            raise ConfigError(f"{path}: zero takes no arguments")
        return (lambda *xy: 0.0)
    if head == "const":
        if len(rest) != 1:
            raise ConfigError(f"{path}: const takes one value")
        c = _coerce(path, rest[0], float)
        return (lambda *xy: c)
    if head == "bump":
        if len(rest) != 3:
            raise ConfigError(f"{path}: bump takes CENTER WIDTH HEIGHT")
        center = [_coerce(path, c, float) for c in rest[0].split(",")]
        if len(center) != ndim:
            raise ConfigError(f"{path}: bump center needs {ndim} coordinates")
        width = _coerce(path, rest[1], float)
        height = _coerce(path, rest[2], float)
        if width <= 0:
            raise ConfigError(f"{path}: bump width must be positive")

        def bump(*xy: float) -> float:
            r2 = sum((c - x) ** 2 for c, x in zip(center, xy))
            return height * float(np.exp(-r2 / (2.0 * width * width)))

        return bump
    if head == "polyprod":
        groups = " ".join(rest).split(";")
        if len(groups) != ndim:
            raise ConfigError(f"{path}: polyprod needs {ndim} coefficient group(s)")
        polys = []
        for g in groups:
            coeffs = [_coerce(path, c, float) for c in g.replace(",", " ").split()]
            if not coeffs:
                raise ConfigError(f"{path}: empty coefficient group")
            polys.append(np.polynomial.Polynomial(coeffs))

        def prod(*xy: float) -> float:
            out = 1.0
            for poly, x in zip(polys, xy):
                out *= float(poly(x))
            return out

        return prod
    raise ConfigError(f"{path}: unknown field kind {head!r}")


def build_field(grid: Grid, spec: str, path: str = "field") -> ScalarField:
    rule = parse_field_spec(spec, grid.ndim, path)
    from .grid import field_from_function

    try:
        return field_from_function(grid, rule)
    except Exception as exc:
        raise ConfigError(f"{path}: {exc}") from exc
