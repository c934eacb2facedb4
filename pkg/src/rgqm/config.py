"""Run configuration: JSON in, validated dataclass out."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from .core import FlowParams, FreqConvention
from .errors import ConfigError

TASKS = ("lpa", "couplings", "generalized", "kinetic", "oracle", "fq_demo", "compare")

# tasks that need a time discretization
_NEEDS_N = {"lpa", "couplings", "generalized", "kinetic", "compare", "fq_demo"}


@dataclass
class Physics:
    M: float = 1.0
    hbar: float = 1.0
    Omega: float = 1.0
    lam: float = 0.0


@dataclass
class Discretization:
    N: int | None = None
    epsilon: float | None = None
    beta: float | None = None
    freq_convention: str = "laplacian"


@dataclass
class Grid:
    x_min: float = -4.0
    x_max: float = 4.0
    n_points: int = 41


@dataclass
class Continuum:
    Lambda: float | None = None
    delta_k: float | None = None
    shell_point: str = "mid"


@dataclass
class RunConfig:
    task: str
    physics: Physics = field(default_factory=Physics)
    potential: list | None = None
    discretization: Discretization = field(default_factory=Discretization)
    grid: Grid = field(default_factory=Grid)
    max_order: int = 8
    continuum: Continuum = field(default_factory=Continuum)
    kinetic: dict = field(default_factory=lambda: {"Z": [1.0]})
    oracle: dict = field(default_factory=lambda: {"basis_size": 200, "grid_points": 2000,
                                                  "x_range": [-10.0, 10.0]})
    shell: dict = field(default_factory=lambda: {"k": 1.0, "delta_k": 1e-3, "U2": 1.0, "U3": 1.0,
                                                 "Z": 1.0, "n_q": 41})
    output: dict = field(default_factory=lambda: {"format": "csv", "figures": True})
    defaults_applied: list = field(default_factory=list)

    def flow_params(self) -> FlowParams:
        d = self.discretization
        return FlowParams(d.N, d.epsilon, self.physics.hbar, self.physics.M,
                          FreqConvention(d.freq_convention))

    def coefficients(self) -> list:
        """Power-series coefficients of V(x)."""
        if self.potential is not None:
            return list(self.potential)
        p = self.physics
        return [0.0, 0.0, 0.5 * p.M * p.Omega ** 2, 0.0, p.lam / 24.0]

    def as_dict(self) -> dict:
        return asdict(self)


def _num(d: dict, key: str, path: str, kind=float, positive=False, required=False, default=None):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{path}.{key}", "required field is missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {type(v).__name__}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(f"{path}.{key}", "expected an integer")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{path}.{key}", "must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{path}.{key}", "must be positive")
    return v


def _section(raw: dict, name: str) -> dict:
    v = raw.get(name, {})
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(name, "expected an object")
    return v


def parse_config(text: str, task: str | None = None, convention: str | None = None) -> RunConfig:
    """Validate a JSON config; ``task`` and ``convention`` override the file."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError("<root>", f"invalid JSON: {err.msg} at line {err.lineno}") from None
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a JSON object")
    task = task or raw.get("task")
    if task is None:
        raise ConfigError("task", "required field is missing")
    if task not in TASKS:
        raise ConfigError("task", f"unknown task {task!r}; expected one of {', '.join(TASKS)}")
    cfg = RunConfig(task)
    applied = cfg.defaults_applied

    ph = _section(raw, "physics")
    cfg.physics = Physics(
        _num(ph, "M", "physics", positive=True, default=1.0),
        _num(ph, "hbar", "physics", positive=True, default=1.0),
        _num(ph, "Omega", "physics", default=1.0),
        _num(ph, "lambda", "physics", default=0.0))
    if cfg.physics.Omega < 0:
        raise ConfigError("physics.Omega", "must be non-negative")
    if cfg.physics.lam < 0:
        raise ConfigError("physics.lambda", "must be non-negative")
    for k in ("M", "hbar", "Omega", "lambda"):
        if k not in ph:
            applied.append(f"physics.{k}")

    pot = raw.get("potential")
    if pot is not None:
        if not isinstance(pot, dict) or pot.get("kind", "polynomial") != "polynomial":
            raise ConfigError("potential.kind", "only polynomial potentials are supported")
        co = pot.get("coefficients")
        if not isinstance(co, list) or not co or not all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in co):
            raise ConfigError("potential.coefficients", "expected a non-empty list of numbers")
        if len(co) < 3 or co[-1] <= 0 or (len(co) - 1) % 2:
            raise ConfigError("potential.coefficients",
                              "polynomial must have even degree >= 2 and positive leading coefficient")
        cfg.potential = [float(c) for c in co]

    di = _section(raw, "discretization")
    n = _num(di, "N", "discretization", kind=int)
    eps = _num(di, "epsilon", "discretization", positive=True)
    beta = _num(di, "beta", "discretization", positive=True)
    conv = convention or di.get("freq_convention", "laplacian")
    if "freq_convention" not in di and convention is None:
        applied.append("discretization.freq_convention")
    try:
        FreqConvention(conv)
    except ValueError:
        raise ConfigError("discretization.freq_convention",
                          f"expected 'laplacian' or 'paper', got {conv!r}") from None
    if task in _NEEDS_N:
        if n is None:
            raise ConfigError("discretization.N", "required field is missing")
        if n < 2 or n % 2:
            raise ConfigError("discretization.N", "must be an even integer >= 2")
        hb = cfg.physics.hbar
        if eps is None and beta is None:
            raise ConfigError("discretization", "one of epsilon or beta is required")
        if eps is not None and beta is not None:
            if not math.isclose(hb * beta, (n + 1) * eps, rel_tol=1e-12):
                raise ConfigError("discretization",
                                  "epsilon and beta disagree with hbar*beta = (N+1)*epsilon")
        if eps is None:
            eps = hb * beta / (n + 1)
            applied.append("discretization.epsilon")
        beta = (n + 1) * eps / hb
    cfg.discretization = Discretization(n, eps, beta, conv)

    gr = _section(raw, "grid")
    cfg.grid = Grid(_num(gr, "x_min", "grid", default=-4.0), _num(gr, "x_max", "grid", default=4.0),
                    _num(gr, "n_points", "grid", kind=int, default=41))
    if not cfg.grid.x_max > cfg.grid.x_min:
        raise ConfigError("grid.x_max", "must exceed grid.x_min")
    if cfg.grid.n_points < 7:
        raise ConfigError("grid.n_points", "need at least 7 points")
    for k in ("x_min", "x_max", "n_points"):
        if k not in gr:
            applied.append(f"grid.{k}")

    tr = _section(raw, "truncation")
    cfg.max_order = _num(tr, "max_order", "truncation", kind=int, default=8)
    if "max_order" not in tr:
        applied.append("truncation.max_order")
    if cfg.max_order < 2 or cfg.max_order % 2:
        raise ConfigError("truncation.max_order", "must be an even integer >= 2")

    co = _section(raw, "continuum")
    lam = _num(co, "Lambda", "continuum", positive=True)
    dk = _num(co, "delta_k", "continuum", positive=True)
    if lam is not None and dk is None:
        dk = lam / 2 ** 20
        applied.append("continuum.delta_k")
    if lam is not None and dk > lam:
        raise ConfigError("continuum.delta_k", "must not exceed Lambda")
    sp = co.get("shell_point", "mid")
    if sp not in ("mid", "upper"):
        raise ConfigError("continuum.shell_point", "expected 'mid' or 'upper'")
    cfg.continuum = Continuum(lam, dk, sp)

    ki = _section(raw, "kinetic")
    if "Z" in ki:
        z = ki["Z"]
        if not isinstance(z, list) or not z or not all(isinstance(c, (int, float)) for c in z):
            raise ConfigError("kinetic.Z", "expected a non-empty list of numbers")
        if z[0] <= 0:
            raise ConfigError("kinetic.Z", "Z(0) must be positive")
        cfg.kinetic = {"Z": [float(c) for c in z]}

    orc = _section(raw, "oracle")
    cfg.oracle = {
        "basis_size": _num(orc, "basis_size", "oracle", kind=int, default=200),
        "grid_points": _num(orc, "grid_points", "oracle", kind=int, default=2000),
        "x_range": orc.get("x_range", [-10.0, 10.0]),
    }
    if cfg.oracle["basis_size"] < 10:
        raise ConfigError("oracle.basis_size", "must be at least 10")
    if cfg.oracle["grid_points"] < 200:
        raise ConfigError("oracle.grid_points", "must be at least 200")

    sh = _section(raw, "shell")
    shell = dict(cfg.shell)
    for k in ("k", "delta_k", "U2", "U3", "Z"):
        shell[k] = _num(sh, k, "shell", default=shell[k])
    shell["n_q"] = _num(sh, "n_q", "shell", kind=int, default=shell["n_q"])
    if not 0 < shell["delta_k"] < shell["k"]:
        raise ConfigError("shell.delta_k", "need 0 < delta_k < k")
    cfg.shell = shell

    out = _section(raw, "output")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format", "expected 'csv' or 'json'")
    cfg.output = {"format": fmt, "figures": bool(out.get("figures", True))}

    if task in _NEEDS_N:
        try:
            cfg.flow_params()
        except ValueError as err:
            raise ConfigError("discretization", str(err)) from None
    return cfg
