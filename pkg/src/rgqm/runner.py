"""Task dispatch, result persistence and figures."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .coupling_flow import run_family_flow
from .errors import RGQMError
from .lpa_flow import (PotentialGrid, ground_state_energy, run_continuum_lpa, run_lpa_flow,
                       second_derivatives, zero_mode_energy)


@dataclass
class RunManifest:
    config: dict
    version: str
    started: str
    finished: str = ""
    status: str = "ok"
    error: dict | None = None
    trace_summary: dict = field(default_factory=dict)
    digest: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"version": self.version, "status": self.status, "started": self.started,
                "finished": self.finished, "config": self.config, "digest": self.digest,
                "trace_summary": self.trace_summary, "warnings": self.warnings,
                "error": self.error, "outputs": self.outputs}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


class Writer:
    """Writes CSV/JSON/PNG artifacts into the output directory and hashes them."""

    def __init__(self, out: Path, figures: bool = True):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.figures = figures
        self.files = {}

    def _register(self, path: Path):
        self.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        path = self.out / name
        path.write_bytes(buf.getvalue().encode("utf-8"))
        self._register(path)

    def json(self, name: str, obj):
        path = self.out / name
        path.write_bytes((json.dumps(obj, indent=2, ensure_ascii=False, default=_json_default)
                          + "\n").encode("utf-8"))
        self._register(path)

    def figure(self, name: str, draw):
        if not self.figures:
            return
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 4))
        draw(ax)
        fig.tight_layout()
        path = self.out / name
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        self._register(path)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _initial_grid(cfg: RunConfig) -> PotentialGrid:
    c = np.array(cfg.coefficients())
    g = cfg.grid
    return PotentialGrid.from_function(lambda x: np.polynomial.polynomial.polyval(x, c),
                                       g.x_min, g.x_max, g.n_points)


def _lpa(cfg: RunConfig):
    params = cfg.flow_params()
    grid = _initial_grid(cfg)
    v0, trace = run_lpa_flow(grid, params)
    gs = ground_state_energy(v0)
    i = int(np.argmin(v0.values))
    gap = math.sqrt(max(second_derivatives(v0)[i], 0.0) / params.mass)
    result = {"E0": gs.energy, "E0_zero_mode": zero_mode_energy(v0, params), "gap": gap,
              "minimizers": list(gs.minimizers)}
    warns = list(trace.warnings) + list(gs.warnings)
    tables = {"trace.csv": (("m", "omega_sq", "v_min", "v_at_zero", "v2_at_zero"), trace.as_rows()),
              "potential.csv": (("x", "V_initial", "V_final"),
                                list(zip(grid.x, grid.values, v0.values)))}
    if cfg.continuum.Lambda is not None:
        vc = run_continuum_lpa(grid, params.mass, cfg.continuum.Lambda, cfg.continuum.delta_k,
                               params, cfg.continuum.shell_point)
        result["E0_continuum"] = float(vc.values.min())
        tables["potential.csv"] = (("x", "V_initial", "V_final", "V_continuum"),
                                   list(zip(grid.x, grid.values, v0.values, vc.values)))

    def fig(ax):
        ax.plot(grid.x, grid.values, label="initial")
        ax.plot(v0.x, v0.values, label="flowed")
        ax.set_xlabel("x0")
        ax.set_ylabel("V")
        ax.legend()

    rows = trace.as_rows()
    return result, tables, warns, {"potential.png": fig}, {"steps": len(rows), "status": trace.status}


def _couplings(cfg: RunConfig):
    params = cfg.flow_params()
    rows = []
    try:
        res = run_family_flow(cfg.coefficients(), cfg.max_order, params, trace=rows)
    except ValueError as err:
        from .errors import ConfigError
        raise ConfigError("potential.coefficients", str(err)) from None
    k = cfg.max_order // 2
    header = ("m", "E0") + tuple(f"g{2 * j}" for j in range(1, k + 1))
    result = res.as_dict()

    def fig(ax):
        arr = np.array(rows)
        ax.plot(arr[:, 0], arr[:, 1], label="E0")
        ax.plot(arr[:, 0], arr[:, 2], label="g2")
        ax.set_xscale("log")
        ax.set_xlabel("m")
        ax.legend()

    return result, {"trace.csv": (header, rows)}, [], {"couplings.png": fig}, {"steps": len(rows)}


def _generalized(cfg: RunConfig):
    from .generalized_flow import (GeneralizedPotential, consistency_check, locality_witness,
                                   run_generalized_flow)
    from .models import taylor_derivatives
    params = cfg.flow_params()
    warns = []
    if params.n_modes > 8:
        warns.append("generalized tables grow quickly with N; N <= 16 is the intended range")
    order = min(cfg.max_order, 6)
    if order < cfg.max_order:
        warns.append(f"generalized flow truncated at order {order}")
    derivs = taylor_derivatives(cfg.coefficients(), order)
    U = GeneralizedPotential.from_local(derivs, params.n_modes, order)
    check = consistency_check(U, params.n_modes, params)
    witness = None
    if params.n_modes >= 4:
        witness = locality_witness(cfg.coefficients(), params.n_modes, params, order)
    Uf, rows = run_generalized_flow(U, params)
    result = {"E0": Uf.coupling(()), "g00": Uf.coupling((0, 0)),
              "gap": math.sqrt(Uf.coupling((0, 0)) / params.mass) if Uf.coupling((0, 0)) > 0 else None,
              "consistency": check, "locality_witness": witness, "max_order": order}

    def fig(ax):
        arr = np.array(rows)
        ax.plot(arr[:, 0], arr[:, 2], "o-")
        ax.set_xlabel("m")
        ax.set_ylabel("g^{0,0}")

    return result, {"trace.csv": (("m", "E0", "g00"), rows)}, warns, {"mass.png": fig}, {"steps": len(rows)}


def _kinetic(cfg: RunConfig):
    from .kinetic_flow import run_continuum_coupled, run_kinetic_flow
    params = cfg.flow_params()
    grid = _initial_grid(cfg)
    zc = np.array(cfg.kinetic["Z"])
    z0 = np.polynomial.polynomial.polyval(grid.x, zc)
    u, z, rows = run_kinetic_flow(grid, z0, params)
    result = {"E0": float(u.values.min()), "Z_at_zero_final": rows[-1][2],
              "Z_at_zero_initial": float(zc[0]), "source_term": "omitted"}
    cols = [grid.x, grid.values, u.values, z0, z]
    header = ["x", "U_initial", "U_final", "Z_initial", "Z_final"]
    if cfg.continuum.Lambda is not None:
        uc, zk = run_continuum_coupled(grid, z0, cfg.continuum.Lambda, cfg.continuum.delta_k,
                                       params, cfg.continuum.shell_point)
        result["E0_continuum"] = float(uc.values.min())
        cols += [uc.values, zk]
        header += ["U_continuum", "Z_continuum"]

    def fig(ax):
        ax.plot(grid.x, z0, label="Z initial")
        ax.plot(grid.x, z, label="Z flowed")
        ax.set_xlabel("x0")
        ax.legend()

    tables = {"trace.csv": (("m", "U_at_zero", "Z_at_zero"), rows),
              "profiles.csv": (header, list(zip(*cols)))}
    return result, tables, [], {"kinetic.png": fig}, {"steps": len(rows)}


def _oracle_rows(cfg: RunConfig):
    from .spectrum_oracle import diag_grid, diag_hermite
    c = cfg.coefficients()
    p = cfg.physics
    h = diag_hermite(c, cfg.oracle["basis_size"], mass=p.M, hbar=p.hbar)
    g = diag_grid(c, tuple(cfg.oracle["x_range"]), cfg.oracle["grid_points"], mass=p.M, hbar=p.hbar)
    return h, g


def _oracle(cfg: RunConfig):
    h, g = _oracle_rows(cfg)
    rows = [(r.method, r.E0, r.E1, r.gap, r.size, r.convergence_estimate) for r in (h, g)]
    result = {"hermite": h.as_dict(), "grid": g.as_dict(), "E0": h.E0, "gap": h.gap}

    def fig(ax):
        x = np.linspace(*cfg.oracle["x_range"], 400)
        ax.plot(x, np.polynomial.polynomial.polyval(x, cfg.coefficients()))
        ax.axhline(h.E0, ls="--", label="E0")
        ax.axhline(h.E1, ls=":", label="E1")
        ax.set_ylim(min(0.0, h.E0) - 0.5, h.E1 + 2)
        ax.legend()

    return (result, {"spectrum.csv": (("method", "E0", "E1", "gap", "size", "convergence"), rows)},
            [], {"spectrum.png": fig}, {})


def _fq_demo(cfg: RunConfig):
    from .continuum_artifact import ShellSpec, f_q_discrete, fq_table, kink_jump
    sh = cfg.shell
    s = ShellSpec(sh["k"], sh["delta_k"], 0.0, sh["U2"], sh["U3"], 0.0, sh["Z"])
    qs = np.linspace(0.0, 2.0 * sh["delta_k"], sh["n_q"])
    params = cfg.flow_params()
    m_top = min(params.n_modes, 4)
    probes = [f_q_discrete(params, q, m, u3=sh["U3"], u2=sh["U2"])
              for m in range(2, m_top + 1) for q in range(1, m)]
    disc = max((abs(v) for v in probes), default=0.0)
    rows = [r + (disc,) for r in fq_table(s, qs)]
    result = {"F_q0_analytic": rows[0][1], "F_q0_quadrature": rows[0][2], "F_discrete_max": disc,
              "kink_jump": kink_jump(s), "kink_expected": sh["U3"] ** 2 / (2 * s.G(s.k) ** 2),
              "n_discrete_probes": len(probes)}

    def fig(ax):
        arr = np.array(rows)
        ax.plot(arr[:, 0], arr[:, 1], label="analytic")
        ax.plot(arr[:, 0], arr[:, 2], "o", ms=3, label="quadrature")
        ax.plot(arr[:, 0], arr[:, 3], label="discrete")
        ax.axvline(sh["delta_k"], color="grey", lw=0.5)
        ax.set_xlabel("q")
        ax.set_ylabel("F(q)")
        ax.legend()

    return (result, {"fq.csv": (("q", "F_analytic", "F_quadrature", "F_discrete"), rows)}, [],
            {"fq.png": fig}, {})


def _compare(cfg: RunConfig):
    params = cfg.flow_params()
    h, g = _oracle_rows(cfg)
    lpa_res, _, warns, _, _ = _lpa(cfg)
    rows = []

    def row(method, e0, gap, e0z=None):
        rows.append((method, e0, gap, "" if e0z is None else e0z, e0 - h.E0, gap - h.gap))

    row("lpa", lpa_res["E0"], lpa_res["gap"], lpa_res["E0_zero_mode"])
    try:
        fam = run_family_flow(cfg.coefficients(), cfg.max_order, params)
        row("family_flow", fam.E0, fam.gap, fam.metadata["E0_zero_mode"])
    except (ValueError, RGQMError) as err:
        warns.append(f"family flow skipped: {err}")
    row("hermite", h.E0, h.gap)
    row("grid", g.E0, g.gap)
    result = {"E0": h.E0, "gap": h.gap, "rows": len(rows)}

    def fig(ax):
        names = [r[0] for r in rows]
        ax.bar(names, [abs(r[4]) + 1e-16 for r in rows])
        ax.set_yscale("log")
        ax.set_ylabel("|E0 - E0(hermite)|")

    header = ("method", "E0", "gap", "E0_zero_mode", "discrepancy_E0", "discrepancy_gap")
    return result, {"compare.csv": (header, rows)}, warns, {"compare.png": fig}, {}


TASKS = {"lpa": _lpa, "couplings": _couplings, "generalized": _generalized, "kinetic": _kinetic,
         "oracle": _oracle, "fq_demo": _fq_demo, "compare": _compare}


def dispatch(cfg: RunConfig, out: Path, figures: bool | None = None,
             seed_report: dict | None = None) -> RunManifest:
    """Run the configured task, write artifacts and the manifest.

    On error the partial trace (if the error carries one) and a manifest with
    status 'failed' are written before the exception propagates.
    """
    figures = cfg.output.get("figures", True) if figures is None else figures
    w = Writer(out, figures)
    man = RunManifest(cfg.as_dict(), __version__, _now())
    if seed_report is not None:
        w.json("seed_check.json", seed_report)
        man.digest["seed_check_passed"] = seed_report["passed"]
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result, tables, warns, figs, summary = TASKS[cfg.task](cfg)
        man.warnings.extend(warns)
        man.warnings.extend(str(c.message) for c in caught)
        for name, (header, rows) in tables.items():
            if cfg.output["format"] == "json":
                w.json(name.replace(".csv", ".json"),
                       [dict(zip(header, (_fmt(v) for v in r))) for r in rows])
            else:
                w.csv(name, header, rows)
        w.json("result.json", result)
        for name, draw in figs.items():
            w.figure(name, draw)
        man.trace_summary = summary
        man.digest.update({k: result.get(k) for k in ("E0", "gap") if k in result})
        man.digest["warnings"] = len(man.warnings)
    except RGQMError as err:
        man.status = "failed"
        man.error = {"type": type(err).__name__, "message": str(err), "exit_code": err.exit_code}
        tr = getattr(err, "trace", None)
        if tr is not None:
            if isinstance(tr, dict):
                w.json("partial_trace.json", tr)
            elif hasattr(tr, "as_rows"):
                w.csv("partial_trace.csv", ("m", "omega_sq", "v_min", "v_at_zero", "v2_at_zero"),
                      tr.as_rows())
            else:
                # kinetic flow rows
                w.csv("partial_trace.csv", ("m", "U_at_zero", "Z_at_zero"), tr)
            if hasattr(tr, "warnings"):
                man.warnings.extend(tr.warnings)
        raise
    finally:
        man.finished = _now()
        man.outputs = dict(sorted(w.files.items()))
        w.json("manifest.json", man.as_dict())
    return man
