"""Single runs, manifest-driven sweeps and figure presets.

Every subcommand reduces to a point function ``f(cfg, options) -> PointResult``.
A sweep evaluates one point per cell of the cartesian product of its axes and
concatenates the tables in row-major grid order, so worker scheduling never
changes the bytes written.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import presets
from .config import ConfigError, SystemConfig, config_from_dict, config_to_dict
from .dynamics import AdiabaticityWarning, default_step, mirror_coupling, operating_point, simulate
from .entanglement import entanglement_series
from .gain import gain_coefficients
from .io import RunManifest, read_csv, write_csv, write_json
from .steady_state import (RESIDUAL_TOL, CavityModel, brwa_mean_fields, phase_diagram,
                           power_for_epsilon, rwa_branches, rwa_fold_points)

V_COLUMNS = [f"V{i + 1}{j + 1}" for i in range(4) for j in range(i, 4)]
_UPPER = np.triu_indices(4)


@dataclass
class PointResult:
    columns: list[str]
    rows: list[list]
    summary: dict[str, Any] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)


def linear_grid(spec) -> np.ndarray:
    """(start, stop, num) evenly spaced, or (start, stop, num, "log") geometric."""
    start, stop, num, *kind = spec
    if kind and kind[0] == "log":
        return np.geomspace(float(start), float(stop), int(num))
    return np.linspace(float(start), float(stop), int(num))


# ---------------------------------------------------------------------------
# point functions


def run_gain(cfg: SystemConfig, options: dict) -> PointResult:
    g = gain_coefficients(cfg.atomic, cfg.cavity1.kappa, cfg.cavity2.kappa)
    values = {name: complex(v) for name, v in g.as_dict().items()}
    rows = [[name, v.real, v.imag] for name, v in values.items()]
    return PointResult(["quantity", "real", "imag"], rows, {"coefficients": values})


def _branch_rows(branches, P, delta0):
    return [[P, delta0, b.branch_id, b.I1, b.I2, b.stable.value] for b in branches]


def run_bistability(cfg: SystemConfig, options: dict) -> PointResult:
    model = CavityModel.from_config(cfg)
    kind = options.get("model", "rwa")
    mode = int(options.get("mode", 1))
    mu = float(options.get("mu", 0.1))
    tol = float(options.get("residual_tol") or RESIDUAL_TOL)
    delta0 = float(options.get("delta0", cfg.cavities[mode - 1].detuning))
    powers = linear_grid(options.get("power", (0.0, 12e-3, 200)))
    rows, errors, previous, worst = [], [], [], 0.0
    for P in powers:
        if kind == "rwa":
            res = rwa_branches(model, mode, delta0, model.epsilon(mode, P, delta0))
        else:
            res = brwa_mean_fields(model, delta0, model.epsilon(1, P, delta0), mu,
                                   seed_guess=previous)
            previous = [b.intensities for b in res]
        errors.extend(f"P={P!r}: {m}" for m in res.diagnostics)
        for b in res:
            worst = max(worst, b.residual)
            if not b.residual <= tol:
                errors.append(f"P={P!r}: branch {b.branch_id} residual {b.residual:.3g} > {tol:g}")
        rows.extend(_branch_rows(res, P, delta0))
    summary = {"model": kind, "delta0": delta0, "mu": mu if kind == "brwa" else None,
               "max_residual": worst}
    if kind == "rwa":
        folds = rwa_fold_points(model, mode, delta0)
        summary["fold_powers"] = [power_for_epsilon(model, mode, math.sqrt(e2), delta0)
                                  for _, e2 in folds]
    return PointResult(["P", "delta0", "branch_id", "I1", "I2", "stable"], rows, summary, errors)


def run_phase_diagram(cfg: SystemConfig, options: dict) -> PointResult:
    model = CavityModel.from_config(cfg)
    d0 = linear_grid(options.get("delta0", presets.FIG2["delta0"]))
    P = linear_grid(options.get("power", presets.FIG2["power"]))
    kind = options.get("model", "rwa")
    pd = phase_diagram(model, d0, P, kind=kind, mu=float(options.get("mu", 0.1)),
                       mode_index=int(options.get("mode", 1)), jobs=int(options.get("threads", 1)))
    rows = [[d0[i], P[k], int(pd.count[i, k]), pd.I_min[i, k], pd.I_max[i, k]]
            for i in range(d0.size) for k in range(P.size)]
    multi = pd.count > 1
    summary = {"model": kind, "cells": int(pd.count.size), "multistable_cells": int(multi.sum()),
               "multistable_delta0_min": float(d0[multi.any(axis=1)].min()) if multi.any() else None,
               "max_count": int(pd.count.max())}
    return PointResult(["delta0", "P", "count", "I_min", "I_max"], rows, summary,
                       list(pd.diagnostics))


def _horizon(cfg: SystemConfig, options: dict) -> float:
    if options.get("t_end") is not None:
        return float(options["t_end"])
    periods = float(options.get("periods", 10.0))
    return periods * 2.0 * math.pi / min(m.omega_m for m in cfg.mirrors)


def _simulate(cfg: SystemConfig, options: dict):
    t_end = _horizon(cfg, options)
    samples = int(options.get("samples", 400))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdiabaticityWarning)
        gain, steady = operating_point(cfg)
        dt = float(options.get("dt") or default_step(cfg, mirror_coupling(gain, steady, cfg)))
    n = max(1, math.ceil(t_end / dt - 1e-9))
    every = max(1, n // samples)
    return simulate(cfg, t_end, dt, record_every=every, tol=options.get("tol"))


def _dynamics_summary(run) -> tuple[dict, list[str]]:
    cp, tr = run.coupling, run.trajectory
    summary = {"alpha1": cp.alpha1, "alpha2": cp.alpha2, "kappa_combined": cp.kappa_combined,
               "I1": run.steady.I1, "I2": run.steady.I2, "dt": tr.dt,
               "step_error": tr.step_error, "tol": tr.tol}
    errors = []
    if tr.converged is False:
        errors.append(f"step-size check: halving dt changed R by {tr.step_error:.3g} > {tr.tol:g}")
    return summary, errors


def run_dynamics(cfg: SystemConfig, options: dict) -> PointResult:
    run = _simulate(cfg, options)
    tr = run.trajectory
    rows = [[t, *V[_UPPER]] for t, V in zip(tr.times, tr.V)]
    summary, errors = _dynamics_summary(run)
    return PointResult(["t", *V_COLUMNS], rows, summary, errors)


def covariance_from_table(header: list[str], rows: list[list[str]]):
    """Rebuild (times, V) from a dynamics CSV table."""
    idx = [header.index(c) for c in ["t", *V_COLUMNS]]
    data = np.array([[float(r[i]) for i in idx] for r in rows])
    V = np.zeros((len(data), 4, 4))
    V[:, _UPPER[0], _UPPER[1]] = data[:, 1:]
    V = V + np.triu(V, 1).transpose(0, 2, 1)
    return data[:, 0], V


def _entanglement_table(series, log2: bool):
    E = series.in_bits() if log2 else series.E_N
    rows = [[t, e, h] for t, e, h in zip(series.times, E, series.eta_minus)]
    summary = {"death_time": series.death_time, "revivals": series.revivals,
               "E_N_max": float(E.max()) if E.size else 0.0, "units": "bits" if log2 else "nats"}
    return rows, summary


def run_entanglement(cfg: SystemConfig, options: dict) -> PointResult:
    log2 = bool(options.get("log2", False))
    if options.get("input"):
        _, header, table = read_csv(Path(options["input"]))
        times, V = covariance_from_table(header, table)
        series = entanglement_series(times, V)
        rows, summary = _entanglement_table(series, log2)
        return PointResult(["t", "E_N", "eta_minus"], rows, summary)
    run = _simulate(cfg, options)
    series = entanglement_series(run.trajectory)
    rows, summary = _entanglement_table(series, log2)
    dyn, errors = _dynamics_summary(run)
    return PointResult(["t", "E_N", "eta_minus"], rows, {**summary, **dyn}, errors)


POINT_FUNCTIONS: dict[str, Callable[[SystemConfig, dict], PointResult]] = {
    "gain": run_gain,
    "bistability": run_bistability,
    "phase-diagram": run_phase_diagram,
    "dynamics": run_dynamics,
    "entanglement": run_entanglement,
}


# ---------------------------------------------------------------------------
# sweeps


def apply_axis(cfg: SystemConfig, options: dict, path: str, value) -> tuple[SystemConfig, dict]:
    """Set ``section.field`` (``cavity``/``mirror`` hit both modes) or ``options.key``."""
    section, _, name = path.partition(".")
    if not name:
        raise ConfigError(f"axis {path!r} must look like 'section.field'")
    if section == "options":
        return cfg, {**options, name: value}
    targets = {"cavity": ("cavity1", "cavity2"), "mirror": ("mirror1", "mirror2")}.get(
        section, (section,))
    changes = {}
    for t in targets:
        try:
            obj = getattr(cfg, t)
        except AttributeError:
            raise ConfigError(f"unknown axis section {section!r}") from None
        if not hasattr(obj, name):
            raise ConfigError(f"unknown axis field {path!r}")
        changes[t] = replace(obj, **{name: value})
    return replace(cfg, **changes), options


def grid_points(axes: dict[str, list]) -> list[tuple]:
    """Row-major cartesian product (last axis fastest); empty axes give one point."""
    return list(itertools.product(*axes.values()))


def _evaluate(args) -> tuple[PointResult | None, str | None]:
    subcommand, cfg_doc, options, axes, values = args
    try:
        cfg = config_from_dict(cfg_doc)
        for path, v in zip(axes, values):
            cfg, options = apply_axis(cfg, options, path, v)
        return POINT_FUNCTIONS[subcommand](cfg, options), None
    except Exception as exc:  # per-point failures are reported, not fatal
        return None, f"{type(exc).__name__}: {exc}"


@dataclass
class SweepResult:
    manifest: RunManifest
    columns: list[str]
    rows: list[list]
    summaries: list[dict]
    errors: list[dict]

    @property
    def partial(self) -> bool:
        return bool(self.errors)


def sweep(manifest: RunManifest, jobs: int | None = None) -> SweepResult:
    if manifest.subcommand not in POINT_FUNCTIONS:
        raise ConfigError(f"unknown subcommand {manifest.subcommand!r}")
    config_from_dict(manifest.config)  # validate once up front
    axes = dict(manifest.axes)
    points = grid_points(axes)
    options = {**manifest.options, **manifest.tolerances}
    tasks = [(manifest.subcommand, manifest.config, options, list(axes), p) for p in points]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(jobs, len(tasks))) as pool:
            results = list(pool.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]

    columns, rows, summaries, errors = None, [], [], []
    for idx, (p, (res, err)) in enumerate(zip(points, results)):
        point = dict(zip(axes, p))
        if res is None:
            errors.append({"index": idx, "point": point, "error": err})
            summaries.append({"index": idx, "point": point, "failed": True})
            continue
        if columns is None:
            columns = [*axes, *res.columns]
        rows.extend([*p, *r] for r in res.rows)
        summaries.append({"index": idx, "point": point, **res.summary})
        errors.extend({"index": idx, "point": point, "error": e} for e in res.errors)
    return SweepResult(manifest, columns or list(axes), rows, summaries, errors)


def write_sweep(result: SweepResult, out: Path, stem: str) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    digest = result.manifest.digest
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    write_csv(csv_path, result.columns, result.rows, digest)
    write_json(json_path, {"manifest": result.manifest.as_dict(), "points": result.summaries,
                           "errors": result.errors}, digest)
    return [csv_path, json_path]


def load_manifest(path: Path) -> RunManifest:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return RunManifest.from_dict(doc)
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# presets


def _base_config(name: str) -> SystemConfig:
    p = presets.PRESETS[name]
    if name in ("fig2", "fig3"):
        return presets.paper_config(g=p["g"], Omega=p["Omega"], eta=p["eta"])
    _, family = presets.dynamics_family(name)
    return family[0][1]


def preset_manifest(name: str, tol: float | None = 1e-8, log2: bool = False) -> RunManifest:
    if name not in presets.PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(presets.PRESETS)}")
    settings = dict(presets.PRESETS[name])
    return RunManifest("reproduce", config_to_dict(_base_config(name)),
                       options={"preset": name, "log2": log2, **settings},
                       tolerances={"residual_tol": RESIDUAL_TOL, "tol": tol})


def _sections(name: str, cfg: SystemConfig, settings: dict) -> PointResult:
    rows, errors, summary = [], [], {}
    kind = "brwa" if name == "fig3" else "rwa"
    cols = None
    for d0 in settings["sections"]:
        opts = {"model": kind, "delta0": d0, "power": settings["section_power"],
                "mu": settings.get("mu", 0.1)}
        res = run_bistability(cfg, opts)
        cols = res.columns
        rows.extend(res.rows)
        errors.extend(res.errors)
        P = np.array([r[0] for r in res.rows])
        multi = sorted({p for p in P if np.sum(P == p) > 1})
        summary[repr(d0)] = {"multistable_P_range": [multi[0], multi[-1]] if multi else None,
                             "max_residual": res.summary["max_residual"]}
    return PointResult(cols, rows, summary, errors)


def run_preset(name: str, out: Path, jobs: int | None = None, log2: bool = False,
               tol: float | None = 1e-8) -> tuple[list[Path], list]:
    """Write the data behind one figure; returns (files, errors)."""
    manifest = preset_manifest(name, tol, log2)
    digest = manifest.digest
    settings = manifest.options
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    files, errors, summary = [], [], {}

    if name in ("fig2", "fig3"):
        cfg = config_from_dict(manifest.config)
        sec = _sections(name, cfg, settings)
        path = out / f"{name}_sections.csv"
        write_csv(path, sec.columns, sec.rows, digest)
        files.append(path)
        errors.extend(sec.errors)
        summary["sections"] = sec.summary
        pd_opts = {"model": "rwa" if name == "fig2" else "brwa", "mu": settings.get("mu", 0.1),
                   "delta0": presets.FIG2["delta0"], "power": presets.FIG2["power"],
                   "threads": jobs or 1}
        pd = run_phase_diagram(cfg, pd_opts)
        path = out / f"{name}_phase.csv"
        write_csv(path, pd.columns, pd.rows, digest)
        files.append(path)
        errors.extend(pd.errors)
        summary["phase_diagram"] = pd.summary
    else:
        swept, family = presets.dynamics_family(name)
        opts = {"periods": settings["periods"], "samples": settings["samples"], "tol": tol,
                "log2": log2}
        tasks = [(v, config_to_dict(c), opts) for v, c in family]
        jobs = jobs or os.cpu_count() or 1
        if jobs > 1:
            with ProcessPoolExecutor(min(jobs, len(tasks))) as pool:
                results = list(pool.map(_preset_curve, tasks))
        else:
            results = [_preset_curve(t) for t in tasks]
        rows, curves = [], []
        for (v, _, _), (res, err) in zip(tasks, results):
            if res is None:
                errors.append({swept: v, "error": err})
                continue
            rows.extend([v, *r] for r in res.rows)
            curves.append({swept: v, **res.summary})
            errors.extend({swept: v, "error": e} for e in res.errors)
        path = out / f"{name}_entanglement.csv"
        write_csv(path, [swept, "t", "E_N", "eta_minus"], rows, digest)
        files.append(path)
        summary["swept"] = swept
        summary["curves"] = curves

    path = out / f"{name}.json"
    write_json(path, {"manifest": manifest.as_dict(), "summary": summary, "errors": errors}, digest)
    files.append(path)
    return files, errors


def _preset_curve(args):
    _, cfg_doc, opts = args
    try:
        return run_entanglement(config_from_dict(cfg_doc), opts), None
    except Exception as exc:
        return None, f"{type(exc).__name__}: {exc}"
