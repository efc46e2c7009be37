"""Batch experiments: parameter sweeps with CSV/JSON outputs and threshold checks."""

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .energies import (
    BoundaryData,
    MesoscaleParams,
    ReferenceProfile,
    TwoScaleParams,
    bv_energy,
    continuum_energy_meso,
    continuum_energy_twoscale,
    energy_gap,
)
from .functions import (
    ChainState,
    StepFunction,
    UniformPartition,
    l1_distance_window,
    var_of_p_composed,
    write_samples_csv,
)
from .minimize import MinimizeConfig, minimize_energy
from .potential import PairPotentialSpec, WeakPotential, validate_potential
from .profile import ConstructionError, equipartition, heteroclinic_profile, recovery_bv
from .quadrature import composite_simpson

EXPERIMENTS = (
    "validate-potential",
    "profile",
    "minimize",
    "sweep-delta",
    "sweep-epsilon",
    "gap-order",
    "recovery",
)
GRIDLESS = ("validate-potential", "profile")
CSV_COLUMNS = ["param1", "param2", "energy", "target", "rel_err", "wall_count", "converged"]


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    potential: PairPotentialSpec = field(default_factory=PairPotentialSpec)
    window_halfwidth: float = 20.0
    parameter_grid: tuple = ()
    boundary: BoundaryData = BoundaryData(0, 1)
    output_dir: str = "fkup-out"
    seed: int = 0
    target: StepFunction = None
    test_profile: str = "reference"
    eta: float = 1e-4
    minimize: MinimizeConfig = field(default_factory=MinimizeConfig)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.window_halfwidth < 5:
            raise ConfigError("window_halfwidth must be at least 5")
        if self.seed < 0 or int(self.seed) != self.seed:
            raise ConfigError("seed must be a nonnegative integer")
        if self.test_profile not in ("reference", "constant"):
            raise ConfigError(f"unknown test_profile {self.test_profile!r}")
        grid = self.parameter_grid
        if self.experiment not in GRIDLESS:
            if not grid:
                raise ConfigError("parameter_grid must be nonempty")
            widths = {len(p) for p in grid}
            if len(widths) != 1:
                raise ConfigError("parameter_grid entries must all have the same length")
            for prev, cur in zip(grid, grid[1:]):
                if any(c > p for c, p in zip(cur, prev)) or cur == prev:
                    raise ConfigError("parameter_grid must be sorted decreasing")

    @classmethod
    def from_dict(cls, data):
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment'")
        kw = dict(data)
        try:
            if "potential" in kw:
                kw["potential"] = PairPotentialSpec.from_dict(kw["potential"])
            if "boundary" in kw:
                b = kw["boundary"]
                kw["boundary"] = BoundaryData(*b) if isinstance(b, list) else BoundaryData(**b)
            if "parameter_grid" in kw:
                kw["parameter_grid"] = tuple(
                    tuple(float(v) for v in (p if isinstance(p, list) else [p]))
                    for p in kw["parameter_grid"]
                )
            if kw.get("target") is not None:
                kw["target"] = StepFunction.from_dict(kw["target"])
            if "minimize" in kw:
                kw["minimize"] = MinimizeConfig(**kw["minimize"])
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "potential": self.potential.to_dict(),
            "window_halfwidth": self.window_halfwidth,
            "parameter_grid": [list(p) for p in self.parameter_grid],
            "boundary": [self.boundary.m_left, self.boundary.m_right],
            "output_dir": self.output_dir,
            "seed": self.seed,
            "target": self.target.to_dict() if self.target else None,
            "test_profile": self.test_profile,
            "eta": self.eta,
            "minimize": {
                f.name: getattr(self.minimize, f.name) for f in fields(self.minimize)
            },
        }


def _digest(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class SweepResult:
    experiment: str
    rows: list = field(default_factory=list)
    fitted_order: float = None
    checks: list = field(default_factory=list)
    samples: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def check(self, name, passed, **detail):
        self.checks.append({"name": name, "passed": bool(passed), **detail})

    def summary(self):
        out = {"experiment": self.experiment, "passed": self.passed}
        if self.fitted_order is not None:
            out["fitted_order"] = self.fitted_order
        out["checks"] = self.checks
        out["rows"] = self.rows
        return out


def make_row(params, energy, target, diagnostics, provenance):
    if target:
        rel = abs(energy - target) / abs(target)
    else:
        rel = float("nan")
    return {
        "params": list(params),
        "energy": energy,
        "target": target,
        "relative_error": rel,
        "diagnostics": diagnostics,
        "provenance": provenance,
    }


def _provenance(cfg):
    return {
        "config_hash": _digest({k: v for k, v in cfg.to_dict().items() if k != "output_dir"}),
        "potential_hash": _digest(cfg.potential.to_dict()),
        "code_version": __version__,
    }


def _map(fn, items, jobs):
    if jobs and jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def run_validate_potential(cfg, jobs=1):
    pot = WeakPotential(cfg.potential)
    report = validate_potential(pot)
    res = SweepResult(cfg.experiment)
    diag = report.to_dict()
    res.check("assumptions on w", report.passed, diagnostics=list(report.diagnostics))
    if not report.passed:
        # p_bar is meaningless without a nonnegative w
        res.rows.append(make_row((), float("nan"), None, diag, _provenance(cfg)))
        raise ExperimentError(
            "potential fails validation: " + "; ".join(report.diagnostics), res
        )
    p_bar = pot.p_bar
    oracle = composite_simpson(lambda t: 2.0 * pot.sqrt_w(t), 0.0, 1.0, 10**6)
    diag["p_bar_oracle"] = oracle
    res.rows.append(make_row((), p_bar, oracle, diag, _provenance(cfg)))
    res.check("p_bar matches Simpson oracle", abs(p_bar - oracle) <= 1e-8,
              difference=abs(p_bar - oracle))
    return res


def run_profile(cfg, jobs=1):
    pot = WeakPotential(cfg.potential)
    prof = heteroclinic_profile(pot, cfg.eta)
    eq = equipartition(prof, pot)
    res = SweepResult(cfg.experiment)
    diag = {
        "dirichlet": eq.dirichlet,
        "weak": eq.weak,
        "tail_correction": eq.tail_correction,
        "x_end": prof.x_end,
        "kappa": prof.kappa,
    }
    res.rows.append(make_row((cfg.eta,), eq.dirichlet + eq.weak, pot.p_bar, diag, _provenance(cfg)))
    half = pot.p_bar / 2.0
    tol = 1e-4 * pot.p_bar
    res.check("equipartition", eq.imbalance <= tol, imbalance=eq.imbalance, tolerance=tol)
    res.check("dirichlet half", abs(eq.dirichlet - half) <= tol, error=abs(eq.dirichlet - half))
    res.check("weak half", abs(eq.weak - half) <= tol, error=abs(eq.weak - half))
    res.samples["profile"] = prof.samples()
    return res


def _params(entry):
    if len(entry) == 1:
        return "meso", MesoscaleParams(entry[0])
    if len(entry) == 2:
        return "twoscale", TwoScaleParams(entry[0], entry[1])
    raise ConfigError(f"grid entry {entry} must hold (delta) or (epsilon, delta)")


def _minimize_row(args):
    cfg, entry = args
    pot = WeakPotential(cfg.potential)
    kind, params = _params(entry)
    window = UniformPartition.symmetric(params.spacing, cfg.window_halfwidth)
    result = minimize_energy(kind, params, pot, cfg.boundary, window, cfg.minimize)
    g = result.chain.lift()
    if kind == "meso":
        cont = continuum_energy_meso(g, pot, params)
    else:
        cont = continuum_energy_twoscale(g, pot, params)
    diag = result.diagnostics()
    diag["continuum_energy"] = cont
    diag["var_lower_bound"] = var_of_p_composed(g, pot)
    target = abs(cfg.boundary.jump) * pot.p_bar
    row = make_row(entry, result.energy, target, diag, _provenance(cfg))
    return row, (g.nodes, g.node_values)


def _run_minimizations(cfg, jobs):
    res = SweepResult(cfg.experiment)
    out = _map(_minimize_row, [(cfg, e) for e in cfg.parameter_grid], jobs)
    for k, (row, sample) in enumerate(out):
        res.rows.append(row)
        res.samples[f"minimizer_{k}"] = sample
    return res


def _final_minimization_checks(res, cfg, tol):
    last = res.rows[-1]
    jump = abs(cfg.boundary.jump)
    res.check("final relative error", last["relative_error"] <= tol,
              value=last["relative_error"], tolerance=tol)
    res.check("final wall count", last["diagnostics"]["wall_count"] == jump,
              value=last["diagnostics"]["wall_count"], expected=jump)


def run_minimize(cfg, jobs=1):
    res = _run_minimizations(cfg, jobs)
    kind, _ = _params(cfg.parameter_grid[-1])
    _final_minimization_checks(res, cfg, 0.01 if kind == "meso" else 0.05)
    return res


def run_sweep_delta(cfg, jobs=1):
    if (cfg.boundary.m_left, cfg.boundary.m_right) != (0, 1):
        raise ConfigError("sweep-delta runs with boundary (0, 1)")
    if any(len(e) != 1 for e in cfg.parameter_grid):
        raise ConfigError("sweep-delta grid entries are single delta values")
    res = _run_minimizations(cfg, jobs)
    tol = 10.0 * cfg.potential.quadrature_tol
    rows = res.rows
    bound_ok = all(
        r["diagnostics"]["continuum_energy"] >= r["diagnostics"]["var_lower_bound"] - tol
        for r in rows
    )
    res.check("variation lower bound", bound_ok)
    cont = [r["diagnostics"]["continuum_energy"] for r in rows]
    res.check("nested grids lower the energy",
              all(b <= a + 1e-6 for a, b in zip(cont, cont[1:])), energies=cont)
    rel = [r["relative_error"] for r in rows]
    res.check("relative error nonincreasing (10% slack)",
              all(b <= 1.1 * a for a, b in zip(rel, rel[1:])), errors=rel)
    res.check("all rows converged", all(r["diagnostics"]["converged"] for r in rows))
    _final_minimization_checks(res, cfg, 0.01)
    return res


def run_sweep_epsilon(cfg, jobs=1):
    if any(len(e) != 2 for e in cfg.parameter_grid):
        raise ConfigError("sweep-epsilon grid entries are (epsilon, delta) pairs")
    res = _run_minimizations(cfg, jobs)
    _final_minimization_checks(res, cfg, 0.03 if abs(cfg.boundary.jump) == 1 else 0.05)
    return res


def fit_order(params, values):
    """Least-squares slope of log(values) against log(params)."""
    slope, _ = np.polyfit(np.log(params), np.log(values), 1)
    return float(slope)


def _gap_row(args):
    cfg, delta = args
    pot = WeakPotential(cfg.potential)
    mp = MesoscaleParams(delta)
    window = UniformPartition.symmetric(delta, cfg.window_halfwidth)
    if cfg.test_profile == "reference":
        values = ReferenceProfile(cfg.boundary)(window.nodes)
        values[0], values[-1] = cfg.boundary.m_left, cfg.boundary.m_right
    else:
        values = np.full(window.size, float(cfg.boundary.m_left))
    chain = ChainState(delta, values, window.i_min)
    gap = energy_gap(chain, pot, mp)
    return make_row((delta,), gap, None, {"window": window.to_dict()}, _provenance(cfg))


def run_gap_order(cfg, jobs=1):
    grid = [e[0] for e in cfg.parameter_grid]
    if any(len(e) != 1 for e in cfg.parameter_grid) or len(grid) < 4:
        raise ConfigError("gap-order needs at least four single-delta grid entries")
    if any(not math.isclose(a / b, 2.0, rel_tol=1e-9) for a, b in zip(grid, grid[1:])):
        raise ConfigError("gap-order grid must halve delta at every step")
    res = SweepResult(cfg.experiment)
    res.rows = _map(_gap_row, [(cfg, d) for d in grid], jobs)
    noise = 10.0 * cfg.potential.quadrature_tol
    usable = [(d, r["energy"]) for d, r in zip(grid, res.rows) if r["energy"] > noise]
    if len(usable) < 3:
        raise ExperimentError("degenerate fit: fewer than 3 gaps above the noise floor", res)
    res.fitted_order = fit_order(*zip(*usable))
    res.check("fitted order in [1.8, 2.2]", 1.8 <= res.fitted_order <= 2.2,
              value=res.fitted_order)
    return res


def _recovery_row(args):
    cfg, entry = args
    pot = WeakPotential(cfg.potential)
    target = cfg.target or StepFunction.unit_step()
    eps, delta = entry
    goal = bv_energy(target, pot)
    L = cfg.window_halfwidth
    try:
        g = recovery_bv(pot, eps, delta, target)
    except ConstructionError as exc:
        diag = {"converged": False, "wall_count": 0, "error": str(exc)}
        return make_row(entry, float("nan"), goal, diag, _provenance(cfg)), None
    energy = continuum_energy_twoscale(g, pot, TwoScaleParams(eps, delta))
    diag = {
        "converged": True,
        "wall_count": sum(abs(k) for k in target.jumps),
        "l1_distance": l1_distance_window(g, target, -L, L),
        "cells": g.partition.size - 1,
    }
    row = make_row(entry, energy, goal, diag, _provenance(cfg))
    keep = slice(None) if g.partition.size <= 20001 else slice(None, None, g.partition.size // 20000)
    return row, (g.nodes[keep], g.node_values[keep])


def run_recovery(cfg, jobs=1):
    if any(len(e) != 2 for e in cfg.parameter_grid):
        raise ConfigError("recovery grid entries are (epsilon, delta) pairs")
    target = cfg.target or StepFunction.unit_step()
    res = SweepResult(cfg.experiment)
    for k, (row, sample) in enumerate(
        _map(_recovery_row, [(cfg, e) for e in cfg.parameter_grid], jobs)
    ):
        res.rows.append(row)
        if sample is not None:
            res.samples[f"recovery_{k}"] = sample
    rows = res.rows
    res.check("all rows constructed", all(r["diagnostics"]["converged"] for r in rows))
    var = sum(abs(k) for k in target.jumps)
    tol = {1: 0.02, 2: 0.03}.get(var, 0.05)
    last = rows[-1]["relative_error"]
    res.check("final relative error", last <= tol, value=last, tolerance=tol)
    rel = [r["relative_error"] for r in rows]
    res.check("energy error decreasing", all(b < a for a, b in zip(rel, rel[1:])), errors=rel)
    l1 = [r["diagnostics"].get("l1_distance", float("nan")) for r in rows]
    res.check("L1 distance decreasing", all(b < a for a, b in zip(l1, l1[1:])), distances=l1)
    return res


RUNNERS = {
    "validate-potential": run_validate_potential,
    "profile": run_profile,
    "minimize": run_minimize,
    "sweep-delta": run_sweep_delta,
    "sweep-epsilon": run_sweep_epsilon,
    "gap-order": run_gap_order,
    "recovery": run_recovery,
}


def run_experiment(cfg, jobs=1):
    return RUNNERS[cfg.experiment](cfg, jobs)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if not math.isfinite(v):
        return ""
    return repr(float(v))


def write_outputs(res, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in res.rows:
            params = list(row["params"]) + [None, None]
            diag = row["diagnostics"]
            writer.writerow([
                _fmt(params[0]),
                _fmt(params[1]),
                _fmt(row["energy"]),
                _fmt(row["target"]),
                _fmt(row["relative_error"]),
                _fmt(diag.get("wall_count")),
                _fmt(diag.get("converged")),
            ])
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(_jsonable(res.summary()), fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, (x, v) in res.samples.items():
        write_samples_csv(os.path.join(out_dir, f"{name}.csv"), x, v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
