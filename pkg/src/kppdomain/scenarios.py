"""Scenario configs, dispatch, reports and acceptance evaluation."""

from __future__ import annotations

import copy
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from . import analysis, eigen, geometry, io, reaction, steady
from .operators import Field

REPORT_SCHEMA_VERSION = 1
TOOLKIT_VERSION = "0.1.0"

log = logging.getLogger("kppdomain")

KINDS = (
    "eigen",
    "exhaustion",
    "lieb",
    "spectrum",
    "decompose",
    "steady",
    "uniqueness",
    "nonuniqueness",
    "hair_trigger",
    "bulb",
)

DEFAULTS = {
    "reaction": {"preset": "logistic", "params": {}},
    "solver": {"dt": 0.1, "max_steps": steady.MAX_STEPS, "epsilon": 0.1},
    "params": {},
    "output": {"dir": "out", "dump_fields": False},
    "seed": 0,
    "acceptance": {},
}


class ConfigError(ValueError):
    """Schema or semantic validation failure (exit code 2)."""


class SolverFailure(RuntimeError):
    """Numerical failure inside a scenario (exit code 3)."""


def _schema():
    text = resources.files("kppdomain").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


def validate_config(cfg) -> dict:
    """Validate against the schema and fill defaults; returns the resolved config."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    v = jsonschema.Draft202012Validator(_schema())
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"/{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(lines))
    out = copy.deepcopy(cfg)
    for key, val in DEFAULTS.items():
        if key not in out:
            out[key] = copy.deepcopy(val)
        elif isinstance(val, dict):
            merged = copy.deepcopy(val)
            merged.update(out[key])
            out[key] = merged
    out["domain"].setdefault("params", {})
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        return yaml.safe_load(fh)


# building blocks --------------------------------------------------------------

BUILDERS = {
    "rectangle": geometry.build_rectangle,
    "strip": geometry.build_strip,
    "interval": geometry.build_interval,
    "disk": geometry.build_disk,
    "comb": geometry.build_comb,
    "bulb": geometry.build_bulb,
}


def build_domain(spec: dict, base_dir: Path | None = None) -> geometry.DomainModel:
    params = dict(spec.get("params", {}))
    b = spec["builder"]
    if b == "file":
        path = Path(params["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        dom = io.read_domain(path)
    else:
        try:
            dom = BUILDERS[b](**params)
        except TypeError as e:
            raise ConfigError(f"/domain/params: {e}") from None
    if "sigma" in spec:
        dom = geometry.from_mask(dom.grid, dom.mask, spec["sigma"], dom.tags)
    return dom


def build_reaction(spec: dict) -> reaction.ReactionSpec:
    try:
        return reaction.make_reaction(spec["preset"], **spec.get("params", {}))
    except TypeError as e:
        raise ConfigError(f"/reaction/params: {e}") from None


def _need(params: dict, *keys):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ConfigError(f"/params: missing required keys {missing}")


# scenario kinds ---------------------------------------------------------------


def _domain_info(dom):
    g = dom.grid
    return {"h": g.h, "nx": g.nx, "ny": g.ny, "origin": list(g.origin), "cells": dom.n_cells}


def _run_eigen(cfg, dom, ctx):
    pair = eigen.domain_eigenpair(dom)
    if pair is None:
        return {"lambda": math.inf, "empty": True}
    ctx["fields"]["phi"] = pair.phi
    return {
        "lambda": pair.lam,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "phi_min": float(pair.phi.values.min()),
        "components": len(geometry.components(dom)),
    }


def _run_exhaustion(cfg, dom, ctx):
    p = cfg["params"]
    _need(p, "center", "radii")
    curve = eigen.exhaustion_curve(dom, p["center"], p["radii"])
    lams = [lam for _, lam in curve]
    full = eigen.principal_eigenvalue(dom)
    finite = [x for x in lams if math.isfinite(x)]
    mono = all(b <= a + 1e-9 for a, b in zip(finite, finite[1:]))
    cover = geometry.intersect_ball(dom, p["center"], p["radii"][-1]).n_cells / dom.n_cells
    return {
        "curve": [[r, lam] for r, lam in curve],
        "lambda_full": full,
        "monotone": mono,
        "final_rel_err": abs(lams[-1] - full) / abs(full) if full else abs(lams[-1]),
        "final_coverage": cover,
    }


def _run_lieb(cfg, dom, ctx):
    p = cfg["params"]
    _need(p, "R")
    scan = eigen.lieb_scan(dom, p["R"], p.get("stride", p["R"] / 2), slack=p.get("slack", 0.05))
    ctx["tables"]["scan.csv"] = scan.samples
    return scan.summary()


def _run_spectrum(cfg, dom, ctx):
    p = cfg["params"]
    _need(p, "centers", "window_radius")
    probes = eigen.spectrum_probe(dom, p["centers"], p["window_radius"])
    return {
        "probes": [[c[0], c[1], lam] for c, lam in probes],
        "window_radius": p["window_radius"],
    }


def _run_decompose(cfg, dom, ctx):
    p = cfg["params"]
    _need(p, "mu", "delta", "R")
    try:
        res = eigen.ample_narrow_decompose(dom, p["mu"], p["delta"], p["R"], p.get("stride"), p.get("K"))
    except eigen.DecompositionError as e:
        res = e.result
    ctx["tables"]["local_map.csv"] = res.local_map.samples
    ctx["fields"]["narrow"] = Field(res.narrow_mask[dom.mask].astype(float), dom)
    ctx["fields"]["ample"] = Field(res.ample_mask[dom.mask].astype(float), dom)
    out = res.summary()
    covered = (res.ample_mask | res.narrow_mask)[dom.mask].all()
    out["covers_domain"] = bool(covered)
    return out


def _initial(dom, spec):
    kind = spec.get("type", "constant")
    if kind == "constant":
        return Field.constant(dom, spec.get("value", 1.0))
    if kind == "bump":
        return steady.bump(dom, spec["center"], spec["radius"], spec.get("height", 1e-3))
    if kind == "random":
        rng = np.random.default_rng(spec.get("seed", 0))
        return Field(rng.uniform(0.0, spec.get("value", 1.0), dom.n_cells), dom)
    raise ConfigError(f"/params/initial/type: unknown initial data {kind!r}")


def _run_steady(cfg, dom, ctx):
    r = ctx["reaction"]
    s = cfg["solver"]
    init = _initial(dom, cfg["params"].get("initial", {}))
    res = steady.flow_to_steady(dom, r, init, steady.stable_dt(r, s["dt"]), s["max_steps"])
    ctx["fields"]["u"] = res.u
    out = res.summary()
    out["lambda"] = eigen.principal_eigenvalue(dom)
    return out


def _run_uniqueness(cfg, dom, ctx):
    r = ctx["reaction"]
    s = cfg["solver"]
    res = steady.uniqueness_test(dom, r, s["epsilon"], s["dt"], max_steps=s["max_steps"])
    ctx["fields"]["u_min"] = res.minimal.u
    ctx["fields"]["u_max"] = res.maximal.u
    out = res.summary()
    out["min_increment_minimal"] = res.minimal.min_increment
    out["max_increment_maximal"] = res.maximal.max_increment
    return out


def _run_nonuniqueness(cfg, dom, ctx):
    r = ctx["reaction"]
    s = cfg["solver"]
    lo = steady.minimal_solution(dom, r, s["epsilon"], s["dt"], s["max_steps"])
    hi = steady.maximal_solution(dom, r, s["dt"], s["max_steps"])
    ctx["fields"]["u_min"] = lo.u
    ctx["fields"]["u_max"] = hi.u
    return {
        "minimal": lo.summary(),
        "maximal": hi.summary(),
        "sup_minus": lo.sup_u,
        "sup_plus": hi.sup_u,
        "gap": float(np.abs(hi.u.values - lo.u.values).max()),
        "energy_plus": reaction.energy(dom, r, hi.u),
        "energy_minus": reaction.energy(dom, r, lo.u),
        "reaction": r.summary(),
    }


def _run_hair_trigger(cfg, dom, ctx):
    r = ctx["reaction"]
    s = cfg["solver"]
    p = cfg["params"]
    _need(p, "bump_center", "bump_radius")
    heights = p.get("heights", [p.get("height", 1e-3)])
    lo = steady.minimal_solution(dom, r, s["epsilon"], s["dt"], s["max_steps"])
    runs = []
    for hgt in heights:
        res = steady.hair_trigger_test(
            dom, r, p["bump_center"], p["bump_radius"], hgt, dt=s["dt"], minimal=lo, max_steps=s["max_steps"]
        )
        runs.append({"height": hgt, "passed": res.passed, "deficit": res.deficit, "flow": res.flow.summary()})
    ctx["fields"]["u_min"] = lo.u
    return {"runs": runs, "all_passed": all(x["passed"] for x in runs), "minimal": lo.summary()}


def _run_bulb(cfg, dom, ctx):
    r = ctx["reaction"]
    s = cfg["solver"]
    p = cfg["params"]
    res = steady.maximal_solution(dom, r, s["dt"], s["max_steps"])
    ctx["fields"]["u"] = res.u
    if res.classification != "positive_steady":
        raise SolverFailure(f"bulb flow ended as {res.classification}")
    K = p.get("K_max", 5)
    prof = analysis.transverse_fourier(res.u, None, None, K, r.B)
    ctx["profile"] = prof
    win = p.get("window") or list(analysis.default_window(prof))
    fit = analysis.decay_fit(prof, win)
    x, c = analysis.centerline(res.u)
    sel = (x >= win[0]) & (x <= win[1])
    target = 9.0 * math.pi / (4.0 * r.B)
    cl = x[sel] ** 2 * c[sel]
    k_end = int(np.flatnonzero(sel)[-1])
    ode_w = p.get("ode_width", 1.0)
    return {
        "flow": res.summary(),
        "lambda": eigen.principal_eigenvalue(dom),
        "tail_width": prof.L,
        "zeta": prof.zeta,
        "fit": fit.summary(),
        "c_fit": fit.c_fit,
        "c_theory": fit.c_theory,
        "rel_err": fit.rel_err,
        "slope_free": fit.slope_free,
        "centerline_target": target,
        "centerline_max_rel_err": float(np.max(np.abs(cl - target)) / target),
        "higher_mode_ratio_end": float(np.max(np.abs(prof.alpha[1:, k_end])) / prof.alpha[0, k_end]),
        "ode_defect_15": analysis.ode_shadow(prof, (15.0, 15.0 + ode_w)),
        "ode_defect_30": analysis.ode_shadow(prof, (30.0, 30.0 + ode_w)),
        "ode_defect_improves": analysis.ode_shadow(prof, (30.0, 30.0 + ode_w))
        < analysis.ode_shadow(prof, (15.0, 15.0 + ode_w)),
        "sine_distance_30": analysis.sine_profile_distance(res.u, 30.0),
        "parseval_max_rel_err": float(prof.parseval_error().max()),
    }


RUNNERS = {
    "eigen": _run_eigen,
    "exhaustion": _run_exhaustion,
    "lieb": _run_lieb,
    "spectrum": _run_spectrum,
    "decompose": _run_decompose,
    "steady": _run_steady,
    "uniqueness": _run_uniqueness,
    "nonuniqueness": _run_nonuniqueness,
    "hair_trigger": _run_hair_trigger,
    "bulb": _run_bulb,
}


# acceptance -------------------------------------------------------------------


def _lookup(results: dict, path: str):
    cur = results
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        else:
            cur = cur[part]
    return cur


def evaluate_acceptance(results: dict, acceptance: dict) -> dict:
    checks = []
    for key in sorted(acceptance):
        rule = acceptance[key]
        try:
            val = _lookup(results, key)
        except (KeyError, IndexError, ValueError, TypeError):
            checks.append({"key": key, "passed": False, "value": None, "reason": "missing"})
            continue
        ok = True
        if "equals" in rule:
            ok &= val == rule["equals"]
        if "min" in rule:
            ok &= val >= rule["min"]
        if "max" in rule:
            ok &= val <= rule["max"]
        if "target" in rule:
            tol = rule.get("abs_tol", 0.0) + rule.get("rel_tol", 0.0) * abs(rule["target"])
            ok &= abs(val - rule["target"]) <= tol
        checks.append({"key": key, "passed": bool(ok), "value": val})
    return {"passed": all(c["passed"] for c in checks), "checks": checks}


# driver -----------------------------------------------------------------------


@dataclass
class Report:
    data: dict
    exit_code: int
    out_dir: Path | None = None

    @property
    def passed(self) -> bool:
        return self.exit_code == 0


def run_scenario(
    cfg: dict,
    out_dir=None,
    dump_fields: bool | None = None,
    base_dir: Path | None = None,
    write: bool = True,
) -> Report:
    """Run one scenario; exit code 0 ok, 1 acceptance failed, 2 invalid config, 3 solver failure."""
    t0 = time.time()
    try:
        cfg = validate_config(cfg)
    except ConfigError as e:
        return Report({"error": str(e), "stage": "validation"}, 2)
    out = Path(out_dir) if out_dir is not None else Path(cfg["output"]["dir"])
    if base_dir is not None and not out.is_absolute() and out_dir is None:
        out = base_dir / out
    dump = cfg["output"]["dump_fields"] if dump_fields is None else dump_fields
    ctx = {"fields": {}, "tables": {}, "profile": None}
    log.info("scenario %s (%s)", cfg["name"], cfg["kind"])
    report = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "toolkit_version": TOOLKIT_VERSION,
        "config": cfg,
    }
    try:
        dom = build_domain(cfg["domain"], base_dir)
        ctx["reaction"] = build_reaction(cfg["reaction"])
        report["domain"] = _domain_info(dom)
        report["reaction"] = ctx["reaction"].summary()
        results = RUNNERS[cfg["kind"]](cfg, dom, ctx)
    except (ConfigError, reaction.ReactionConfigError, ValueError) as e:
        report.update({"error": str(e), "stage": "validation"})
        code = 2
        results = None
    except (eigen.EigenSolverError, steady.FlowBlowUp, steady.SubsolutionError, SolverFailure, RuntimeError, ArithmeticError) as e:
        report.update({"error": f"{type(e).__name__}: {e}", "stage": "solve"})
        code = 3
        results = None
    if results is not None:
        report["results"] = results
        report["acceptance"] = evaluate_acceptance(results, cfg["acceptance"])
        code = 0 if report["acceptance"]["passed"] else 1
    if write:
        out.mkdir(parents=True, exist_ok=True)
        io.write_json(report, out / f"{cfg['name']}.json")
        io.write_json(
            {"started": t0, "finished": time.time(), "runtime_s": time.time() - t0, "pid": os.getpid()},
            out / f"{cfg['name']}.meta.json",
        )
        for name, table in ctx["tables"].items():
            io.write_scan_csv(table, out / f"{cfg['name']}.{name}")
        if dump and results is not None:
            io.write_domain(dom, out / f"{cfg['name']}.domain.txt")
            for name, fld in ctx["fields"].items():
                io.write_field_raw(fld, out / f"{cfg['name']}.{name}.f64")
                io.write_field_csv(fld, out / f"{cfg['name']}.{name}.csv")
            if ctx["profile"] is not None:
                io.write_profile_csv(ctx["profile"], out / f"{cfg['name']}.profile.csv")
    return Report(report, code, out)


def load_suite(path) -> tuple[list[dict], Path, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"suite file {path} not found")
    doc = yaml.safe_load(path.read_text()) or {}
    items = []
    for entry in doc.get("scenarios", []) or []:
        if isinstance(entry, dict) and set(entry) == {"config"}:
            p = Path(entry["config"])
            if not p.is_absolute():
                p = path.parent / p
            if not p.exists():
                raise FileNotFoundError(f"scenario config {p} not found")
            items.append(load_config(p))
        else:
            items.append(entry)
    return items, path.parent, doc


def run_suite(suite_file, out_dir="out", workers: int = 1, only=None) -> dict:
    """Run every scenario of a suite; each writes into its own subdirectory."""
    items, base, doc = load_suite(suite_file)
    if only:
        items = [c for c in items if isinstance(c, dict) and c.get("name") in set(only)]
    out = Path(out_dir)

    def one(cfg):
        name = cfg.get("name", "unnamed") if isinstance(cfg, dict) else "unnamed"
        rep = run_scenario(cfg, out / name, base_dir=base)
        return {"name": name, "exit_code": rep.exit_code, "passed": rep.passed}

    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, items))
    else:
        results = [one(c) for c in items]
    summary = {
        "suite": doc.get("name", Path(suite_file).stem),
        "total": len(results),
        "passed": sum(r["passed"] for r in results),
        "failed": sum(not r["passed"] for r in results),
        "scenarios": results,
        "toolkit_version": TOOLKIT_VERSION,
    }
    summary["exit_code"] = 0 if summary["failed"] == 0 else 1
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(summary, out / "suite_summary.json")
    return summary


def shipped_suite(name: str = "paper_checks") -> Path:
    return Path(str(resources.files("kppdomain").joinpath(f"suites/{name}.yaml")))
