"""Scenario runner.

A scenario is one JSON document::

    {"name": ..., "m": 2,
     "exprs":   {"f": "x1^2 + x2"},
     "maps":    {"phi": ["x1*cos(x2)", "x1*sin(x2)"]},
     "domains": {"disk": {"kind": "ball", "center": [0, 0], "radius": 1}},
     "quad":    {"gauss_order": 16, "subdivisions": 4},
     "checks":  [{"kind": "check_cov", "f": "f", "phi": "phi", ...}]}

Expressions use x1..xm unless given as {"src": ..., "vars": [...]}.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import expr as _expr
from .diff import DiffConfig
from .expr import ExprError, parse_map, parse_scalar
from .geom import Ball, Box, DomainError, Graph, coord_names
from .packing import disks_to_balls, exhaust_rectangle
from .quad import QuadScheme, worker_count
from .retract import InadmissibleCandidate, check_nonretraction, screen_candidate
from .theorems import (
    VerifyReport,
    ball_exhaustion_check,
    check_cofactor_flux,
    check_cov,
    check_cov_singly,
    check_divergence,
    check_hadamard,
    check_mc,
    check_potential,
    check_surface_measure,
)

FIXED_CLOCK = "1970-01-01T00:00:00Z"
CSV_COLUMNS = ("scenario", "check", "lhs", "rhs", "residual", "rel_residual", "tol", "pass")
DOMAIN_KINDS = ("box", "ball", "graph")
QUAD_KEYS = ("gauss_order", "subdivisions", "rel_tol", "mc_seed", "rel_step")


class ScenarioError(ValueError):
    """Invalid scenario; the message names the offending key."""


# -- checks --------------------------------------------------------------------
# kind -> (required params with their expected binding, optional params)
# bindings: expr, map, domain, ball, point, points, number, balls


CHECKS = {
    "check_divergence": ({"F": "map", "D": "domain"}, {}),
    "check_cov": ({"f": "expr", "phi": "map", "omega": "domain", "D": "domain"}, {}),
    "check_cov_singly": ({"f": "expr", "phi": "map", "omega": "ball", "D": "domain"}, {"boundary_route": "bool"}),
    "check_hadamard": ({"phi": "map", "x": "point"}, {}),
    "check_cofactor_flux": ({"f": "expr", "phi": "map", "x": "point", "a": "number"}, {}),
    "check_potential": ({"f": "expr", "a": "number", "points": "points"}, {}),
    "check_nonretraction": ({"T": "map"}, {}),
    "ball_exhaustion_check": (
        {"f": "expr", "phi": "map", "omega": "domain", "D": "domain"},
        {"balls": "balls", "packing": "packing"},
    ),
    "check_mc": ({"f": "expr", "D": "domain"}, {"n_samples": "number", "n_sigma": "number"}),
    "surface_measure": ({"D": "domain", "expected": "number"}, {}),
}

DEFAULT_TOLS = {
    "check_divergence": 1e-6,
    "check_cov": 1e-7,
    "check_cov_singly": 1e-7,
    "check_hadamard": 1e-4,
    "check_cofactor_flux": 1e-4,
    "check_potential": 1e-6,
    "check_nonretraction": 1e-10,
    "ball_exhaustion_check": 1e-7,
    "check_mc": None,
    "surface_measure": 1e-6,
}


@dataclass
class Scenario:
    name: str
    m: int
    exprs: dict = field(default_factory=dict)
    maps: dict = field(default_factory=dict)
    domains: dict = field(default_factory=dict)
    quad: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)


def _number(v, key):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{key}: expected a number, got {v!r}")
    if not math.isfinite(v):
        raise ScenarioError(f"{key}: expected a finite number")
    return float(v)


def _vector(v, n, key):
    if not isinstance(v, list) or (n is not None and len(v) != n):
        raise ScenarioError(f"{key}: expected a list of {n} numbers")
    return tuple(_number(x, f"{key}[{i}]") for i, x in enumerate(v))


def _source(entry, default_vars, key):
    if isinstance(entry, dict):
        if "src" not in entry:
            raise ScenarioError(f"{key}: missing 'src'")
        return entry["src"], entry.get("vars", default_vars)
    return entry, default_vars


def _parse_quad(raw, key="quad"):
    if not isinstance(raw, dict):
        raise ScenarioError(f"{key}: expected an object")
    unknown = set(raw) - set(QUAD_KEYS)
    if unknown:
        raise ScenarioError(f"{key}: unknown keys {sorted(unknown)}")
    return raw


def _make_quad(settings):
    kw = dict(settings)
    step = kw.pop("rel_step", None)
    if step is not None:
        kw["diff"] = DiffConfig(rel_step=float(step))
    try:
        return QuadScheme(**kw)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"quad: {exc}") from exc


def _parse_domain(name, entry, m):
    key = f"domains.{name}"
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ScenarioError(f"{key}: expected an object with 'kind'")
    kind = entry["kind"]
    try:
        if kind == "box":
            return Box(_vector(entry.get("lo"), m, key + ".lo"), _vector(entry.get("hi"), m, key + ".hi"))
        if kind == "ball":
            return Ball(_vector(entry.get("center"), m, key + ".center"), _number(entry.get("radius"), key + ".radius"))
        if kind == "graph":
            axis = entry.get("axis")
            if not isinstance(axis, int) or not 1 <= axis <= m:
                raise ScenarioError(f"{key}.axis: expected an integer in 1..{m}")
            base = tuple(n for i, n in enumerate(coord_names(m)) if i != axis - 1)
            lower = parse_scalar(str(entry.get("lower", "")), base)
            upper = parse_scalar(str(entry.get("upper", "")), base)
            return Graph(axis, _vector(entry.get("lo"), m - 1, key + ".lo"), _vector(entry.get("hi"), m - 1, key + ".hi"), lower, upper)
    except (DomainError, ExprError) as exc:
        raise ScenarioError(f"{key}: {exc}") from exc
    raise ScenarioError(f"{key}.kind: unknown domain kind {kind!r}, expected one of {DOMAIN_KINDS}")


def parse_scenario(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected a JSON object")
    unknown = set(doc) - {"name", "m", "exprs", "maps", "domains", "quad", "checks", "description"}
    if unknown:
        raise ScenarioError(f"scenario: unknown keys {sorted(unknown)}")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioError("name: expected a non-empty string")
    m = doc.get("m")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise ScenarioError("m: expected a positive integer")
    coords = coord_names(m)
    exprs = {}
    for k, entry in doc.get("exprs", {}).items():
        src, vars_ = _source(entry, coords, f"exprs.{k}")
        try:
            exprs[k] = parse_scalar(src, vars_)
        except (ExprError, TypeError) as exc:
            raise ScenarioError(f"exprs.{k}: {exc}") from exc
    maps = {}
    for k, entry in doc.get("maps", {}).items():
        if isinstance(entry, dict):
            comps, vars_ = entry.get("components"), entry.get("vars", coords)
        else:
            comps, vars_ = entry, coords
        if not isinstance(comps, list) or not comps:
            raise ScenarioError(f"maps.{k}: expected a list of component expressions")
        try:
            maps[k] = parse_map(comps, vars_)
        except (ExprError, TypeError) as exc:
            raise ScenarioError(f"maps.{k}: {exc}") from exc
    domains = {k: _parse_domain(k, entry, m) for k, entry in doc.get("domains", {}).items()}
    quad = _parse_quad(doc.get("quad", {}))
    checks = doc.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ScenarioError("checks: expected a non-empty list")
    sc = Scenario(name, m, exprs, maps, domains, quad, [])
    for i, chk in enumerate(checks):
        sc.checks.append(_bind_check(sc, i, chk))
    return sc


def _bind_check(sc, i, chk):
    key = f"checks[{i}]"
    if not isinstance(chk, dict):
        raise ScenarioError(f"{key}: expected an object")
    kind = chk.get("kind")
    if kind not in CHECKS:
        raise ScenarioError(f"{key}.kind: unknown check kind {kind!r}")
    required, optional = CHECKS[kind]
    allowed = set(required) | set(optional) | {"kind", "tol", "label", "quad"}
    extra = set(chk) - allowed
    if extra:
        raise ScenarioError(f"{key}: unexpected keys {sorted(extra)} for {kind}")
    bound = {}
    for p, binding in list(required.items()) + list(optional.items()):
        if p not in chk:
            if p in required:
                raise ScenarioError(f"{key}.{p}: missing parameter for {kind}")
            continue
        bound[p] = _resolve(sc, f"{key}.{p}", binding, chk[p])
    if kind == "ball_exhaustion_check" and ("balls" in bound) == ("packing" in bound):
        raise ScenarioError(f"{key}: give exactly one of 'balls' or 'packing'")
    _check_dims(sc, key, kind, bound)
    tol = chk.get("tol", DEFAULT_TOLS[kind])
    if tol is not None:
        tol = _number(tol, f"{key}.tol")
    quad = dict(sc.quad)
    quad.update(_parse_quad(chk.get("quad", {}), f"{key}.quad"))
    label = chk.get("label", kind)
    if not isinstance(label, str):
        raise ScenarioError(f"{key}.label: expected a string")
    return {"kind": kind, "label": label, "tol": tol, "quad": quad, "args": bound}


def _lookup(table, what, name, key):
    if not isinstance(name, str):
        raise ScenarioError(f"{key}: expected the name of a {what}")
    if name not in table:
        raise ScenarioError(f"{key}: undefined {what} {name!r}")
    return table[name]


def _resolve(sc, key, binding, value):
    if binding == "expr":
        return _lookup(sc.exprs, "expression", value, key)
    if binding == "map":
        return _lookup(sc.maps, "map", value, key)
    if binding in ("domain", "ball"):
        d = _lookup(sc.domains, "domain", value, key)
        if binding == "ball" and not isinstance(d, Ball):
            raise ScenarioError(f"{key}: domain {value!r} must be a ball")
        return d
    if binding == "point":
        return np.array(_vector(value, sc.m, key))
    if binding == "points":
        if not isinstance(value, list) or not value:
            raise ScenarioError(f"{key}: expected a list of points")
        return np.array([_vector(p, sc.m, f"{key}[{j}]") for j, p in enumerate(value)])
    if binding == "number":
        return _number(value, key)
    if binding == "bool":
        if not isinstance(value, bool):
            raise ScenarioError(f"{key}: expected true/false")
        return value
    if binding == "balls":
        if not isinstance(value, list) or not value:
            raise ScenarioError(f"{key}: expected a list of balls")
        out = []
        for j, b in enumerate(value):
            if not isinstance(b, dict):
                raise ScenarioError(f"{key}[{j}]: expected {{center, radius}}")
            try:
                out.append(Ball(_vector(b.get("center"), sc.m, f"{key}[{j}].center"), _number(b.get("radius"), f"{key}[{j}].radius")))
            except DomainError as exc:
                raise ScenarioError(f"{key}[{j}]: {exc}") from exc
        return out
    if binding == "packing":
        if not isinstance(value, dict):
            raise ScenarioError(f"{key}: expected {{min_radius}}")
        return {"min_radius": _number(value.get("min_radius", 1e-3), key + ".min_radius")}
    raise AssertionError(binding)


def _check_dims(sc, key, kind, bound):
    m = sc.m
    for p, v in bound.items():
        if hasattr(v, "dim_out"):
            if v.dim_out != m or v.arity_in != m:
                raise ScenarioError(f"{key}.{p}: map must be R^{m} -> R^{m}")
        elif hasattr(v, "arity_in") and v.arity_in != m:
            raise ScenarioError(f"{key}.{p}: expression must take {m} variables")
        elif isinstance(v, (Box, Ball, Graph)) and v.dim != m:
            raise ScenarioError(f"{key}.{p}: domain must be {m}-dimensional")
    if "packing" in bound:
        omega = bound["omega"]
        if not (isinstance(omega, Box) and m == 2):
            raise ScenarioError(f"{key}.packing: automatic packing needs a 2-dimensional box omega")


# -- execution -------------------------------------------------------------------


def run_check(chk) -> VerifyReport:
    kind, a, label = chk["kind"], chk["args"], chk["label"]
    q = _make_quad(chk["quad"])
    tol = chk["tol"]
    kw = {"name": label}
    if tol is not None:
        kw["tol"] = tol
    if kind == "check_divergence":
        return check_divergence(a["F"], a["D"], q, **kw)
    if kind == "check_cov":
        return check_cov(a["f"], a["phi"], a["omega"], a["D"], q, **kw)
    if kind == "check_cov_singly":
        return check_cov_singly(a["f"], a["phi"], a["omega"], a["D"], q, boundary_route=a.get("boundary_route", True), **kw)
    if kind == "check_hadamard":
        return check_hadamard(a["phi"], a["x"], **kw)
    if kind == "check_cofactor_flux":
        return check_cofactor_flux(a["f"], a["phi"], a["x"], a["a"], q, **kw)
    if kind == "check_potential":
        return check_potential(a["f"], a["a"], a["points"], q, **kw)
    if kind == "check_nonretraction":
        return check_nonretraction(screen_candidate(a["T"]), q, **kw)
    if kind == "ball_exhaustion_check":
        balls = a.get("balls")
        if balls is None:
            om = a["omega"]
            centers, radii = exhaust_rectangle(om.lo, om.hi, a["packing"]["min_radius"])
            balls = disks_to_balls(centers, radii)
        ball_q = QuadScheme(gauss_order=8, subdivisions=1, diff=q.diff) if len(balls) > 50 else q
        return ball_exhaustion_check(a["f"], a["phi"], a["omega"], a["D"], balls, q, ball_q=ball_q, **kw)
    if kind == "check_mc":
        n = int(a.get("n_samples", 10**6))
        return check_mc(a["f"], a["D"], q, n_samples=n, n_sigma=a.get("n_sigma", 4.0), name=label)
    if kind == "surface_measure":
        return check_surface_measure(a["D"], a["expected"], q, **kw)
    raise AssertionError(kind)


def _error_report(chk, exc):
    nan = float("nan")
    return VerifyReport(chk["label"], nan, nan, nan, nan, chk["tol"] if chk["tol"] is not None else nan, False, {"error": f"{type(exc).__name__}: {exc}"})


def _safe_run(chk):
    try:
        return run_check(chk)
    except (ArithmeticError, ValueError, InadmissibleCandidate) as exc:
        return _error_report(chk, exc)


def apply_overrides(sc: Scenario, seed=None, gauss_order=None, subdivisions=None):
    over = {}
    if seed is not None:
        over["mc_seed"] = seed
    if gauss_order is not None:
        over["gauss_order"] = gauss_order
    if subdivisions is not None:
        over["subdivisions"] = subdivisions
    checks = [dict(c, quad={**c["quad"], **over}) for c in sc.checks]
    return replace(sc, quad={**sc.quad, **over}, checks=checks)


def run_reports(sc: Scenario, threads=None):
    """Reports in scenario order; checks may run on a thread pool."""
    n = threads or worker_count()
    if n <= 1 or len(sc.checks) <= 1:
        return [_safe_run(c) for c in sc.checks]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(_safe_run, sc.checks))


def _fmt(v):
    return repr(float(v))


def report_json(sc, reports, timestamp):
    doc = {
        "scenario": sc.name,
        "m": sc.m,
        "timestamp": timestamp,
        "quad": sc.quad,
        "all_pass": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def report_csv(sc, reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([sc.name, r.name, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.residual), _fmt(r.rel_residual), _fmt(r.tol), "true" if r.passed else "false"])
    return buf.getvalue()


def summary_table(sc, reports):
    rows = [("check", "lhs", "rhs", "rel_residual", "tol", "pass")]
    for r in reports:
        rows.append((r.name, f"{r.lhs:.12g}", f"{r.rhs:.12g}", f"{r.rel_residual:.3e}", f"{r.tol:.1e}", "PASS" if r.passed else "FAIL"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = [f"scenario {sc.name} (m={sc.m})"]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    for r in reports:
        if "error" in r.diagnostics:
            lines.append(f"  {r.name}: {r.diagnostics['error']}")
    return "\n".join(lines)


# -- shipped scenarios -----------------------------------------------------------


def shipped_scenarios():
    root = resources.files("hyperflux") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_document(ref):
    p = Path(ref)
    if p.is_file():
        text = p.read_text()
    else:
        res = resources.files("hyperflux") / "scenarios" / f"{ref}.json"
        if not res.is_file():
            raise ScenarioError(f"scenario: no file or shipped scenario named {ref!r}")
        text = res.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario: invalid JSON ({exc})") from exc


def run_scenario(ref, out_dir=None, seed=None, gauss_order=None, subdivisions=None, fixed_clock=False, stream=None):
    """Run a scenario file (or shipped name); returns the exit code."""
    stream = stream or sys.stdout
    try:
        sc = parse_scenario(load_document(ref))
        sc = apply_overrides(sc, seed, gauss_order, subdivisions)
        for c in sc.checks:
            _make_quad(c["quad"])
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    reports = run_reports(sc)
    stamp = FIXED_CLOCK if fixed_clock else _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    out = Path(out_dir) if out_dir else Path("reports") / sc.name
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report_json(sc, reports, stamp))
    (out / "report.csv").write_text(report_csv(sc, reports))
    print(summary_table(sc, reports), file=stream)
    return 0 if all(r.passed for r in reports) else 1


def list_builtins():
    q = QuadScheme()
    fns = ", ".join(f"{k}/{lo if hi == lo else f'{lo}+'}" for k, (_, lo, hi) in sorted(_expr.FUNCTIONS.items()))
    lines = [
        f"functions: {fns}",
        f"constants: {', '.join(sorted(_expr.CONSTANTS))}",
        "operators: + - * / ^ (right-assoc), unary -",
        f"domain kinds: {', '.join(DOMAIN_KINDS)}",
        "check kinds:",
    ]
    for k, (req, opt) in CHECKS.items():
        params = ", ".join(list(req) + [f"[{p}]" for p in opt])
        tol = DEFAULT_TOLS[k]
        lines.append(f"  {k}({params}) tol={'4 stderr' if tol is None else f'{tol:g}'}")
    lines += [
        f"defaults: gauss_order={q.gauss_order} subdivisions={q.subdivisions} "
        f"rel_tol={q.rel_tol:g} mc_seed={q.mc_seed} rel_step={q.diff.rel_step:.3e}",
        f"threads: HYPERFLUX_THREADS (default {worker_count()})",
        f"shipped scenarios: {', '.join(shipped_scenarios())}",
    ]
    return "\n".join(lines)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="hyperflux", description="Run integral-identity verification scenarios.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    run = sub.add_parser("run", help="run a scenario file or a shipped scenario name")
    run.add_argument("scenario")
    run.add_argument("--out", default=None, help="report directory (default reports/<name>)")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--gauss-order", type=int, default=None)
    run.add_argument("--subdivisions", type=int, default=None)
    run.add_argument("--fixed-clock", action="store_true", help="write a constant timestamp")
    sub.add_parser("builtins", help="list functions, domain kinds, check kinds and defaults")
    args = ap.parse_args(argv)
    if args.cmd == "builtins":
        print(list_builtins())
        return 0
    return run_scenario(args.scenario, args.out, args.seed, args.gauss_order, args.subdivisions, args.fixed_clock)


if __name__ == "__main__":
    sys.exit(main())
