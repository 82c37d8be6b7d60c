"""Command-line entry point: ``gammalab <command> [--config PRESET|PATH] [overrides]``.

Exit codes: 0 when every margin is within tolerance, 1 when a check fails,
2 for usage or configuration errors.  Data goes to ``--out`` or standard
output, diagnostics to standard error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import cdc, entropy, schrodinger
from .core import make_grid
from .expr import ExprError, parse_potential
from .gamma import GammaContext, lemma21_residual
from .generator import build_generator
from .phi import DomainError, phi_suite
from .suites import admissible

COMMANDS = ("identity", "decay", "cdc", "optimal-k", "ground-state", "gap", "counterexample", "example14", "report")

DEFAULT_PRESET = {
    "identity": "circle_lemma",
    "decay": "circle_sin",
    "cdc": "circle_sin",
    "optimal-k": "circle_sin",
    "ground-state": "convex_ground_state",
    "gap": "gap_zero",
    "counterexample": "ane",
    "example14": "example14",
}

DEFAULT_TOL = {"identity": math.inf, "decay": 1e-4, "cdc": 1e-6, "ground-state": 1e-6, "gap": 1e-6, "example14": 0.01}

REPORT_RUNS = (
    ("decay", "circle_sin"),
    ("cdc", "circle_sin"),
    ("optimal-k", "circle_sin"),
    ("example14", "example14"),
    ("counterexample", "ane"),
    ("gap", "gap_zero"),
    ("ground-state", "convex_ground_state"),
)

_NUM_OR_EXPR = {"type": ["number", "string"]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "check": {"enum": [c for c in COMMANDS if c != "report"]},
        "geometry": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["circle", "interval_neumann", "interval_dirichlet", "torus2d"]},
                "n": {
                    "oneOf": [
                        {"type": "integer", "minimum": 8},
                        {"type": "array", "items": {"type": "integer", "minimum": 8}, "minItems": 2, "maxItems": 2},
                    ]
                },
                "domain": {"oneOf": [_NUM_OR_EXPR, {"type": "array", "items": _NUM_OR_EXPR, "minItems": 1, "maxItems": 2}]},
            },
        },
        "potential": {
            "oneOf": [
                {"type": "string"},
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["preset"],
                    "properties": {"preset": {"enum": ["concave_ramp"]}},
                },
            ]
        },
        "phi": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"enum": ["xlogx", "square", "power"]}, "p": {"type": "number"}},
        },
        "f": {"type": "string"},
        "params": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "K": {"type": "number"},
                "m": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "inf"}]},
                "t": {"type": "number", "minimum": 0},
                "times": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0},
                "R": {"type": "number", "exclusiveMinimum": 0},
                "R_compare": {"type": "number", "exclusiveMinimum": 0},
                "scan": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
                "tol": {"type": "number", "minimum": 0},
                "modulus": {"type": "string"},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


class CheckFailed(Exception):
    pass


# -- configuration ----------------------------------------------------------


def load_preset(name: str) -> dict:
    stem = name[:-5] if name.endswith(".json") else name
    ref = resources.files("gammalab") / "presets" / f"{stem}.json"
    if not ref.is_file():
        raise ConfigError(f"no preset named {name!r}")
    return json.loads(ref.read_text())


def preset_names():
    return sorted(p.name[:-5] for p in (resources.files("gammalab") / "presets").iterdir() if p.name.endswith(".json"))


def read_config(spec: str) -> dict:
    path = Path(spec)
    if path.is_file():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{spec}: invalid JSON ({exc})") from exc
    return load_preset(spec)


def validate(cfg: dict) -> dict:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    return cfg


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "potential":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _csv_numbers(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def resolve_config(command: str, args) -> dict:
    """Preset defaults for ``command``, then ``--config``, then flag overrides."""
    cfg = load_preset(DEFAULT_PRESET[command])
    if args.config:
        cfg = _merge(cfg, validate(read_config(args.config)))
    cfg["check"] = command
    geo = cfg.setdefault("geometry", {})
    params = cfg.setdefault("params", {})
    if args.kind is not None:
        geo["kind"] = args.kind
    if args.n is not None:
        geo["n"] = args.n
    if args.domain is not None:
        vals = _csv_numbers(args.domain)
        geo["domain"] = vals if len(vals) > 1 else vals[0]
    if args.potential is not None:
        cfg["potential"] = args.potential
    if args.phi is not None:
        cfg["phi"] = {"name": args.phi}
    if args.p is not None:
        cfg.setdefault("phi", {"name": "power"})["p"] = args.p
    if args.f is not None:
        cfg["f"] = args.f
    if args.times is not None:
        params["times"] = _csv_numbers(args.times)
    if args.m is not None:
        params["m"] = "inf" if args.m.strip().lower() in ("inf", "infinity") else _float(args.m, "m")
    for key in ("K", "t", "alpha", "R", "tol"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    if args.seed is not None:
        params["seed"] = args.seed
    return validate(cfg)


def _float(text, name):
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"--{name} expects a number, got {text!r}") from exc


def _constant(value) -> float:
    if isinstance(value, (int, float)):
        return float(value)
    tree = parse_potential(value)
    if tree.uses("x") or tree.uses("y"):
        raise ConfigError(f"domain entry {value!r} must be a constant")
    return float(tree())


# -- building blocks --------------------------------------------------------


def _grid(cfg):
    geo = cfg["geometry"]
    kind = geo.get("kind", "circle")
    dom = geo.get("domain", [0, 2 * math.pi])
    dom = [_constant(v) for v in dom] if isinstance(dom, list) else _constant(dom)
    if kind == "circle" and isinstance(dom, list) and len(dom) == 1:
        dom = dom[0]
    return make_grid(kind, geo.get("n", 512), tuple(dom) if isinstance(dom, list) else dom)


def _potential(cfg):
    spec = cfg.get("potential", "0")
    if isinstance(spec, dict):
        return cdc.ConcaveRampPotential()
    return parse_potential(spec)


def _context(cfg):
    grid = _grid(cfg)
    pot = _potential(cfg)
    x = grid.x
    if grid.ndim == 1:
        if isinstance(pot, cdc.ConcaveRampPotential):
            V, dV, d2V = pot.V(x), pot.dV(x), pot.d2V(x)
        else:
            V, dV, d2V = pot(x), pot.derivative("x")(x), pot.derivative("x", 2)(x)
        return GammaContext(build_generator(grid, V), dV=dV, d2V=d2V)
    y = grid.y
    dx, dy = pot.derivative("x"), pot.derivative("y")
    hess = (dx.derivative("x")(x, y), dx.derivative("y")(x, y), dy.derivative("y")(x, y))
    return GammaContext(build_generator(grid, pot(x, y)), dV=(dx(x, y), dy(x, y)), d2V=hess)


def _phi(cfg):
    spec = cfg.get("phi", {"name": "square"})
    return phi_suite(spec["name"], spec.get("p"))


def _test_function(cfg, grid_like, period):
    src = cfg.get("f", "random")
    if src == "random":
        rng = np.random.default_rng(cfg["params"].get("seed", 0))
        return admissible(rng, grid_like.x, period=period)
    tree = parse_potential(src)
    y = grid_like.y if grid_like.ndim == 2 else None
    return tree(grid_like.x, y)


def _m(params):
    m = params.get("m", "inf")
    return math.inf if m == "inf" else float(m)


def _tol(cfg, command):
    return float(cfg["params"].get("tol", DEFAULT_TOL.get(command, 0.0)))


def _num(v):
    """Round to 12 significant digits so reports are stable to the last byte."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if not math.isfinite(v) else float(f"{v:.12g}")
    if isinstance(v, dict):
        return {k: _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    return v


# -- commands ---------------------------------------------------------------


def run_identity(cfg):
    ctx = _context(cfg)
    f = _test_function(cfg, ctx.nodes, ctx.nodes.lengths[0])
    residual = lemma21_residual(ctx, _phi(cfg), f, cfg["params"].get("t", 0.1))
    ok = residual <= _tol(cfg, "identity")
    return {"residual": residual, "n": ctx.nodes.size}, None, ok


def run_decay(cfg):
    ctx = _context(cfg)
    p = cfg["params"]
    f = _test_function(cfg, ctx.nodes, ctx.nodes.lengths[0])
    times = p.get("times", [0.1 * k for k in range(1, 11)])
    rep = entropy.check_decay(ctx, _phi(cfg), f, p.get("K", 0.0), _m(p), times)
    ok = rep.min_margin >= -_tol(cfg, "decay")
    payload = {"K": rep.K, "m": p.get("m", "inf"), "q0": rep.q0, "C0": rep.C0, "min_margin": rep.min_margin, "rows": rep.rows()}
    return payload, rep.to_csv(), ok


def run_cdc(cfg):
    ctx = _context(cfg)
    p = cfg["params"]
    phi = _phi(cfg)
    f = _test_function(cfg, ctx.nodes, ctx.nodes.lengths[0])
    K = p.get("K", 0.0)
    rep = cdc.integral_cdc_margin(ctx, phi, f, K, _m(p))
    payload = {"lhs": rep.lhs, "rhs": rep.rhs, "margin": rep.margin, "boundary_term": rep.boundary_term}
    if K > 0:
        payload["phi_sobolev_margin"] = entropy.phi_sobolev_margin(ctx, phi, f, K)
    ok = rep.margin >= -_tol(cfg, "cdc")
    return payload, None, ok


def run_optimal_k(cfg):
    ctx = _context(cfg)
    K = cdc.optimal_variance_K(ctx)
    return {"K": K}, None, True


def run_example14(cfg):
    p = cfg["params"]
    n = cfg["geometry"].get("n", 1024)
    R = p.get("R", 8)
    cert = cdc.example14_certificate(R=R, n=n)
    payload = {"delta": cert.delta, "osc": cert.osc, "K_lower": cert.K_lower, "K_numeric": cert.K_numeric, "R": R, "n": n}
    ok = cert.K_numeric > 0 and cert.K_numeric >= cert.K_lower
    if "R_compare" in p:
        Rc = p["R_compare"]
        # keep the mesh width fixed while the window grows
        nc = int(round((n - 1) * Rc / R)) + 1
        other = cdc.example14_certificate(R=Rc, n=nc).K_numeric
        change = abs(other - cert.K_numeric) / cert.K_numeric
        payload.update({"R_compare": Rc, "K_numeric_compare": other, "relative_change": change})
        ok = ok and change < _tol(cfg, "example14")
    return payload, None, ok


def run_counterexample(cfg):
    p = cfg["params"]
    alpha = p.get("alpha", 10)
    n = cfg["geometry"].get("n", 4096)
    R = p.get("R", cdc.ane_radius(alpha))
    value = cdc.ane_counterexample(alpha, R, n)
    payload = {"alpha": alpha, "R": R, "n": n, "value": value}
    if p.get("scan", False):
        payload["sign_change_alpha"] = cdc.ane_sign_change(n=n)
    return payload, None, value < 0


def _interval(cfg):
    dom = cfg["geometry"].get("domain", [0, 1])
    if not isinstance(dom, list) or len(dom) != 2:
        raise ConfigError("this command needs an interval domain [a, b]")
    return tuple(_constant(v) for v in dom)


def run_gap(cfg):
    domain = _interval(cfg)
    pot = _potential(cfg)
    n = cfg["geometry"].get("n", 2048)
    spec = schrodinger.dirichlet_eigs(pot, domain, 2, n, richardson=True)
    margin = schrodinger.fundamental_gap_margin(pot, domain, n)
    threshold = 3 * math.pi**2 / (domain[1] - domain[0]) ** 2
    payload = {"lambda0": spec.eigenvalues[0], "lambda1": spec.eigenvalues[1], "gap": spec.gap, "threshold": threshold, "margin": margin}
    return payload, None, margin >= -_tol(cfg, "gap")


def run_ground_state(cfg):
    domain = _interval(cfg)
    pot = _potential(cfg)
    p = cfg["params"]
    n = cfg["geometry"].get("n", 513)
    modulus = parse_potential(p.get("modulus", "0"))
    gs = schrodinger.ground_state_system(pot, domain, n)
    f = _test_function(cfg, gs.gen.nodes, 2 * (domain[1] - domain[0]))
    times = p.get("times", [0.02 * k for k in range(1, 11)])
    rep = schrodinger.check_schrodinger_decay(pot, modulus, _phi(cfg), f, times, n, domain)
    rate = 2 * rep.K
    ok = bool(np.all(rep.measured <= rep.bound * (1 + _tol(cfg, "ground-state"))))
    payload = {"lambda0": gs.lambda0, "lambda1": float(gs.spectrum.eigenvalues[1]), "rate": rate, "q0": rep.q0, "min_margin": rep.min_margin, "rows": rep.rows()}
    return payload, rep.to_csv(), ok


RUNNERS = {
    "identity": run_identity,
    "decay": run_decay,
    "cdc": run_cdc,
    "optimal-k": run_optimal_k,
    "example14": run_example14,
    "counterexample": run_counterexample,
    "gap": run_gap,
    "ground-state": run_ground_state,
}

CSV_DEFAULT = {"decay", "ground-state"}


def execute(command: str, cfg: dict, fmt: str | None):
    """Run one command; returns ``(text, ok)``."""
    payload, csv_text, ok = RUNNERS[command](cfg)
    fmt = fmt or ("csv" if command in CSV_DEFAULT else "json")
    if fmt == "csv":
        if csv_text is None:
            raise ConfigError(f"{command} has no CSV form; use --format json")
        return csv_text, ok
    doc = {"check": command, "pass": bool(ok), **_num(payload), "config": cfg}
    return json.dumps(doc, indent=2) + "\n", ok


def run_report(args):
    results = {}
    all_ok = True
    for command, preset in REPORT_RUNS:
        cfg = validate(_merge(load_preset(preset), {"check": command}))
        if args.seed is not None:
            cfg.setdefault("params", {})["seed"] = args.seed
        payload, _, ok = RUNNERS[command](cfg)
        payload.pop("rows", None)
        results[f"{command}:{preset}"] = {"pass": bool(ok), **_num(payload)}
        all_ok = all_ok and ok
    return json.dumps({"check": "report", "pass": all_ok, "runs": results}, indent=2) + "\n", all_ok


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gammalab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help=f"JSON file or preset name ({', '.join(preset_names())})")
        sp.add_argument("--out", help="write the report here instead of standard output")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--kind", choices=("circle", "interval_neumann", "interval_dirichlet", "torus2d"))
        sp.add_argument("--n", type=int)
        sp.add_argument("--domain", help="comma-separated, e.g. 0,1")
        sp.add_argument("--potential", help="expression in x (and y), e.g. '-0.5*x^2'")
        sp.add_argument("--phi", choices=("xlogx", "square", "power"))
        sp.add_argument("--p", type=float)
        sp.add_argument("--f", help="test function expression, or 'random'")
        sp.add_argument("--K", type=float)
        sp.add_argument("--m", help="number or 'inf'")
        sp.add_argument("--t", type=float)
        sp.add_argument("--times", help="comma-separated times")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--R", type=float)
        sp.add_argument("--tol", type=float)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            if args.format == "csv":
                raise ConfigError("report is JSON only")
            text, ok = run_report(args)
        else:
            cfg = resolve_config(args.command, args)
            text, ok = execute(args.command, cfg, args.format)
    except (ConfigError, ExprError, DomainError, ValueError) as exc:
        print(f"gammalab: error: {exc}", file=sys.stderr)
        return 2
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not ok:
        print(f"gammalab: {args.command} check failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
