"""Command-line front end: ``nlop <command> [options]``.

Every command writes one JSON report (UTF-8, sorted keys) holding the
resolved configuration and the result, to ``--out`` or stdout. Exit codes:
0 success, 1 invalid input or failed hypothesis check, 2 numerical
non-convergence (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from . import __version__
from .analysis import counterexample_applied, counterexample_fk, counterexample_truncated
from .dirichlet import DirichletError, graded_nodes, solution_family, solve_generalized, solve_standard
from .exprfunc import ExprDomainError, ExprSyntaxError, builtin, resolve_function
from .kernels import KERNEL_NAMES, KernelError, KernelSpec, build, validate_hypotheses
from .operator import CutoffSpec, HypothesisError, decompose, direct_apply, limit_driver
from .quadrature import DivergentIntegralError, QuadConfig
from .viscosity import check_viscosity, paraboloid_family

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2


class ConfigError(ValueError):
    """Bad or unknown configuration keys."""


# ---------------------------------------------------------------------------
# configuration


def _floats(v) -> list[float]:
    if isinstance(v, str):
        return [float(p) for p in v.split(",") if p.strip()]
    if isinstance(v, (list, tuple)):
        return [float(p) for p in v]
    return [float(v)]


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("1", "true", "yes", "on"):
        return True
    if isinstance(v, str) and v.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _opt_str(v):
    return None if v is None else str(v)


def _opt_float(v):
    return None if v is None else float(v)


KERNEL_KEYS = {"kernel": str, "s": _opt_float, "n": int, "eps": _opt_float, "lambda": float, "Lambda": _opt_float,
               "normalized": _bool}
KERNEL_DEFAULTS = {"kernel": None, "s": None, "n": 1, "eps": None, "lambda": 1.0, "Lambda": None,
                   "normalized": False}
QUAD_KEYS = {"abs_tol": float, "rel_tol": float}
QUAD_DEFAULTS = {"abs_tol": 1e-9, "rel_tol": 1e-8}


@dataclass
class RunConfig:
    """Resolved parameters for one command: defaults, then the config file, then explicit flags."""

    command: str
    params: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, **self.params}

    def __getitem__(self, key):
        return self.params[key]

    def quad(self) -> QuadConfig:
        return QuadConfig(abs_tol=self.params["abs_tol"], rel_tol=self.params["rel_tol"])

    def kernel(self):
        name = self.params["kernel"]
        if name is None:
            raise ConfigError("a kernel name is required (--kernel)")
        d = {"name": name, "dim": self.params["n"], "lambda": self.params["lambda"],
             "normalized": self.params["normalized"]}
        if self.params["s"] is not None:
            d["s"] = self.params["s"]
        if self.params["eps"] is not None:
            d["eps"] = self.params["eps"]
        if self.params["Lambda"] is not None:
            d["Lambda"] = self.params["Lambda"]
        return build(KernelSpec.from_dict(d))


SCHEMAS: dict[str, tuple[dict[str, Callable], dict[str, Any]]] = {
    "kernels list": ({}, {}),
    "kernels validate": (
        {**KERNEL_KEYS, **QUAD_KEYS, "theta": float, "m": int, "seed": int, "samples": int},
        {**KERNEL_DEFAULTS, **QUAD_DEFAULTS, "theta": None, "m": 0, "seed": 0, "samples": 200}),
    "eval": (
        {**KERNEL_KEYS, **QUAD_KEYS, "func": str, "x": _floats, "tau": str, "m": int, "check": _bool},
        {**KERNEL_DEFAULTS, **QUAD_DEFAULTS, "func": None, "x": [0.0], "tau": "sharp:8", "m": 0, "check": False}),
    "converge": (
        {**KERNEL_KEYS, **QUAD_KEYS, "func": str, "m": int, "R_schedule": _floats, "grid": int, "tol": float,
         "csv": _opt_str},
        {**KERNEL_DEFAULTS, **QUAD_DEFAULTS, "func": None, "m": 0,
         "R_schedule": [4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0], "grid": 33, "tol": 1e-6, "csv": None}),
    "counterexample": (
        {**QUAD_KEYS, "k": float, "R": float, "grid": int},
        {**QUAD_DEFAULTS, "k": 10.0, "R": 100.0, "grid": 0}),
    "dirichlet solve": (
        {**KERNEL_KEYS, **QUAD_KEYS, "f": str, "g": _opt_str, "u0": _opt_str, "m": int, "N": int, "grading": float,
         "csv": _opt_str, "backend": _opt_str},
        {**KERNEL_DEFAULTS, **QUAD_DEFAULTS, "f": "1", "g": None, "u0": None, "m": 0, "N": 160, "grading": 2.0,
         "csv": None, "backend": None}),
    "dirichlet family": (
        {**KERNEL_KEYS, **QUAD_KEYS, "m": int, "N": int, "grading": float, "csv": _opt_str, "backend": _opt_str},
        {**KERNEL_DEFAULTS, **QUAD_DEFAULTS, "m": 1, "N": 160, "grading": 2.0, "csv": None, "backend": None}),
    "viscosity check": (
        {**KERNEL_KEYS, **QUAD_KEYS, "func": str, "f": str, "m": int, "R_schedule": _floats, "x0": _floats,
         "curvatures": _floats, "tol": float},
        {**KERNEL_DEFAULTS, **QUAD_DEFAULTS, "func": None, "f": "0", "m": 0, "R_schedule": [4.0, 8.0],
         "x0": [0.0], "curvatures": [-3.0, 1.0], "tol": 1e-3}),
}


def _flatten_file(data: dict, command: str) -> dict:
    """Top-level keys plus an optional [kernel] table and a table named after the command."""
    out = {}
    for key, val in data.items():
        if key == "kernel" and isinstance(val, dict):
            for k2, v2 in val.items():
                out["kernel" if k2 == "name" else k2] = v2
        elif isinstance(val, dict):
            if key.replace("_", " ") in (command, command.split()[0]):
                out.update(_flatten_file(val, command))
            else:
                raise ConfigError(f"unknown config table [{key}]")
        else:
            out[key] = val
    return out


def resolve_config(command: str, file_data: dict | None, cli_values: dict) -> RunConfig:
    types, defaults = SCHEMAS[command]
    params = dict(defaults)
    merged = {}
    if file_data:
        merged.update(_flatten_file(file_data, command))
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    unknown = sorted(set(merged) - set(types))
    if unknown:
        raise ConfigError(f"unknown keys for '{command}': {', '.join(unknown)}")
    for key, val in merged.items():
        try:
            params[key] = types[key](val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {val!r}") from exc
    return RunConfig(command, params)


def _load_file(path: str | None) -> dict | None:
    if path is None:
        return None
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write(path: str | None, text: str, stream) -> None:
    if path is None:
        stream.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# commands


def _func(cfg: RunConfig, key: str = "func"):
    src = cfg[key]
    if src is None:
        raise ConfigError(f"--{key} is required")
    return resolve_function(src, cfg["n"])


def cmd_kernels_list(cfg: RunConfig) -> dict:
    rows = []
    for name in KERNEL_NAMES:
        s = 0.5 if name.startswith("frac_lap") else None
        rows.append(build(KernelSpec(name, s=s)).metadata())
    return {"kernels": rows}


def cmd_kernels_validate(cfg: RunConfig) -> dict:
    K = cfg.kernel()
    theta = cfg["theta"] if cfg["theta"] is not None else K.admissible_theta.hi
    rep = validate_hypotheses(K, theta, cfg["m"], cfg["samples"], cfg=cfg.quad(), seed=cfg["seed"])
    return {"kernel": K.metadata(), "report": rep.to_dict(), "_failed": not rep.passed}


def _points(cfg: RunConfig) -> np.ndarray:
    vals = np.array(cfg["x"], dtype=float)
    n = cfg["n"]
    if vals.size % n:
        raise ConfigError(f"--x needs a multiple of {n} coordinates")
    return vals.reshape(-1, n)


def cmd_eval(cfg: RunConfig) -> dict:
    K, u = cfg.kernel(), _func(cfg)
    tau = CutoffSpec.parse(cfg["tau"])
    X = _points(cfg)
    dec = decompose(u, K, tau, cfg["m"], X, cfg.quad())
    out = {"function": u.metadata(), "kernel": K.metadata(), "decomposition": dec.to_dict()}
    if cfg["check"]:
        d = direct_apply(u, K, X, tau, cfg.quad())
        out["direct"] = d.to_dict()
        out["reconstruction_gap"] = np.abs(np.atleast_1d(d.value) - dec.total).tolist()
    return out


def _grid_1d(count: int) -> np.ndarray:
    return np.linspace(-1, 1, count + 2)[1:-1, None]


def cmd_converge(cfg: RunConfig) -> dict:
    K, u = cfg.kernel(), _func(cfg)
    grid = _grid_1d(cfg["grid"]) if cfg["n"] == 1 else None
    rep = limit_driver(u, K, cfg["m"], grid, cfg["R_schedule"], cfg.quad(), tol=cfg["tol"])
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(rep.to_csv(), encoding="utf-8")
    return {"function": u.metadata(), "kernel": K.metadata(), "limit": rep.to_dict(),
            "_nonconverged": not rep.converged}


def cmd_counterexample(cfg: RunConfig) -> dict:
    k, R = cfg["k"], cfg["R"]
    if not R > k > 1:
        raise ConfigError("need R > k > 1")
    xs = np.array([-0.5, 0.0, 0.5]) if cfg["grid"] <= 0 else _grid_1d(cfg["grid"])[:, 0]
    K = build(KernelSpec("frac_lap", s=0.5))
    u = builtin("counterexample_uk", {"k": k})
    quad = direct_apply(u, K, xs, CutoffSpec("sharp", R), cfg.quad())
    rows = []
    worst = 0.0
    for x, q, e in zip(xs, np.atleast_1d(quad.value), np.atleast_1d(quad.err_est)):
        closed = counterexample_applied(k, R, x)
        rel = abs(q - closed) / abs(closed) if closed else abs(q)
        worst = max(worst, rel)
        rows.append({"x": float(x), "closed_form": closed, "truncated_integral": counterexample_truncated(k, R, x),
                     "quadrature": float(q), "err_est": float(e), "rel_error": rel,
                     "f_k": counterexample_fk(k, x), "limit_2x": 2 * float(x)})
    return {"k": k, "R": R, "rows": rows, "max_rel_error": worst, "_nonconverged": not quad.converged}


def cmd_dirichlet_solve(cfg: RunConfig) -> dict:
    K = cfg.kernel()
    nodes = graded_nodes(cfg["N"], cfg["grading"])
    f = resolve_function(cfg["f"], 1)
    if cfg["u0"] is not None:
        u0 = resolve_function(cfg["u0"], 1)
        sol = solve_generalized(K, f, u0, cfg["m"], nodes, cfg.quad(), backend=cfg["backend"])
    else:
        g = resolve_function(cfg["g"], 1) if cfg["g"] is not None else None
        sol = solve_standard(K, f, g, nodes, cfg.quad(), backend=cfg["backend"])
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(sol.to_csv(), encoding="utf-8")
    return {"kernel": K.metadata(), "solution": sol.to_dict()}


def cmd_dirichlet_family(cfg: RunConfig) -> dict:
    K = cfg.kernel()
    nodes = graded_nodes(cfg["N"], cfg["grading"])
    fam, gram = solution_family(K, cfg["m"], nodes, cfg.quad(), backend=cfg["backend"])
    if cfg["csv"] and fam:
        lines = ["node," + ",".join(f"family_{j}" for j in range(len(fam)))]
        for i, x in enumerate(nodes):
            lines.append(",".join([repr(float(x))] + [repr(float(s.values[i])) for s in fam]))
        Path(cfg["csv"]).write_text("\n".join(lines) + "\n", encoding="utf-8")
    det = float(np.linalg.det(gram)) if gram.size else 1.0
    return {"kernel": K.metadata(), "family_size": len(fam), "gram": gram, "gram_det": det,
            "members": [{"values": s.values} for s in fam], "nodes": nodes}


def cmd_viscosity_check(cfg: RunConfig) -> dict:
    K, u = cfg.kernel(), _func(cfg)
    f = resolve_function(cfg["f"], cfg["n"])
    x0s = np.array(cfg["x0"], dtype=float).reshape(-1, cfg["n"])
    tests = []
    for x0 in x0s:
        tests.extend(paraboloid_family(x0, cfg["curvatures"], u))
    rep = check_viscosity(u, K, f, cfg["m"], cfg["R_schedule"], tests, cfg.quad(), tol=cfg["tol"])
    return {"function": u.metadata(), "kernel": K.metadata(), "viscosity": rep.to_dict(),
            "_failed": not rep.passed}


COMMANDS = {
    "kernels list": cmd_kernels_list,
    "kernels validate": cmd_kernels_validate,
    "eval": cmd_eval,
    "converge": cmd_converge,
    "counterexample": cmd_counterexample,
    "dirichlet solve": cmd_dirichlet_solve,
    "dirichlet family": cmd_dirichlet_family,
    "viscosity check": cmd_viscosity_check,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML file with parameters for this command")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--abs-tol", dest="abs_tol", type=float)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)


def _add_kernel(p: argparse.ArgumentParser):
    p.add_argument("--kernel", choices=KERNEL_NAMES)
    p.add_argument("--s", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--Lambda", dest="Lambda", type=float)
    p.add_argument("--normalized", action="store_const", const=True, default=None)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 1; code 2 is reserved for non-convergence."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nlop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    kern = sub.add_parser("kernels", help="list kernels or check their hypotheses")
    ksub = kern.add_subparsers(dest="action", required=True)
    kl = ksub.add_parser("list")
    _add_common(kl)
    kv = ksub.add_parser("validate")
    _add_common(kv)
    _add_kernel(kv)
    kv.add_argument("--theta", type=float)
    kv.add_argument("--m", type=int)
    kv.add_argument("--seed", type=int)
    kv.add_argument("--samples", type=int)

    ev = sub.add_parser("eval", help="decompose A(tau u)(x) into P + f1 + f2 + f*")
    _add_common(ev)
    _add_kernel(ev)
    ev.add_argument("--func")
    ev.add_argument("--x", help="comma-separated coordinates; several points when n = 1")
    ev.add_argument("--tau", help="sharp:R or smooth:R,w")
    ev.add_argument("--m", type=int)
    ev.add_argument("--check", action="store_const", const=True, default=None,
                    help="also evaluate directly and report the gap")

    cv = sub.add_parser("converge", help="drive the cut-off radius to infinity")
    _add_common(cv)
    _add_kernel(cv)
    cv.add_argument("--func")
    cv.add_argument("--m", type=int)
    cv.add_argument("--R-schedule", dest="R_schedule")
    cv.add_argument("--grid", type=int, help="number of uniform grid points in (-1, 1) (n = 1)")
    cv.add_argument("--tol", type=float)
    cv.add_argument("--csv")

    ce = sub.add_parser("counterexample", help="closed form against quadrature for the linear ramp")
    _add_common(ce)
    ce.add_argument("--k", type=float)
    ce.add_argument("--R", type=float)
    ce.add_argument("--grid", type=int)

    di = sub.add_parser("dirichlet", help="Dirichlet problems on (-1, 1)")
    dsub = di.add_subparsers(dest="action", required=True)
    for action in ("solve", "family"):
        d = dsub.add_parser(action)
        _add_common(d)
        _add_kernel(d)
        d.add_argument("--m", type=int)
        d.add_argument("--N", type=int)
        d.add_argument("--grading", type=float)
        d.add_argument("--csv")
        d.add_argument("--backend", choices=("cython", "python"))
        if action == "solve":
            d.add_argument("--f")
            d.add_argument("--g")
            d.add_argument("--u0")

    vi = sub.add_parser("viscosity", help="touching-test checks")
    vsub = vi.add_subparsers(dest="action", required=True)
    vc = vsub.add_parser("check")
    _add_common(vc)
    _add_kernel(vc)
    vc.add_argument("--func")
    vc.add_argument("--f")
    vc.add_argument("--m", type=int)
    vc.add_argument("--R-schedule", dest="R_schedule")
    vc.add_argument("--x0")
    vc.add_argument("--curvatures")
    vc.add_argument("--tol", type=float)
    return parser


_META = {"command", "action", "config", "out"}


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    command = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
    cli_values = {k: v for k, v in vars(args).items() if k not in _META}
    try:
        cfg = resolve_config(command, _load_file(args.config), cli_values)
        result = COMMANDS[command](cfg)
    except (DivergentIntegralError, DirichletError) as exc:
        # checked first: DivergentIntegralError is also a ValueError
        stderr.write(f"nlop: numerical failure: {exc}\n")
        _write(args.out, dumps({"config": cfg.to_dict(), "error": str(exc), "version": __version__}), stdout)
        return EXIT_NONCONVERGED
    except (ConfigError, KernelError, HypothesisError, ExprSyntaxError, ExprDomainError, ValueError) as exc:
        stderr.write(f"nlop: error: {exc}\n")
        return EXIT_INVALID
    code = EXIT_OK
    if result.pop("_nonconverged", False):
        code = EXIT_NONCONVERGED
    if result.pop("_failed", False):
        code = EXIT_INVALID
    _write(args.out, dumps({"config": cfg.to_dict(), "result": result, "version": __version__}), stdout)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
