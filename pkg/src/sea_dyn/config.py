"""Run-configuration parsing and validation for the command line tool.

A config is a TOML file with one table per scenario plus an optional [run]
table::

    [run]
    out = "results"
    format = "csv"        # or "json"
    jobs = 4

    [qubit]
    epsilon = 0.999
    tau = [1, 5, 10]
    t_grid = { start = 0, stop = 30, num = 61 }

Validation collects every problem instead of stopping at the first one.
"""
from __future__ import annotations

import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCENARIOS = ("qubit", "ctqw", "composite", "sweep", "nosignal")
FORMATS = ("csv", "json")
SEED_ENV = "SEA_DYN_SEED"


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    scenarios: dict  # name -> validated parameter dict, in file order
    out: str = "sea-dyn-out"
    format: str = "csv"
    jobs: int | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


# each checker returns (value, [errors]); `where` prefixes messages
def _num(where, x):
    if not _is_num(x):
        return None, [f"{where} must be a finite number"]
    return float(x), []


def _pos_int(where, x, minimum=1):
    if not _is_int(x) or x < minimum:
        return None, [f"{where} must be an integer >= {minimum}"]
    return int(x), []


def _epsilon(where, x):
    if not _is_num(x):
        return None, [f"{where} must be a number"]
    if not 0 <= x <= 1:
        return None, ["epsilon out of [0,1]"]
    return float(x), []


def _tau(where, x):
    if not _is_num(x):
        return None, [f"{where} must be a number"]
    if not x > 0:
        return None, ["tau must be positive"]
    return float(x), []


def _list_of(check):
    def f(where, x):
        items = x if isinstance(x, list) else [x]
        if not items:
            return None, [f"{where} must not be empty"]
        out, errs = [], []
        for item in items:
            v, e = check(where, item)
            out.append(v)
            errs += [m for m in e if m not in errs]
        if not errs and len(set(out)) != len(out):
            errs.append(f"{where} values must be distinct")
        return out, errs

    return f


def _t_grid(where, x):
    if isinstance(x, dict):
        extra = set(x) - {"start", "stop", "num"}
        errs = [f"unknown key '{k}' in {where}" for k in sorted(extra)]
        start, stop, num = x.get("start", 0.0), x.get("stop"), x.get("num")
        if not _is_num(start) or not _is_num(stop):
            errs.append(f"{where} needs numeric start and stop")
        if not _is_int(num) or num < 1:
            errs.append(f"{where}.num must be an integer >= 1")
        if errs:
            return None, errs
        if start < 0 or stop < start or (num > 1 and stop == start):
            return None, [f"{where} must satisfy 0 <= start < stop"]
        return list(np.linspace(float(start), float(stop), int(num))), []
    items = x if isinstance(x, list) else [x]
    if not items or not all(_is_num(v) for v in items):
        return None, [f"{where} must be a number, a list of numbers or a {{start, stop, num}} table"]
    vals = [float(v) for v in items]
    if vals[0] < 0 or any(b <= a for a, b in zip(vals, vals[1:])):
        return None, [f"{where} must be non-negative and strictly increasing"]
    return vals, []


def _choice(*options):
    def f(where, x):
        if x not in options:
            return None, [f"{where} must be one of {', '.join(options)}"]
        return x, []

    return f


def _bool(where, x):
    if not isinstance(x, bool):
        return None, [f"{where} must be true or false"]
    return x, []


def _vec3(where, x):
    if not isinstance(x, list) or len(x) != 3 or not all(_is_num(v) for v in x):
        return None, [f"{where} must be a list of three numbers"]
    return [float(v) for v in x], []


def _direction(where, x):
    v, e = _vec3(where, x)
    if not e and np.linalg.norm(v) == 0:
        return None, [f"{where} must be a nonzero direction"]
    return v, e


def _seed(where, x):
    if not _is_int(x) or x < 0:
        return None, [f"{where} must be a non-negative integer"]
    return int(x), []


_COMMON = {"rk_tol": (_num, 1e-9)}

# key -> (checker, default); a default of ... marks a required key
SCHEMAS = {
    "qubit": {
        "epsilon": (_epsilon, ...),
        "tau": (_list_of(_tau), ...),
        "t_grid": (_t_grid, ...),
        "omega": (_num, 1.0),
        "method": (_choice("num", "flm", "both"), "both"),
        "flm_reference": (_choice("initial", "equilibrium"), "initial"),
        **_COMMON,
    },
    "ctqw": {
        "N": (lambda w, x: _pos_int(w, x, 3), ...),
        "epsilon": (_epsilon, ...),
        "tau": (_list_of(_tau), ...),
        "t_grid": (_t_grid, ...),
        "mu": (_num, 1.0),
        "method": (_choice("num", "flm", "both"), "both"),
        "flm_reference": (_choice("initial", "equilibrium"), "equilibrium"),
        "renormalize": (_bool, False),
        "start": (lambda w, x: _pos_int(w, x, 0), None),
        **_COMMON,
    },
    "sweep": {
        "N": (lambda w, x: _pos_int(w, x, 3), ...),
        "epsilon": (_list_of(_epsilon), ...),
        "tau": (_list_of(_tau), ...),
        "t_grid": (_t_grid, ...),
        "mu": (_num, 1.0),
        **_COMMON,
    },
    "composite": {
        "state": (_choice("bell", "separable", "product"), ...),
        "bell": (_vec3, None),
        "r_a": (_vec3, None),
        "r_b": (_vec3, None),
        "mu": (_num, None),
        "omega_a": (_num, 1.0),
        "omega_b": (_num, 1.0),
        "h_a": (_direction, [0.0, 0.0, 1.0]),
        "h_b": (_direction, [0.0, 0.0, 1.0]),
        "tau_a": (_tau, ...),
        "tau_b": (_tau, None),
        "t_grid": (_t_grid, ...),
        **_COMMON,
    },
    "nosignal": {
        "state": (_choice("bell", "separable", "product", "random"), ...),
        "bell": (_vec3, None),
        "r_a": (_vec3, None),
        "r_b": (_vec3, None),
        "mu": (_num, None),
        "omega_a": (_num, 1.0),
        "omega_b": (_num, 1.0),
        "h_a": (_direction, [0.0, 0.0, 1.0]),
        "h_b": (_direction, [0.0, 0.0, 1.0]),
        "tau_a": (_tau, 1.0),
        "tau_b": (_tau, None),
        "trials": (_pos_int, 100),
        "seed": (_seed, 0),
        "negative_control": (_bool, False),
    },
}

RUN_SCHEMA = {
    "out": (lambda w, x: (x, []) if isinstance(x, str) and x else (None, [f"{w} must be a non-empty string"]), "sea-dyn-out"),
    "format": (_choice(*FORMATS), "csv"),
    "jobs": (_pos_int, None),
}


def _validate_table(name, table, schema):
    out, errs = {}, []
    if not isinstance(table, dict):
        return out, [f"[{name}] must be a table"]
    for key in table:
        if key not in schema:
            errs.append(f"unknown key '{key}' in [{name}]")
    for key, (check, default) in schema.items():
        if key in table:
            v, e = check(f"{name}.{key}", table[key])
            errs += e
            out[key] = v
        elif default is ...:
            errs.append(f"missing required key '{key}' in [{name}]")
        else:
            out[key] = default
    return out, errs


def _state_errors(name, p):
    errs = []
    kind = p.get("state")
    if kind == "bell":
        if p.get("bell") is None:
            errs.append(f"[{name}] state 'bell' needs a bell vector")
        else:
            bx, by, bz = p["bell"]
            lam = np.array([1 - bx - by - bz, 1 - bx + by + bz, 1 + bx - by + bz, 1 + bx + by - bz]) / 4
            if lam.min() < -1e-12:
                errs.append(f"{name}.bell gives a negative eigenvalue")
    elif kind == "separable":
        if p.get("r_a") is None or p.get("mu") is None:
            errs.append(f"[{name}] state 'separable' needs r_a and mu")
        else:
            if not 0 <= p["mu"] <= 1:
                errs.append("mu out of [0,1]")
            if abs(p["r_a"][2]) > 1e-12:
                errs.append(f"{name}.r_a must have a zero third component")
            if np.linalg.norm(p["r_a"]) > 1:
                errs.append(f"{name}.r_a longer than 1")
            elif 0 <= p["mu"] <= 1 and p["mu"] * np.linalg.norm(p["r_a"]) >= 1:
                errs.append(f"[{name}] mu * |r_a| must be below 1")
    elif kind == "product":
        for key in ("r_a", "r_b"):
            if p.get(key) is None:
                errs.append(f"[{name}] state 'product' needs {key}")
            elif np.linalg.norm(p[key]) > 1:
                errs.append(f"{name}.{key} longer than 1")
    for key in ("omega_a", "omega_b"):
        if p.get(key) == 0:
            errs.append(f"{name}.{key} must be nonzero")
    if p.get("tau_b") is None and "tau_a" in p:
        p["tau_b"] = p["tau_a"]
    return errs


def validate_dict(data: dict) -> tuple[RunConfig | None, list[str]]:
    errs = []
    scenarios = {}
    run = {}
    for name, table in data.items():
        if name == "run":
            run, e = _validate_table("run", table, RUN_SCHEMA)
            errs += e
        elif name in SCHEMAS:
            p, e = _validate_table(name, table, SCHEMAS[name])
            errs += e
            if name in ("composite", "nosignal") and not e:
                errs += _state_errors(name, p)
            if name == "qubit" and p.get("epsilon") == 1.0:
                errs.append("qubit epsilon must be below 1 (a pure state does not relax)")
            if name == "ctqw" and p.get("start") is not None and p.get("N") is not None and p["start"] >= p["N"]:
                errs.append("ctqw.start must be a node index below N")
            if name in ("qubit", "ctqw", "sweep") and p.get("rk_tol") is not None and not p["rk_tol"] > 0:
                errs.append(f"{name}.rk_tol must be positive")
            scenarios[name] = p
        else:
            errs.append(f"unknown section [{name}]; expected one of run, {', '.join(SCENARIOS)}")
    if not scenarios and not errs:
        errs.append("config defines no scenario")
    if errs:
        return None, errs
    if not run:
        run = {k: d for k, (_, d) in RUN_SCHEMA.items()}
    return RunConfig(scenarios, run["out"], run["format"], run["jobs"], data), []


def load(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def resolve_seed(config_seed: int, flag_seed: int | None = None, env=None) -> int:
    """Seed precedence: command-line flag, then SEA_DYN_SEED, then the config value."""
    if flag_seed is not None:
        return int(flag_seed)
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV)
    if raw is not None and raw.strip() != "":
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError([f"{SEED_ENV} must be a non-negative integer"]) from None
        if v < 0:
            raise ConfigError([f"{SEED_ENV} must be a non-negative integer"])
        return v
    return int(config_seed)
