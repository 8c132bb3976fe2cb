"""sea-dyn command line: run and validate scenario configs."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import composite as cmp
from . import config as cfg
from .errors import NumericFailure, SeaDynError, SignalDetected
from .linalg import DensityMatrix, random_density
from .qwalk import SweepGrid, centered, cycle_graph, default_start, hamiltonian, sea_walk, sweep
from .sea import (
    ConstraintSet,
    SeaConfig,
    entropy,
    equatorial_qubit,
    flm_solve,
    flm_state,
    gpb_solution,
    integrate,
    qubit_bloch,
    qubit_state,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_SIGNAL = 0, 1, 2, 3
MONOTONE_TOL = 1e-9

log = logging.getLogger("sea_dyn")


class Table:
    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []

    def add(self, *values):
        self.rows.append(list(values))


def _with_zero(grid):
    """NUM integration starts at t = 0; return (grid, index offset of the requested times)."""
    return (grid, 0) if grid[0] == 0 else ([0.0] + list(grid), 1)


def _nan():
    return float("nan")


def _monotone(values) -> bool:
    v = [x for x in values if not math.isnan(x)]
    return all(b >= a - MONOTONE_TOL for a, b in zip(v, v[1:]))


def run_qubit(p, **_):
    t = Table(["t", "tau", "r_num", "r_gpb", "r_flm", "S", "E"])
    rho0, cs = equatorial_qubit(p["epsilon"], p["omega"])
    h = cs.hamiltonian
    do_num = p["method"] in ("num", "both")
    do_flm = p["method"] in ("flm", "both")
    gaps, gpb_gaps, e_drift, tr_drift, monotone = [], [], 0.0, 0.0, True
    for tau in p["tau"]:
        grid, off = _with_zero(p["t_grid"])
        e0 = float(np.real(np.trace(rho0.matrix @ h)))
        if do_num:
            traj = integrate(rho0, cs, SeaConfig(tau, grid, rk_tol=p["rk_tol"]))
            states = traj.states[off:]
            tr_drift = max(tr_drift, traj.step_trace_drift)
            monotone &= traj.max_entropy_drop <= MONOTONE_TOL
        if do_flm:
            sol = flm_solve(rho0, cs, tau, p["flm_reference"])
        s_col = []
        for k, time_ in enumerate(p["t_grid"]):
            r_gpb = float(gpb_solution(p["epsilon"], tau, time_))
            r_num = s = e = _nan()
            if do_num:
                st = states[k]
                r_num = float(np.linalg.norm(qubit_bloch(st)))
                s = entropy(st)
                e = float(np.real(np.trace(st.matrix @ h)))
                e_drift = max(e_drift, abs(e - e0))
                gpb_gaps.append(abs(r_num - r_gpb))
            r_flm = float(np.linalg.norm(qubit_bloch(flm_state(sol, time_)))) if do_flm else _nan()
            if do_num and do_flm:
                gaps.append(abs(r_flm - r_num))
            s_col.append(s)
            t.add(time_, tau, r_num, r_gpb, r_flm, s, e)
        monotone &= _monotone(s_col)
    summary = {
        "max_flm_num_gap": max(gaps) if gaps else None,
        "max_gpb_num_gap": max(gpb_gaps) if gpb_gaps else None,
        "energy_drift": e_drift if do_num else None,
        "trace_drift": tr_drift if do_num else None,
        "entropy_monotone": monotone if do_num else None,
    }
    return t, summary


def run_ctqw(p, **_):
    n = p["N"]
    h = hamiltonian(cycle_graph(n), p["mu"])
    start = default_start(n) if p["start"] is None else p["start"]
    t = Table(["tau", "t", "node", "p_num", "p_flm"])
    do_num = p["method"] in ("num", "both")
    do_flm = p["method"] in ("flm", "both")
    gaps, per_tau, e_drift, tr_drift, monotone, flm_trace = [], {}, 0.0, 0.0, True, {}
    hm = np.asarray(h.matrix)
    for tau in p["tau"]:
        grid, off = _with_zero(p["t_grid"])
        conf = SeaConfig(tau, grid, rk_tol=p["rk_tol"])
        nt = len(p["t_grid"])
        pn = np.full((nt, n), np.nan)
        pf = np.full((nt, n), np.nan)
        if do_num:
            w = sea_walk(h, p["epsilon"], conf, "num", start)
            pn = w.probabilities[off:]
            e0 = float(np.real(np.trace(w.states[0] @ hm)))
            s_col = []
            for m in w.states[off:]:
                e_drift = max(e_drift, abs(float(np.real(np.trace(m @ hm))) - e0))
                tr_drift = max(tr_drift, abs(float(np.real(np.trace(m))) - 1.0))
                s_col.append(entropy(DensityMatrix(m)))
            monotone &= _monotone(s_col)
        if do_flm:
            wf = sea_walk(h, p["epsilon"], conf, "flm", start, p["flm_reference"], p["renormalize"])
            pf = wf.probabilities[off:]
            flm_trace[repr(tau)] = float(wf.trace[-1])
        if do_num and do_flm:
            g = float(np.max(np.abs(pf - pn)))
            gaps.append(g)
            per_tau[repr(tau)] = g
        offsets, pn_c = centered(pn, start)
        _, pf_c = centered(pf, start)
        for k, time_ in enumerate(p["t_grid"]):
            for j, node in enumerate(offsets):
                t.add(tau, time_, int(node), float(pn_c[k, j]), float(pf_c[k, j]))
    summary = {
        "max_flm_num_gap": max(gaps) if gaps else None,
        "flm_num_gap_by_tau": per_tau or None,
        "flm_trace_at_last_t": flm_trace or None,
        "energy_drift": e_drift if do_num else None,
        "trace_drift": tr_drift if do_num else None,
        "entropy_monotone": monotone if do_num else None,
    }
    return t, summary


def run_sweep(p, jobs=None, **_):
    h = hamiltonian(cycle_graph(p["N"]), p["mu"])
    grid = SweepGrid(tuple(p["tau"]), tuple(p["epsilon"]), tuple(p["t_grid"]))
    rows = sweep(h, grid, rk_tol=p["rk_tol"], jobs=jobs)
    t = Table(["tau", "epsilon", "t", "pi_s", "S", "E", "error"])
    for r in rows:
        t.add(r.tau, r.epsilon, r.t, r.pi_s, r.entropy, r.energy, r.error or "")
    ok = [r for r in rows if r.error is None]
    argmax = {}
    for time_ in grid.observation_times:
        cand = [r for r in ok if r.t == time_]
        if cand:
            best = max(cand, key=lambda r: r.pi_s)
            argmax[repr(time_)] = {"tau": best.tau, "epsilon": best.epsilon, "pi_s": best.pi_s}
    summary = {
        "failed_cells": len({(r.tau, r.epsilon) for r in rows if r.error}),
        "max_pi_s_by_t": argmax,
    }
    return t, summary


def _composite_state(p, rng=None):
    h_a = cmp.qubit_hamiltonian(p["omega_a"], p["h_a"])
    h_b = cmp.qubit_hamiltonian(p["omega_b"], p["h_b"])
    kind = p["state"]
    if kind == "bell":
        return cmp.bell_diagonal(*p["bell"], p["omega_a"], p["omega_b"], p["h_a"], p["h_b"])
    if kind == "separable":
        r_a = np.asarray(p["r_a"])
        rho_a = 0.5 * (np.eye(2) + np.tensordot(r_a, cmp.PAULI, axes=1))
        m = p["mu"] * np.kron(rho_a, np.eye(2) / 2) + (1 - p["mu"]) * np.eye(4) / 4
        return cmp.CompositeState(DensityMatrix(m), h_a, h_b)
    if kind == "product":
        return cmp.product_state(qubit_state(p["r_a"]), qubit_state(p["r_b"]), h_a, h_b)
    return cmp.CompositeState(DensityMatrix(random_density(4, rng)), h_a, h_b)


def run_composite(p, **_):
    state = _composite_state(p)
    grid, off = _with_zero(p["t_grid"])
    traj = cmp.integrate_composite(state, p["tau_a"], grid, p["tau_b"], rk_tol=p["rk_tol"])
    h = state.hamiltonian
    cols = ["t", "S", "E", "E_A", "E_B", "rA_x", "rA_y", "rA_z", "rB_x", "rB_y", "rB_z", "ds_dt"]
    t = Table(cols)
    e0 = float(np.real(np.trace(traj.states[0].matrix @ h)))
    s_col, e_drift, rate_min = [], 0.0, math.inf
    for time_, st in zip(p["t_grid"], traj.states[off:]):
        cs = cmp.CompositeState(st, state.h_a, state.h_b)
        ra, rb = cs.reduced("A"), cs.reduced("B")
        e = float(np.real(np.trace(st.matrix @ h)))
        e_drift = max(e_drift, abs(e - e0))
        s = entropy(st)
        s_col.append(s)
        rate = cmp.entropy_rate(cs, p["tau_a"], p["tau_b"])
        rate_min = min(rate_min, rate)
        t.add(
            time_, s, e,
            float(np.real(np.trace(ra @ state.h_a))), float(np.real(np.trace(rb @ state.h_b))),
            *qubit_bloch(ra), *qubit_bloch(rb), rate,
        )
    summary = {
        "energy_drift": e_drift,
        "trace_drift": traj.step_trace_drift,
        "entropy_monotone": _monotone(s_col) and traj.max_entropy_drop <= MONOTONE_TOL,
        "min_entropy_rate": rate_min,
    }
    return t, summary


def run_nosignal(p, seed=None, **_):
    seed = cfg.resolve_seed(p["seed"], seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0]) if p["state"] == "random" else None
    state = _composite_state(p, rng)
    rep = cmp.no_signaling_check(
        state, p["trials"], seed, p["tau_a"], p["tau_b"],
        corrupt_beta_a1=p["negative_control"], raise_on_fail=False,
    )
    t = Table(["trial", "state_dev", "perception_dev", "rhs_dev", "pass"])
    tols = (cmp.NS_TOL_STATE, cmp.NS_TOL_PERCEPTION, cmp.NS_TOL_RHS)
    for k, a, b, c in rep.records:
        t.add(k, a, b, c, int(all(d <= tol for d, tol in zip((a, b, c), tols))))
    summary = {
        "seed": seed,
        "passed": rep.passed,
        "max_state_dev": rep.max_state_dev,
        "max_perception_dev": rep.max_perception_dev,
        "max_rhs_dev": rep.max_rhs_dev,
        "failures": len(rep.failures),
    }
    if rep.failures:
        k, check, dev = rep.failures[0]
        err = SignalDetected(f"check ({check}) failed on trial {k}: deviation {dev:.3e}", check, None, k, dev)
        err.table, err.summary = t, summary
        raise err
    return t, summary


RUNNERS = {
    "qubit": run_qubit,
    "ctqw": run_ctqw,
    "sweep": run_sweep,
    "composite": run_composite,
    "nosignal": run_nosignal,
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return None if not math.isfinite(v) else float(v)
    return v


def render_json(name, params, table: Table, summary) -> str:
    doc = {
        "config": {"scenario": name, **params},
        "rows": [dict(zip(table.columns, r)) for r in table.rows],
        "summary": summary,
    }
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def _write(out_dir, name, fmt, params, table, summary):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.{fmt}")
    text = render_csv(table) if fmt == "csv" else render_json(name, params, table, summary)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _summary_line(name, summary) -> str:
    parts = [f"{k}={_fmt(v) if not isinstance(v, dict) else json.dumps(_jsonable(v), sort_keys=True)}"
             for k, v in summary.items() if v is not None]
    return f"{name}: " + " ".join(parts)


def _load_config(path):
    try:
        data = cfg.load(path)
    except OSError as exc:
        return None, [f"cannot read {path}: {exc.strerror or exc}"]
    except cfg.tomllib.TOMLDecodeError as exc:
        return None, [f"cannot parse {path}: {exc}"]
    return cfg.validate_dict(data)


def cmd_validate(args) -> int:
    conf, errors = _load_config(args.config)
    if conf is not None and conf.scenarios.get("nosignal") is not None:
        try:
            cfg.resolve_seed(0)
        except cfg.ConfigError as exc:
            errors = exc.errors
    for e in errors:
        print(e)
    return EXIT_INVALID if errors else EXIT_OK


def cmd_run(args) -> int:
    conf, errors = _load_config(args.config)
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    out = args.out or conf.out
    fmt = args.format or conf.format
    jobs = args.jobs or conf.jobs
    for name, params in conf.scenarios.items():
        t0 = time.perf_counter()
        try:
            table, summary = RUNNERS[name](params, jobs=jobs, seed=args.seed)
        except cfg.ConfigError as exc:
            for e in exc.errors:
                print(f"error: {e}", file=sys.stderr)
            return EXIT_INVALID
        except SignalDetected as exc:
            summary = exc.summary
            summary["wall_time"] = time.perf_counter() - t0
            path = _write(out, name, fmt, params, exc.table, summary)
            print(f"{name}: signal detected: {exc} (report: {path})", file=sys.stderr)
            return EXIT_SIGNAL
        except (NumericFailure, SeaDynError, np.linalg.LinAlgError, ValueError) as exc:
            print(f"{name}: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        summary["wall_time"] = time.perf_counter() - t0
        path = _write(out, name, fmt, params, table, summary)
        print(_summary_line(name, summary))
        print(f"{name}: wrote {path}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sea-dyn", description="Steepest-entropy-ascent dynamics scenarios.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run every scenario in a config file")
    r.add_argument("config")
    r.add_argument("--jobs", type=int, default=None, help="worker processes for sweeps (default: cores)")
    r.add_argument("--out", default=None, help="output directory")
    r.add_argument("--format", choices=cfg.FORMATS, default=None)
    r.add_argument("--seed", type=int, default=None, help=f"overrides ${cfg.SEED_ENV} and the config seed")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="check a config file without running it")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
