"""Continuous-time quantum walks on graphs with SEA relaxation."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SeaDynError
from .linalg import DensityMatrix, as_density
from .sea import (
    ConstraintSet,
    SeaConfig,
    compute_multipliers,
    entropy,
    flm_solve,
    flm_state,
    integrate,
    quench,
)

PI_FLOOR = 1e-9

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError("self-loops are not allowed")
            if not (0 <= i < self.n_vertices and 0 <= j < self.n_vertices):
                raise ValueError(f"edge ({i}, {j}) out of range")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_vertices, self.n_vertices))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def laplacian(self) -> np.ndarray:
        a = self.adjacency()
        return np.diag(a.sum(axis=1)) - a


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle graph needs N >= 3")
    return Graph(n, frozenset((i, (i + 1) % n) for i in range(n)))


@dataclass(frozen=True)
class WalkHamiltonian:
    mu: float
    matrix: np.ndarray = field(repr=False)
    graph: Graph = field(repr=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def constraints(self) -> ConstraintSet:
        return ConstraintSet.from_hamiltonian(self.matrix)


def hamiltonian(graph: Graph, mu: float = 1.0) -> WalkHamiltonian:
    """H = mu L = mu (D - A)."""
    m = (mu * graph.laplacian()).astype(complex)
    m.setflags(write=False)
    return WalkHamiltonian(float(mu), m, graph)


def default_start(n: int) -> int:
    return n // 2


def basis_state(n: int, node: int) -> np.ndarray:
    psi = np.zeros(n, dtype=complex)
    psi[node] = 1.0
    return psi


def centered(values, start: int):
    """Reorder node data so the start node sits at offset 0.

    Returns (offsets, values) with offsets running from -floor(N/2) upwards.
    """
    values = np.asarray(values)
    n = values.shape[-1]
    offsets = np.arange(n) - n // 2
    idx = (offsets + start) % n
    return offsets, values[..., idx]


def unitary_walk(h: WalkHamiltonian, psi0, t):
    """Amplitudes exp(-i H t) psi0; `t` may be a scalar or an array of times."""
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    w, v = np.linalg.eigh(h.matrix)
    c = v.conj().T @ psi0
    ts = np.asarray(t, dtype=float)
    out = (v[None, :, :] * (np.exp(-1j * np.outer(np.atleast_1d(ts), w)) * c)[:, None, :]).sum(axis=2)
    return out[0] if ts.ndim == 0 else out


@dataclass
class WalkTrajectory:
    times: np.ndarray
    probabilities: np.ndarray  # (len(times), N)
    states: list = field(repr=False)
    method: str = "num"
    start: int = 0
    trace: np.ndarray | None = None


def initial_walk_state(n: int, epsilon: float, start: int) -> DensityMatrix:
    e = np.zeros((n, n))
    e[start, start] = 1.0
    return quench(e, epsilon)


def sea_walk(
    h: WalkHamiltonian,
    epsilon: float,
    config: SeaConfig,
    method: str = "num",
    start: int | None = None,
    reference="equilibrium",
    renormalize: bool = False,
) -> WalkTrajectory:
    """SEA walk from the quenched basis state at `start` (default N//2).

    method "num" integrates the full equation of motion; "flm" evaluates the
    frozen-multiplier solution with projectors on the site basis.
    """
    n = h.n
    start = default_start(n) if start is None else int(start)
    rho0 = initial_walk_state(n, epsilon, start)
    cs = h.constraints()
    times = config.t_grid
    method = method.lower()
    if method == "num":
        traj = integrate(rho0, cs, config)
        mats = [s.matrix for s in traj.states]
        trace = np.ones(len(times))
    elif method == "flm":
        sol = flm_solve(rho0, cs, config.tau, reference, basis=np.eye(n), renormalize=renormalize)
        mats = [flm_state(sol, t) for t in times]
        trace = sol.trace(times)
    else:
        raise ValueError(f"unknown method {method!r}")
    probs = np.array([np.real(np.diag(m)) for m in mats])
    return WalkTrajectory(times, probs, mats, method, start, trace)


def entropy_production(rho, constraints: ConstraintSet, tau: float) -> float:
    """Pi_S = (1/2tau)[Tr((L+1){L,rho}) + sum_i (-1)^i beta_i Tr((L+1){C_i,rho})], L = Bln(rho).

    Values in (-1e-9, 0) are reported as 0.
    """
    d = as_density(rho)
    m = d.matrix
    lp1 = d.log() + np.eye(d.dim)
    mult = compute_multipliers(d, constraints)
    signs = np.array([(-1.0) ** (i + 1) for i in range(len(constraints))])

    def tr_acomm(x):
        # Tr((L+1){x, rho})
        return float(np.real(np.sum(lp1.T * (x @ m + m @ x))))

    total = tr_acomm(d.log())
    for s, b, c in zip(signs, mult.beta, constraints.generators):
        total += s * b * tr_acomm(c)
    pi = total / (2 * tau)
    if -PI_FLOOR < pi < 0:
        pi = 0.0
    return pi


@dataclass(frozen=True)
class SweepGrid:
    tau_values: tuple
    epsilon_values: tuple
    observation_times: tuple

    def __post_init__(self):
        taus = tuple(float(x) for x in self.tau_values)
        eps = tuple(float(x) for x in self.epsilon_values)
        ts = tuple(float(x) for x in self.observation_times)
        if not taus or not eps or not ts:
            raise ValueError("sweep axes must be non-empty")
        if any(not t > 0 for t in taus):
            raise ValueError("tau must be positive")
        if any(not 0 <= e <= 1 for e in eps):
            raise ValueError("epsilon out of [0,1]")
        if len(set(taus)) != len(taus) or len(set(eps)) != len(eps):
            raise ValueError("sweep axis values must be distinct")
        if any(t < 0 for t in ts) or len(set(ts)) != len(ts):
            raise ValueError("observation times must be distinct and non-negative")
        object.__setattr__(self, "tau_values", taus)
        object.__setattr__(self, "epsilon_values", eps)
        object.__setattr__(self, "observation_times", ts)


@dataclass(frozen=True)
class SweepRow:
    tau: float
    epsilon: float
    t: float
    pi_s: float
    entropy: float
    energy: float
    error: str | None = None


def _sweep_cell(args):
    hmat, mu, tau, eps, times, rk_tol, start = args
    n = hmat.shape[0]
    g = Graph(n, frozenset())
    h = WalkHamiltonian(mu, hmat, g)
    cs = h.constraints()
    obs = sorted(times)
    grid = obs if obs[0] == 0 else [0.0] + obs
    try:
        traj = sea_walk(h, eps, SeaConfig(tau, grid, rk_tol=rk_tol), "num", start)
        by_t = dict(zip(grid, traj.states))
        rows = []
        for t in times:
            m = by_t[t]
            d = as_density(m)
            rows.append(
                SweepRow(
                    tau, eps, t,
                    entropy_production(d, cs, tau),
                    entropy(d),
                    float(np.real(np.trace(m @ hmat))),
                )
            )
        return rows
    except (SeaDynError, ValueError, np.linalg.LinAlgError) as exc:
        tag = f"{type(exc).__name__}: {exc}"
        nan = float("nan")
        return [SweepRow(tau, eps, t, nan, nan, nan, tag) for t in times]


def sweep(
    h: WalkHamiltonian,
    grid: SweepGrid,
    rk_tol: float = 1e-9,
    jobs: int | None = None,
    start: int | None = None,
) -> list[SweepRow]:
    """Pi_S, entropy and mean energy over a (tau, epsilon, t) grid.

    Rows are ordered tau-major, then epsilon, then t (ascending), independent
    of the order in which worker processes finish. A failing cell yields rows
    with NaN values and an error tag; the sweep carries on.
    """
    times = tuple(sorted(grid.observation_times))
    start = default_start(h.n) if start is None else start
    cells = [
        (np.asarray(h.matrix), h.mu, tau, eps, times, rk_tol, start)
        for tau in grid.tau_values
        for eps in grid.epsilon_values
    ]
    jobs = (os.cpu_count() or 1) if jobs is None else max(1, int(jobs))
    results = []
    if jobs == 1 or len(cells) == 1:
        it = map(_sweep_cell, cells)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=min(jobs, len(cells)))
        it = pool.map(_sweep_cell, cells)
    try:
        for cell in it:
            r0 = cell[0]
            log.info("cell tau=%g epsilon=%g %s", r0.tau, r0.epsilon, "failed: " + r0.error if r0.error else "ok")
            results.append(cell)
    finally:
        if pool is not None:
            pool.shutdown()
    rows = [row for cell in results for row in cell]
    return sorted(rows, key=lambda r: (r.tau, r.epsilon, r.t))
