"""Single-system steepest-entropy-ascent dynamics.

Units: hbar = k_B = 1.  The equation of motion is

    drho/dt = -i[H, rho] - (1/tau) [ rho Bln(rho) - 1/2 sum_i gamma_i {C_i, rho} ]

where gamma solves the Gram system  sum_j gamma_j (C_i, C_j) = (C_i, Bln rho)
with (X, Y) = Tr(rho {X, Y})/2.  The reported multipliers follow the alternating
sign convention beta_i = (-1)^(i+1) gamma_i, so that at I/N one gets
beta_I = -ln N and beta_H = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    EdgeOfDomain,
    NotCodiagonal,
    NumericFailure,
    NotPositive,
    SingularGram,
    StepSizeUnderflow,
)
from .linalg import (
    CLAMP_WINDOW,
    SUPPORT_THRESHOLD,
    DensityMatrix,
    _fix_phases,
    as_density,
    from_spectrum,
    hermitian_part,
    unitary_exp,
)

GRAM_TOL = 1e-12
MIN_STEP = 1e-14


@dataclass(frozen=True)
class ConstraintSet:
    """Ordered conserved generators [I, H, ...]."""

    generators: tuple

    def __post_init__(self):
        gens = tuple(hermitian_part(g) for g in self.generators)
        if len(gens) < 2:
            raise ValueError("a constraint set needs at least I and H")
        n = gens[0].shape[0]
        if any(g.shape != (n, n) for g in gens):
            raise ValueError("constraint generators must share one dimension")
        if not np.array_equal(gens[0], np.eye(n)):
            raise ValueError("the first constraint generator must be the identity")
        for g in gens:
            g.setflags(write=False)
        object.__setattr__(self, "generators", gens)

    @classmethod
    def from_hamiltonian(cls, h, *extra) -> "ConstraintSet":
        h = np.asarray(h, dtype=complex)
        return cls((np.eye(h.shape[0]), h) + tuple(extra))

    @property
    def hamiltonian(self) -> np.ndarray:
        return self.generators[1]

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    def __len__(self):
        return len(self.generators)


def _signs(n: int) -> np.ndarray:
    return np.array([(-1.0) ** i for i in range(n)])


@dataclass(frozen=True)
class Multipliers:
    beta: np.ndarray
    omega: float
    gamma: np.ndarray = field(repr=False)

    @property
    def beta_I(self) -> float:
        return float(self.beta[0])

    @property
    def beta_H(self) -> float:
        return float(self.beta[1])

    def combination(self, constraints: ConstraintSet) -> np.ndarray:
        """K = sum_i (-1)^i beta_i C_i (1-based i), i.e. -sum_i gamma_i C_i."""
        return -sum(g * c for g, c in zip(self.gamma, constraints.generators))


@dataclass(frozen=True)
class SeaConfig:
    tau: float
    t_grid: np.ndarray
    rk_tol: float = 1e-9
    support_threshold: float = SUPPORT_THRESHOLD
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        grid = np.atleast_1d(np.asarray(self.t_grid, dtype=float))
        if grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
            raise ValueError("t_grid must be non-empty, non-negative and strictly increasing")
        if not self.rk_tol > 0:
            raise ValueError("rk_tol must be positive")
        object.__setattr__(self, "t_grid", grid)


def entropy(rho, threshold: float = SUPPORT_THRESHOLD) -> float:
    """von Neumann entropy -Tr(rho ln rho) over the support."""
    w = as_density(rho).eigvals
    w = w[w > threshold]
    return float(-np.sum(w * np.log(w)))


def _entropy_of(w: np.ndarray, threshold: float) -> float:
    w = w[w > threshold]
    return float(-np.sum(w * np.log(w)))


def _xlogx(w: np.ndarray, threshold: float) -> np.ndarray:
    out = np.zeros_like(w)
    s = w > threshold
    out[s] = w[s] * np.log(w[s])
    return out


def _gram(m: np.ndarray, gens: np.ndarray, cc: np.ndarray | None = None) -> np.ndarray:
    # Tr(rho {C_i, C_j})/2 = Re Tr(rho C_i C_j)
    if cc is not None:
        n, dim = gens.shape[0], m.shape[0]
        return (cc.reshape(n * n, dim * dim) @ m.T.reshape(dim * dim)).real.reshape(n, n)
    rc = m @ gens
    return np.einsum("iab,jba->ij", rc, gens).real


def _pair_products(gens: np.ndarray) -> np.ndarray:
    return np.einsum("iab,jbc->ijac", gens, gens)


def _solve_gram(g: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, float]:
    if g.shape[0] == 2:
        det = g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
    else:
        det = float(np.linalg.det(g))
    scale = float(np.prod(np.abs(np.diag(g))))
    if not det > GRAM_TOL * max(scale, 1e-300):
        raise SingularGram(f"Gram determinant {det:.3e} is singular (scale {scale:.3e})")
    if g.shape[0] == 2:
        sol = np.array([g[1, 1] * b[0] - g[0, 1] * b[1], g[0, 0] * b[1] - g[1, 0] * b[0]]) / det
        return sol, float(det)
    return np.linalg.solve(g, b), det


def _multipliers_from_eig(m, w, v, gens, threshold, cc=None) -> tuple[Multipliers, np.ndarray]:
    gens = np.asarray(gens)
    xlx = (v * _xlogx(w, threshold)) @ v.conj().T  # rho Bln(rho)
    g = _gram(m, gens, cc)
    b = np.einsum("iab,ba->i", gens, xlx).real
    gamma, det = _solve_gram(g, b)
    beta = gamma * _signs(len(gens))
    return Multipliers(beta, det, gamma), xlx


def compute_multipliers(rho, constraints: ConstraintSet) -> Multipliers:
    d = as_density(rho)
    mult, _ = _multipliers_from_eig(d.matrix, d.eigvals, d.eigvecs, np.array(constraints.generators), d.threshold)
    return mult


def _dissipator_from_eig(m, w, v, gens, tau, threshold, cc=None) -> np.ndarray:
    if math.isinf(tau):
        return np.zeros_like(m)
    mult, xlx = _multipliers_from_eig(m, w, v, gens, threshold, cc)
    cm = np.einsum("i,iab->ab", mult.gamma, gens) @ m
    return -(xlx - 0.5 * (cm + cm.conj().T)) / tau


def dissipator(rho, constraints: ConstraintSet, tau: float) -> np.ndarray:
    """Dissipative part of drho/dt."""
    d = as_density(rho)
    return _dissipator_from_eig(d.matrix, d.eigvals, d.eigvecs, np.array(constraints.generators), tau, d.threshold)


def sea_rhs(rho, constraints: ConstraintSet, tau: float, hamiltonian=None) -> np.ndarray:
    """drho/dt = -i[H, rho] + dissipator."""
    d = as_density(rho)
    h = constraints.hamiltonian if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    m = d.matrix
    return -1j * (h @ m - m @ h) + dissipator(d, constraints, tau)


def _sea_field(constraints: ConstraintSet, tau: float, hamiltonian, threshold: float, unitary=True):
    gens = np.array(constraints.generators)
    cc = _pair_products(gens)
    h = constraints.hamiltonian if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)

    def f(m, eig=None):
        if eig is None:
            w, v = np.linalg.eigh(m)
        else:
            w, v = eig
        out = _dissipator_from_eig(m, w, v, gens, tau, threshold, cc)
        if unitary:
            hm = h @ m
            out = out - 1j * (hm - hm.conj().T)
        return out

    return f


def commutes_with_constraints(h, constraints: ConstraintSet, tol: float = 1e-12) -> bool:
    h = np.asarray(h, dtype=complex)
    hn = max(np.linalg.norm(h), 1.0)
    for c in constraints.generators:
        if np.linalg.norm(h @ c - c @ h) > tol * hn * max(np.linalg.norm(c), 1.0):
            return False
    return True


# Dormand-Prince 5(4) tableau
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    n_steps: int = 0
    n_rejected: int = 0
    max_entropy_drop: float = 0.0  # largest per-step entropy decrease seen (0 if none)
    step_trace_drift: float = 0.0  # largest |Tr - 1| before per-step renormalization

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def matrices(self) -> np.ndarray:
        return np.array([s.matrix for s in self.states])


def _project(m: np.ndarray, rank: int, threshold: float):
    """Hermitize, check positivity, keep the leading `rank` eigenvalues, renormalize."""
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    if w[0] < -CLAMP_WINDOW:
        return None
    w = w[::-1].copy()
    v = v[:, ::-1]
    w[rank:] = 0.0
    w = np.where(w < 0, 0.0, w)
    tr = w.sum()
    w /= tr
    return w, v, float(tr)


def integrate_field(
    f: Callable,
    rho0,
    t_grid,
    rk_tol: float = 1e-9,
    threshold: float = SUPPORT_THRESHOLD,
    max_steps: int = 2_000_000,
    h0: float | None = None,
) -> Trajectory:
    """Adaptive Dormand-Prince integration of drho/dt = f(rho).

    f(m, eig) receives the current matrix and optionally its (w, v) spectral pair.
    After every accepted step the state is Hermitized, its rank is held at the
    initial rank, tiny negative eigenvalues are clamped and the trace is reset
    to one. Steps producing eigenvalues below -1e-10 are rejected.
    """
    d0 = as_density(rho0, threshold)
    grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    rank = d0.rank
    w, v = d0.eigvals.copy(), d0.eigvecs.copy()
    y = from_spectrum(w, v)
    t = float(grid[0])
    states = [DensityMatrix.from_eig(w, v, threshold)]
    s_prev = _entropy_of(w, threshold)
    traj = Trajectory(grid.copy(), states)
    if grid.size == 1:
        return traj
    span = grid[-1] - grid[0]
    h = h0 if h0 is not None else min(1e-3 * max(span, 1.0), grid[1] - grid[0])
    k = [None] * 7
    steps = 0
    for t_next in grid[1:]:
        while t < t_next:
            if steps >= max_steps:
                raise NumericFailure(f"exceeded {max_steps} integration steps")
            if h < MIN_STEP:
                raise StepSizeUnderflow(f"step size {h:.3e} at t={t:.6g}")
            h_try = min(h, t_next - t)
            last = h_try >= t_next - t
            k[0] = f(y, (w, v))
            for i in range(1, 7):
                yi = y + h_try * sum(a * kj for a, kj in zip(_A[i], k[:i]) if a != 0.0)
                k[i] = f(yi)
            y5 = y + h_try * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
            err = float(np.linalg.norm(h_try * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)))
            steps += 1
            proj = _project(y5, rank, threshold) if err <= rk_tol else None
            if proj is None:
                traj.n_rejected += 1
                fac = 0.2 if err <= rk_tol else max(0.2, 0.9 * (rk_tol / err) ** 0.2)
                h = h_try * fac
                continue
            w, v, tr = proj
            traj.step_trace_drift = max(traj.step_trace_drift, abs(tr - 1.0))
            y = from_spectrum(w, v)
            t = t_next if last else t + h_try
            s_new = _entropy_of(w, threshold)
            traj.max_entropy_drop = max(traj.max_entropy_drop, s_prev - s_new)
            s_prev = s_new
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (rk_tol / err) ** 0.2))
            if not (last and h_try < h):
                # a step shortened to land on a grid point says little about the next one
                h = h_try * fac
        states.append(DensityMatrix.from_eig(w, v, threshold))
    traj.n_steps = steps
    return traj


def integrate(
    rho0, constraints: ConstraintSet, config: SeaConfig, hamiltonian=None, frame: str = "auto"
) -> Trajectory:
    """Reference numerical ("NUM") solution of the SEA equation of motion.

    frame="interaction" integrates the purely dissipative equation for
    U_t^dagger rho U_t and rotates back at the output times; this is exact when
    H commutes with every constraint generator (the dissipator is covariant
    under such unitaries) and removes the oscillatory time scale from step
    control. "auto" picks it whenever that condition holds, otherwise "lab".
    """
    h = constraints.hamiltonian if hamiltonian is None else hermitian_part(hamiltonian)
    if frame == "auto":
        frame = "interaction" if commutes_with_constraints(h, constraints) else "lab"
    if frame not in ("lab", "interaction"):
        raise ValueError(f"unknown frame {frame!r}")
    if frame == "interaction" and not commutes_with_constraints(h, constraints):
        raise ValueError("interaction frame needs H to commute with every constraint")
    lab = frame == "lab"
    f = _sea_field(constraints, config.tau, h, config.support_threshold, unitary=lab)
    traj = integrate_field(
        f, rho0, config.t_grid, config.rk_tol, config.support_threshold, config.max_steps
    )
    if not lab:
        eh, vh = np.linalg.eigh(h)
        for k, t in enumerate(traj.times):
            u = (vh * np.exp(-1j * eh * t)) @ vh.conj().T
            s = traj.states[k]
            traj.states[k] = DensityMatrix.from_eig(s.eigvals, u @ s.eigvecs, s.threshold)
    return traj


def gpb_solution(epsilon: float, tau: float, t):
    """Exact equatorial-qubit Bloch radius r(t) = tanh[exp(-t/tau) artanh(eps)]."""
    if epsilon == 1:
        raise EdgeOfDomain("epsilon = 1 is a pure state, which does not relax")
    if not 0 <= epsilon < 1:
        raise ValueError("epsilon must lie in [0, 1)")
    if not tau > 0:
        raise ValueError("tau must be positive")
    t = np.asarray(t, dtype=float)
    return np.tanh(np.exp(-t / tau) * np.arctanh(epsilon))


def quench(rho0, epsilon: float) -> DensityMatrix:
    """Mix a state with white noise: eps rho0 + (1 - eps) I/N."""
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon out of [0,1]")
    m = np.asarray(rho0.matrix if isinstance(rho0, DensityMatrix) else rho0, dtype=complex)
    n = m.shape[0]
    return DensityMatrix(epsilon * m + (1 - epsilon) * np.eye(n) / n)


def canonical_state(h, energy: float) -> DensityMatrix:
    """Maximum-entropy state exp(-b H)/Z with Tr(rho H) = energy."""
    w, v = np.linalg.eigh(hermitian_part(h))
    lo, hi = w[0], w[-1]
    span = hi - lo
    if span == 0 or abs(energy - w.mean()) <= 1e-13 * max(1.0, span):
        return DensityMatrix(np.eye(w.size) / w.size)
    if not lo < energy < hi:
        raise EdgeOfDomain("energy at or beyond the spectrum edge has no finite-temperature state")

    def probs(b):
        x = -b * (w - (lo if b > 0 else hi))
        p = np.exp(x)
        return p / p.sum()

    def g(b):
        return probs(b) @ w - energy

    b_hi = 1.0 / span
    while g(b_hi) > 0:
        b_hi *= 2
    b_lo = -1.0 / span
    while g(b_lo) < 0:
        b_lo *= 2
    b = brentq(g, b_lo, b_hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return DensityMatrix(from_spectrum(probs(b), v))


@dataclass(frozen=True)
class FlmSolution:
    """Frozen-multiplier closed form p_m(t) = exp(v_m e^{-t/tau} - mu_m)."""

    beta_fixed: Multipliers
    mu_c: np.ndarray
    v_tilde: np.ndarray
    basis: np.ndarray = field(repr=False)  # columns span the projectors P_m
    p0: np.ndarray = field(repr=False)
    tau: float = 1.0
    hamiltonian: np.ndarray = field(default=None, repr=False)
    renormalize: bool = False

    @property
    def projectors(self) -> list:
        return [np.outer(c, c.conj()) for c in self.basis.T]

    def probabilities(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        decay = np.exp(-t / self.tau)[..., None]
        with np.errstate(invalid="ignore"):
            p = np.exp(self.v_tilde * decay - self.mu_c)
        p = np.where(self.p0 > 0, p, 0.0)
        if self.renormalize:
            p = p / p.sum(axis=-1, keepdims=True)
        return p

    def trace(self, t) -> np.ndarray:
        return self.probabilities(t).sum(axis=-1)


def _joint_basis(rho: np.ndarray, k: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    out = v.copy()
    start = 0
    n = w.size
    while start < n:
        stop = start + 1
        while stop < n and abs(w[stop] - w[start]) <= 1e-10:
            stop += 1
        if stop - start > 1:
            blk = v[:, start:stop]
            _, u = np.linalg.eigh(blk.conj().T @ k @ blk)
            out[:, start:stop] = blk @ u
        start = stop
    return out[:, ::-1]


def flm_solve(
    rho0,
    constraints: ConstraintSet,
    tau: float | SeaConfig,
    reference="initial",
    basis=None,
    renormalize: bool = False,
    hamiltonian=None,
) -> FlmSolution:
    """Fixed-Lagrange-multiplier solution.

    reference: "initial" (freeze beta at rho0), "equilibrium" (at the maximum
    entropy state with the same mean energy), or an explicit density matrix.
    basis: optional unitary whose columns define the projectors; rho0 must be
    diagonal in it. Without it, rho0 must commute with the frozen constraint
    combination and the joint eigenbasis is used.
    """
    if isinstance(tau, SeaConfig):
        tau = tau.tau
    d0 = as_density(rho0)
    if isinstance(reference, str):
        if reference == "initial":
            ref = d0
        elif reference == "equilibrium":
            if len(constraints) != 2:
                raise ValueError("equilibrium reference supports the (I, H) constraint set only")
            ref = canonical_state(constraints.hamiltonian, float(np.real(np.trace(d0.matrix @ constraints.hamiltonian))))
        else:
            raise ValueError(f"unknown reference {reference!r}")
    else:
        ref = as_density(reference)
    mult = compute_multipliers(ref, constraints)
    kmat = mult.combination(constraints)
    m0 = d0.matrix
    if basis is None:
        c = kmat @ m0 - m0 @ kmat
        if np.max(np.abs(c)) > 1e-10 * max(1.0, np.max(np.abs(kmat))):
            raise NotCodiagonal("rho0 does not commute with the frozen constraint combination")
        w_basis = _joint_basis(m0, kmat)
    else:
        w_basis = np.asarray(basis, dtype=complex)
        rot = w_basis.conj().T @ m0 @ w_basis
        off = rot - np.diag(np.diag(rot))
        if np.max(np.abs(off)) > 1e-10:
            raise NotCodiagonal("rho0 is not diagonal in the supplied basis")
    p0 = np.real(np.einsum("im,ij,jm->m", w_basis.conj(), m0, w_basis))
    p0 = np.where(p0 > d0.threshold, p0, 0.0)
    mu_c = np.real(np.einsum("im,ij,jm->m", w_basis.conj(), kmat, w_basis))
    with np.errstate(divide="ignore"):
        v_tilde = np.where(p0 > 0, np.log(np.where(p0 > 0, p0, 1.0)) + mu_c, -np.inf)
    h = constraints.hamiltonian if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    return FlmSolution(mult, mu_c, v_tilde, w_basis, p0, float(tau), h, renormalize)


def flm_probabilities(sol: FlmSolution, t) -> np.ndarray:
    return sol.probabilities(t)


def flm_state(sol: FlmSolution, t: float) -> np.ndarray:
    """rho_t = U_t (sum_m p_m(t) P_m) U_t^dagger, U_t = exp(-iHt).

    Returned as a plain matrix: the frozen-multiplier trace drifts from one
    unless the solution was built with renormalize=True.
    """
    p = sol.probabilities(float(t))
    u = unitary_exp(sol.hamiltonian, float(t)) @ sol.basis
    return (u * p) @ u.conj().T


# --- qubit helpers ---------------------------------------------------------

PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]],
    dtype=complex,
)


def qubit_state(r_vec) -> DensityMatrix:
    r_vec = np.asarray(r_vec, dtype=float)
    if np.linalg.norm(r_vec) > 1 + 1e-12:
        raise NotPositive("qubit Bloch vector longer than 1")
    return DensityMatrix(0.5 * (np.eye(2) + np.tensordot(r_vec, PAULI, axes=1)))


def qubit_bloch(rho) -> np.ndarray:
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    return np.real(np.einsum("kij,ji->k", PAULI, m))


def equatorial_qubit(epsilon: float, omega: float = 1.0):
    """Quenched equatorial qubit: H = omega sigma_z, rho0 = (I + eps sigma_x)/2."""
    h = omega * PAULI[2]
    return quench(qubit_state([1.0, 0.0, 0.0]), epsilon), ConstraintSet.from_hamiltonian(h)
