"""Bipartite (two-subsystem) SEA dynamics with local perception operators.

For a state rho on A (x) B the perception of an overall observable X by A is
(X)^A = Tr_B[(I_A (x) rho_B) X], and symmetrically for B.  Each subsystem J
gets its own multipliers from the 2x2 Gram system built on the perceived
constraints (I)^J = I_J and (H)^J, and the equation of motion is

    drho/dt = -i[H, rho] - {D^A, rho_A} (x) rho_B - rho_A (x) {D^B, rho_B}

with {D^J, rho_J} = ({(Bln rho)^J, rho_J} - sum_l gamma^J_l {(C_l)^J, rho_J}) / (2 tau_J).
Only noninteracting Hamiltonians H = H_A (x) I + I (x) H_B are supported.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPositive, NumericFailure, OutOfClass, SignalDetected
from .linalg import (
    SUPPORT_THRESHOLD,
    DensityMatrix,
    as_density,
    from_spectrum,
    haar_unitary,
    hermitian_part,
    partial_trace,
)
from .sea import PAULI, Multipliers, _solve_gram, integrate_field

_SUBSYSTEMS = {"A": 0, "a": 0, 0: 0, "B": 1, "b": 1, 1: 1}


def _index(subsystem) -> int:
    try:
        return _SUBSYSTEMS[subsystem]
    except (KeyError, TypeError):
        raise ValueError(f"subsystem must be 'A' or 'B', got {subsystem!r}") from None


def qubit_hamiltonian(omega: float, h=(0.0, 0.0, 1.0)) -> np.ndarray:
    """omega h.sigma with h normalized to a unit vector."""
    h = np.asarray(h, dtype=float)
    n = np.linalg.norm(h)
    if n == 0:
        raise ValueError("h must be a nonzero direction")
    return omega * np.tensordot(h / n, PAULI, axes=1)


@dataclass(frozen=True)
class CompositeState:
    rho: DensityMatrix
    h_a: np.ndarray = field(repr=False)
    h_b: np.ndarray = field(repr=False)

    def __post_init__(self):
        h_a, h_b = hermitian_part(self.h_a), hermitian_part(self.h_b)
        rho = as_density(self.rho)
        if rho.dim != h_a.shape[0] * h_b.shape[0]:
            raise DimensionMismatch(
                f"state of size {rho.dim} does not match {h_a.shape[0]}x{h_b.shape[0]} subsystems"
            )
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "h_a", h_a)
        object.__setattr__(self, "h_b", h_b)

    @property
    def dims(self) -> tuple[int, int]:
        return self.h_a.shape[0], self.h_b.shape[0]

    @property
    def hamiltonian(self) -> np.ndarray:
        da, db = self.dims
        return np.kron(self.h_a, np.eye(db)) + np.kron(np.eye(da), self.h_b)

    def reduced(self, subsystem) -> np.ndarray:
        return partial_trace(self.rho.matrix, self.dims, keep=("A", "B")[_index(subsystem)])

    def local_hamiltonian(self, subsystem) -> np.ndarray:
        return (self.h_a, self.h_b)[_index(subsystem)]

    def with_matrix(self, m) -> "CompositeState":
        return CompositeState(as_density(m, self.rho.threshold), self.h_a, self.h_b)

    def is_product(self, tol: float = 1e-12) -> bool:
        prod = np.kron(self.reduced("A"), self.reduced("B"))
        return float(np.linalg.norm(self.rho.matrix - prod)) <= tol


def product_state(rho_a, rho_b, h_a, h_b) -> CompositeState:
    a, b = as_density(rho_a).matrix, as_density(rho_b).matrix
    return CompositeState(DensityMatrix(np.kron(a, b)), h_a, h_b)


@dataclass(frozen=True)
class PerceptionOperator:
    subsystem: str
    matrix: np.ndarray = field(repr=False)


def _perceive(x: np.ndarray, m: np.ndarray, dims, j: int, rho_other: np.ndarray | None = None) -> np.ndarray:
    da, db = dims
    if rho_other is None:
        rho_other = partial_trace(m, dims, keep="B" if j == 0 else "A")
    if j == 0:
        return partial_trace(np.kron(np.eye(da), rho_other) @ x, dims, keep="A")
    return partial_trace(np.kron(rho_other, np.eye(db)) @ x, dims, keep="B")


def perceive(x, state: CompositeState, subsystem) -> PerceptionOperator:
    """Local perception (X)^J of an overall operator X."""
    x = np.asarray(x, dtype=complex)
    if x.shape != state.rho.matrix.shape:
        raise DimensionMismatch(f"operator shape {x.shape} vs state {state.rho.matrix.shape}")
    j = _index(subsystem)
    return PerceptionOperator("AB"[j], _perceive(x, state.rho.matrix, state.dims, j))


def deviation(x, state: CompositeState, subsystem) -> np.ndarray:
    """Delta(X)^J = (X)^J - I_J Tr[rho_J (X)^J]."""
    px = perceive(x, state, subsystem).matrix
    rj = state.reduced(subsystem)
    return px - np.trace(rj @ px) * np.eye(px.shape[0])


def covariance(x, y, state: CompositeState, subsystem) -> float:
    """(X, Y)^J = Tr[rho_J {Delta(X)^J, Delta(Y)^J}] / 2."""
    dx, dy = deviation(x, state, subsystem), deviation(y, state, subsystem)
    rj = state.reduced(subsystem)
    return float(np.real(np.trace(rj @ (dx @ dy + dy @ dx))) / 2)


def _bln_from_eig(w, v, threshold) -> np.ndarray:
    lw = np.zeros_like(w)
    s = w > threshold
    lw[s] = np.log(w[s])
    return from_spectrum(lw, v)


@dataclass(frozen=True)
class LocalMultipliers(Multipliers):
    """Per-subsystem multipliers; beta = (gamma_1, -gamma_2), omega = Gram determinant."""


def _local_terms(m, w, v, h_a, h_b, j, threshold):
    """Reduced state, perceived Bln(rho) and perceived H for subsystem j."""
    dims = (h_a.shape[0], h_b.shape[0])
    other = partial_trace(m, dims, keep="B" if j == 0 else "A")
    rj = partial_trace(m, dims, keep="A" if j == 0 else "B")
    bln = _perceive(_bln_from_eig(w, v, threshold), m, dims, j, other)
    # (H_A (x) I + I (x) H_B)^A = H_A + Tr(rho_B H_B) I, and symmetrically
    if j == 0:
        ph = h_a + np.trace(other @ h_b) * np.eye(dims[0])
    else:
        ph = h_b + np.trace(other @ h_a) * np.eye(dims[1])
    return rj, bln, ph


def _local_multipliers(rj, bln, ph) -> LocalMultipliers:
    # Tr(rho_J {X, Y})/2 = Re Tr(rho_J X Y) for Hermitian rho_J, X, Y
    rh = rj @ ph
    g = np.array([
        [1.0, np.trace(rh).real],
        [np.trace(rh).real, np.sum(rh.T * ph).real],
    ])
    b = np.array([np.sum(rj.T * bln).real, np.sum(rh.T * bln).real])
    gamma, det = _solve_gram(g, b)
    return LocalMultipliers(gamma * np.array([1.0, -1.0]), det, gamma)


def _acomm_form(rj, bln, ph, mult: LocalMultipliers, tau) -> np.ndarray:
    k = bln - mult.gamma[0] * np.eye(rj.shape[0]) - mult.gamma[1] * ph
    return (k @ rj + rj @ k) / (2 * tau)


def composite_multipliers(state: CompositeState, subsystem) -> LocalMultipliers:
    """Omega^J and beta^J = (beta_1, beta_2) for subsystem J."""
    d = state.rho
    rj, bln, ph = _local_terms(d.matrix, d.eigvals, d.eigvecs, state.h_a, state.h_b, _index(subsystem), d.threshold)
    return _local_multipliers(rj, bln, ph)


@dataclass(frozen=True)
class LocalDissipator:
    subsystem: str
    anticommutator_form: np.ndarray = field(repr=False)  # {D^J, rho_J}
    multipliers: LocalMultipliers
    tau: float
    product: bool  # True when rho = rho_A (x) rho_B (D^J); False otherwise (F^J)


def local_dissipator(state: CompositeState, subsystem, tau_j: float) -> LocalDissipator:
    if not tau_j > 0:
        raise ValueError("tau must be positive")
    j = _index(subsystem)
    d = state.rho
    rj, bln, ph = _local_terms(d.matrix, d.eigvals, d.eigvecs, state.h_a, state.h_b, j, d.threshold)
    mult = _local_multipliers(rj, bln, ph)
    return LocalDissipator("AB"[j], _acomm_form(rj, bln, ph, mult, tau_j), mult, float(tau_j), state.is_product(1e-10))


def _composite_field(h_a, h_b, tau_a, tau_b, threshold=SUPPORT_THRESHOLD, corrupt_beta_a1=False):
    h = np.kron(h_a, np.eye(h_b.shape[0])) + np.kron(np.eye(h_a.shape[0]), h_b)
    dims = (h_a.shape[0], h_b.shape[0])

    def f(m, eig=None):
        w, v = np.linalg.eigh(m) if eig is None else eig
        out = -1j * (h @ m - m @ h)
        red = []
        for j, tau in ((0, tau_a), (1, tau_b)):
            rj, bln, ph = _local_terms(m, w, v, h_a, h_b, j, threshold)
            mult = _local_multipliers(rj, bln, ph)
            if corrupt_beta_a1 and j == 0:
                g = mult.gamma * np.array([-1.0, 1.0])
                mult = LocalMultipliers(g * np.array([1.0, -1.0]), mult.omega, g)
            red.append((rj, _acomm_form(rj, bln, ph, mult, tau)))
        (ra, da_), (rb, db_) = red
        n = ra.shape[0] * rb.shape[0]
        diss = np.multiply.outer(da_, rb) + np.multiply.outer(ra, db_)
        return out - diss.transpose(0, 2, 1, 3).reshape(n, n)

    f.dims = dims
    return f


def composite_rhs(state: CompositeState, tau_a: float, tau_b: float | None = None, corrupt_beta_a1: bool = False) -> np.ndarray:
    """drho/dt for the composite. tau_b defaults to tau_a.

    corrupt_beta_a1 flips the sign of beta^A_1; it exists only as a negative
    control for the no-signaling harness.
    """
    tau_b = tau_a if tau_b is None else tau_b
    if not (tau_a > 0 and tau_b > 0):
        raise ValueError("tau must be positive")
    d = state.rho
    f = _composite_field(state.h_a, state.h_b, tau_a, tau_b, d.threshold, corrupt_beta_a1)
    return f(d.matrix, (d.eigvals, d.eigvecs))


def entropy_rate(state: CompositeState, tau_a: float, tau_b: float | None = None) -> float:
    """ds/dt = sum_J Tr[{D^J, rho_J} (Bln rho)^J], the entropy production of the composite."""
    tau_b = tau_a if tau_b is None else tau_b
    d = state.rho
    total = 0.0
    for j, tau in ((0, tau_a), (1, tau_b)):
        rj, bln, ph = _local_terms(d.matrix, d.eigvals, d.eigvecs, state.h_a, state.h_b, j, d.threshold)
        mult = _local_multipliers(rj, bln, ph)
        total += float(np.real(np.trace(_acomm_form(rj, bln, ph, mult, tau) @ bln)))
    return total


def integrate_composite(
    state: CompositeState,
    tau_a: float,
    t_grid,
    tau_b: float | None = None,
    rk_tol: float = 1e-9,
    max_steps: int = 2_000_000,
):
    """Integrate the composite equation of motion with the single-system integrator."""
    tau_b = tau_a if tau_b is None else tau_b
    if not (tau_a > 0 and tau_b > 0):
        raise ValueError("tau must be positive")
    f = _composite_field(state.h_a, state.h_b, tau_a, tau_b, state.rho.threshold)
    return integrate_field(f, state.rho, t_grid, rk_tol, state.rho.threshold, max_steps)


# --- no-signaling harness ------------------------------------------------------

NS_TOL_STATE = 1e-10
NS_TOL_PERCEPTION = 1e-9
NS_TOL_RHS = 1e-8


@dataclass
class NoSignalingReport:
    trials: int
    seed: int | None
    max_state_dev: float = 0.0
    max_perception_dev: float = 0.0
    max_rhs_dev: float = 0.0
    failures: list = field(default_factory=list)  # (trial, check, deviation)
    records: list = field(default_factory=list)  # (trial, dev_a, dev_b, dev_c)

    @property
    def passed(self) -> bool:
        return not self.failures


def _square_fn(w, v, threshold):
    return from_spectrum(w**2, v)


def no_signaling_check(
    state: CompositeState,
    trials: int = 100,
    seed: int | None = 0,
    tau_a: float = 1.0,
    tau_b: float | None = None,
    corrupt_beta_a1: bool = False,
    raise_on_fail: bool = True,
) -> NoSignalingReport:
    """Apply seeded Haar-random U_B and verify subsystem A cannot tell.

    Checks per trial, with rho' = (I (x) U_B) rho (I (x) U_B)^dagger:
      (a) rho'_A == rho_A                              to 1e-10
      (b) (F(rho'))^A == (F(rho))^A, F in {Bln, x^2}   to 1e-9
      (c) Tr_B drho'/dt == Tr_B drho/dt                to 1e-8
    Per-trial generators are spawned from `seed`.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    tau_b = tau_a if tau_b is None else tau_b
    da, db = state.dims
    d = state.rho
    m = d.matrix
    thr = d.threshold
    f = _composite_field(state.h_a, state.h_b, tau_a, tau_b, thr, corrupt_beta_a1)
    base_a = partial_trace(m, state.dims, "A")
    base_perc = [
        _perceive(fn(d.eigvals, d.eigvecs, thr), m, state.dims, 0)
        for fn in (_bln_from_eig, _square_fn)
    ]
    base_rhs = partial_trace(f(m, (d.eigvals, d.eigvecs)), state.dims, "A")
    report = NoSignalingReport(trials, seed)
    children = np.random.SeedSequence(seed).spawn(trials)
    for k, child in enumerate(children):
        u_b = haar_unitary(db, np.random.default_rng(child))
        u = np.kron(np.eye(da), u_b)
        v2 = u @ d.eigvecs
        m2 = from_spectrum(d.eigvals, v2)
        devs = {
            "a": float(np.max(np.abs(partial_trace(m2, state.dims, "A") - base_a))),
            "b": max(
                float(np.max(np.abs(_perceive(fn(d.eigvals, v2, thr), m2, state.dims, 0) - p0)))
                for fn, p0 in zip((_bln_from_eig, _square_fn), base_perc)
            ),
            "c": float(np.max(np.abs(partial_trace(f(m2, (d.eigvals, v2)), state.dims, "A") - base_rhs))),
        }
        report.records.append((k, devs["a"], devs["b"], devs["c"]))
        report.max_state_dev = max(report.max_state_dev, devs["a"])
        report.max_perception_dev = max(report.max_perception_dev, devs["b"])
        report.max_rhs_dev = max(report.max_rhs_dev, devs["c"])
        for check, tol in (("a", NS_TOL_STATE), ("b", NS_TOL_PERCEPTION), ("c", NS_TOL_RHS)):
            if devs[check] > tol:
                report.failures.append((k, check, devs[check]))
                if raise_on_fail:
                    raise SignalDetected(
                        f"check ({check}) failed on trial {k}: deviation {devs[check]:.3e} > {tol:g}",
                        check=check, unitary=u_b, trial=k, deviation=devs[check],
                    )
    return report


# --- closed-form reference cases -------------------------------------------------

def bell_eigenvalues(bx: float, by: float, bz: float) -> np.ndarray:
    return np.array([
        1 - bx - by - bz,
        1 - bx + by + bz,
        1 + bx - by + bz,
        1 + bx + by - bz,
    ]) / 4


def bell_diagonal(bx, by, bz, omega_a=1.0, omega_b=1.0, h_a=(0, 0, 1), h_b=(0, 0, 1)) -> CompositeState:
    """(1/4)[I + sum_i b_i sigma_i (x) sigma_i] with qubit Hamiltonians omega_J h_J.sigma."""
    lam = bell_eigenvalues(bx, by, bz)
    if lam.min() < -1e-12:
        raise NotPositive(f"Bell vector gives eigenvalue {lam.min():.3e}")
    m = np.eye(4, dtype=complex)
    for b, s in zip((bx, by, bz), PAULI):
        m = m + b * np.kron(s, s)
    return CompositeState(DensityMatrix(m / 4), qubit_hamiltonian(omega_a, h_a), qubit_hamiltonian(omega_b, h_b))


def bell_log_product(bx, by, bz, threshold: float = SUPPORT_THRESHOLD) -> float:
    """L = ln of the product of the nonzero eigenvalues."""
    lam = bell_eigenvalues(bx, by, bz)
    lam = lam[lam > threshold]
    return float(np.sum(np.log(lam)))


@dataclass(frozen=True)
class SeparableCase:
    state: CompositeState
    r_bar: np.ndarray
    r_e: float
    a: float
    b: float
    omega_a: float  # Gram determinants Omega^A, Omega^B
    omega_b: float
    beta_a: np.ndarray
    beta_b: np.ndarray
    acomm_a: np.ndarray = field(repr=False)
    acomm_b: np.ndarray = field(repr=False)
    max_mismatch: float = 0.0


def analytic_separable_case(
    r_a,
    mu: float,
    omega_a: float = 1.0,
    omega_b: float = 1.0,
    h_a=(0, 0, 1),
    h_b=(0, 0, 1),
    tau_a: float = 1.0,
    tau_b: float = 1.0,
    tol: float = 1e-8,
) -> SeparableCase:
    """Closed forms for rho_m = mu (rho_A (x) I/2) + (1 - mu) I/4.

    Requires r_A in the plane r_3 = 0 and |mu r_A| < 1. The result is checked
    against the numeric pipeline; a mismatch beyond `tol` raises NumericFailure.
    """
    r_a = np.asarray(r_a, dtype=float)
    if r_a.shape == (2,):
        r_a = np.append(r_a, 0.0)
    if r_a.shape != (3,):
        raise OutOfClass("r_A must be a qubit Bloch vector")
    if abs(r_a[2]) > 1e-12:
        raise OutOfClass("closed form needs r_A3 = 0")
    if np.linalg.norm(r_a) > 1 + 1e-12:
        raise OutOfClass("r_A longer than 1")
    if not 0 <= mu <= 1:
        raise OutOfClass("mu out of [0,1]")
    rb = mu * r_a
    rbn = float(np.linalg.norm(rb))
    if rbn >= 1:
        raise OutOfClass("closed form needs |mu r_A| < 1 (full support)")
    hv_a = np.asarray(h_a, dtype=float) / np.linalg.norm(h_a)
    r_e = float(hv_a @ rb)
    base = np.log((1 - rbn**2) / 16)
    if rbn > 0:
        lr = np.log((1 + rbn) / (1 - rbn))
        big_a = base + rbn * lr
        big_b = base + lr / rbn
    else:
        big_a, big_b = base, base + 2.0
    om_a = omega_a**2 * (1 - r_e**2)
    om_b = omega_b**2
    beta_a = np.array([
        omega_a**2 * (big_a - big_b * r_e**2) / (2 * om_a),
        omega_a * r_e * (big_a - big_b) / (2 * om_a),
    ])
    beta_b = np.array([omega_b**2 * big_a / (2 * om_b), 0.0])
    vec = r_e * hv_a - rb
    acomm_a = (big_a - big_b) / (4 * tau_a * (1 - r_e**2)) * np.tensordot(vec, PAULI, axes=1)
    acomm_b = np.zeros((2, 2), dtype=complex)

    rho_a = 0.5 * (np.eye(2) + np.tensordot(r_a, PAULI, axes=1))
    m = mu * np.kron(rho_a, np.eye(2) / 2) + (1 - mu) * np.eye(4) / 4
    state = CompositeState(DensityMatrix(m), qubit_hamiltonian(omega_a, h_a), qubit_hamiltonian(omega_b, h_b))
    num_a = local_dissipator(state, "A", tau_a)
    num_b = local_dissipator(state, "B", tau_b)
    mism = max(
        abs(num_a.multipliers.omega - om_a),
        abs(num_b.multipliers.omega - om_b),
        float(np.max(np.abs(num_a.multipliers.beta - beta_a))),
        float(np.max(np.abs(num_b.multipliers.beta - beta_b))),
        float(np.max(np.abs(num_a.anticommutator_form - acomm_a))),
        float(np.max(np.abs(num_b.anticommutator_form - acomm_b))),
    )
    if mism > tol:
        raise NumericFailure(f"closed form and numeric pipeline differ by {mism:.3e}")
    return SeparableCase(state, rb, r_e, float(big_a), float(big_b), om_a, om_b, beta_a, beta_b, acomm_a, acomm_b, mism)
