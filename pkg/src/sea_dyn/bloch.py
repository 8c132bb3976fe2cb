"""Generalized Gell-Mann Bloch parametrization and analytic spectra for N = 2, 3, 4."""
from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ComplexRoots, DegeneracyMismatch, DimensionMismatch, OutOfClass
from .linalg import DensityMatrix, as_density, hermitian_part, spectral_decompose

CLASS_TOL = 1e-8


@dataclass(frozen=True)
class GgmBasis:
    """Ordered traceless generators with Tr(G_i G_j) = 2 delta_ij.

    Order: diagonal generators, then symmetric pairs (i<j lexicographic), then
    antisymmetric pairs in the same order.  N=2 uses the Pauli order x, y, z.
    """

    dim: int
    generators: np.ndarray = field(repr=False)  # shape (N^2-1, N, N)
    sym_constants: np.ndarray = field(repr=False)
    antisym_constants: np.ndarray = field(repr=False)

    def __len__(self):
        return self.generators.shape[0]

    def __getitem__(self, i):
        return self.generators[i]

    @property
    def scale(self) -> float:
        """sqrt(N(N-1)/2), the Bloch-vector prefactor."""
        n = self.dim
        return np.sqrt(n * (n - 1) / 2.0)

    def combine(self, coeffs) -> np.ndarray:
        """sum_i coeffs[i] * Gamma_i"""
        return np.tensordot(np.asarray(coeffs, dtype=float), self.generators, axes=1)

    def components(self, x) -> np.ndarray:
        """Coefficients c_i with traceless part of x equal to sum_i c_i Gamma_i."""
        x = np.asarray(x, dtype=complex)
        return 0.5 * np.einsum("kij,ji->k", self.generators, x).real


def _ggm_generators(n: int) -> np.ndarray:
    def unit(i, j):
        e = np.zeros((n, n), dtype=complex)
        e[i, j] = 1.0
        return e

    gens = []
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        gens.append(np.diag(d).astype(complex) * np.sqrt(2.0 / (l * (l + 1))))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    gens += [unit(j, i) + unit(i, j) for i, j in pairs]
    gens += [1j * (unit(j, i) - unit(i, j)) for i, j in pairs]
    if n == 2:
        # Pauli ordering (sigma_x, sigma_y, sigma_z)
        gens = [gens[1], gens[2], gens[0]]
    return np.array(gens)


@lru_cache(maxsize=16)
def make_ggm(n: int) -> GgmBasis:
    if n < 2:
        raise ValueError("GGM basis needs N >= 2")
    g = _ggm_generators(n)
    # Tr(G_i G_j G_k) = 2 (g_ijk + i f_ijk)
    z = np.einsum("iab,jbc,kca->ijk", g, g, g) / 2.0
    sym = np.ascontiguousarray(z.real)
    anti = np.ascontiguousarray(z.imag)
    for a in (g, sym, anti):
        a.setflags(write=False)
    return GgmBasis(n, g, sym, anti)


@dataclass(frozen=True)
class BlochState:
    dim: int
    r_vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.r_vec, dtype=float)
        if v.shape != (self.dim**2 - 1,):
            raise DimensionMismatch(f"Bloch vector for N={self.dim} needs {self.dim**2 - 1} components")
        object.__setattr__(self, "r_vec", v)

    @property
    def r(self) -> float:
        return float(np.linalg.norm(self.r_vec))


def bloch_matrix(r_vec, basis: GgmBasis | None = None) -> np.ndarray:
    """(1/N)(I + sqrt(N(N-1)/2) r.Gamma) without positivity checks."""
    r_vec = np.asarray(r_vec, dtype=float)
    if basis is None:
        n = int(round(np.sqrt(r_vec.size + 1)))
        basis = make_ggm(n)
    if r_vec.size != len(basis):
        raise DimensionMismatch("Bloch vector length does not match the basis")
    n = basis.dim
    return (np.eye(n) + basis.scale * basis.combine(r_vec)) / n


def bloch_to_density(b, basis: GgmBasis | None = None) -> DensityMatrix:
    """Density matrix for a Bloch vector; raises NotPositive outside the state space."""
    r_vec = b.r_vec if isinstance(b, BlochState) else b
    return DensityMatrix(bloch_matrix(r_vec, basis))


def density_to_bloch(rho, basis: GgmBasis | None = None) -> BlochState:
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else rho, dtype=complex)
    n = m.shape[0]
    basis = basis or make_ggm(n)
    if basis.dim != n:
        raise DimensionMismatch("basis dimension does not match rho")
    return BlochState(n, basis.components(m) * n / basis.scale)


@dataclass(frozen=True)
class CharPolyCoeffs:
    """a_i with det(lambda I - rho) = sum_i (-1)^i a_i lambda^(N-i)."""

    a: np.ndarray

    def __getitem__(self, i):
        return float(self.a[i])

    def nonnegative(self, tol: float = 1e-10) -> bool:
        return bool(np.all(self.a >= -tol))


def power_traces(m, kmax: int) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    out = np.empty(kmax)
    p = np.eye(m.shape[0], dtype=complex)
    for k in range(kmax):
        p = p @ m
        out[k] = np.trace(p).real
    return out


def coeffs_from_traces(c) -> np.ndarray:
    """Newton's identities: k a_k = sum_{i=1..k} (-1)^(i-1) C_i a_(k-i)."""
    n = len(c)
    a = np.zeros(n + 1)
    a[0] = 1.0
    for k in range(1, n + 1):
        s = 0.0
        for i in range(1, k + 1):
            s += (-1) ** (i - 1) * c[i - 1] * a[k - i]
        a[k] = s / k
    return a


def char_poly_coeffs(rho) -> CharPolyCoeffs:
    """Characteristic-polynomial invariants from the trace powers Tr(rho^k)."""
    m = np.asarray(rho.matrix if isinstance(rho, DensityMatrix) else hermitian_part(rho))
    return CharPolyCoeffs(coeffs_from_traces(power_traces(m, m.shape[0])))


def positive_by_coeffs(m, tol: float = 1e-10) -> bool:
    """Positive semidefiniteness of a unit-trace Hermitian matrix via a_i >= 0."""
    return char_poly_coeffs(m).nonnegative(tol)


def _clusters(w: np.ndarray, tol: float) -> list[list[int]]:
    groups = [[0]]
    for i in range(1, len(w)):
        if abs(w[i] - w[groups[-1][0]]) <= tol * max(1.0, abs(w[i])):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def qutrit_roots(r: float, rho=None) -> tuple[float, float, float]:
    """Spectrum ((1+2r)/3, (1-r)/3, (1-r)/3) of the degenerate qutrit family.

    When `rho` is given its spectrum is checked against the pattern.
    """
    if not 0.0 <= r <= 1.0:
        raise OutOfClass(f"r={r} outside [0, 1]")
    lam = ((1 + 2 * r) / 3, (1 - r) / 3, (1 - r) / 3)
    if rho is not None:
        w = as_density(rho).eigvals
        if w.size != 3 or np.max(np.abs(w - np.array(lam))) > CLASS_TOL:
            raise OutOfClass(f"spectrum {w} does not follow the (1+2r, 1-r, 1-r)/3 pattern")
    return lam


@dataclass(frozen=True)
class QuarticRootParams:
    r: float
    alpha: tuple  # alpha_1 .. alpha_7
    positivity: dict

    def __getitem__(self, k):
        return self.alpha[k - 1]


def _real(z: complex, tol: float, what: str) -> float:
    if abs(z.imag) > tol * max(1.0, abs(z.real)):
        raise ComplexRoots(f"{what} has imaginary part {z.imag:.3e}")
    return z.real


def _cbrt(z: complex) -> complex:
    if abs(z.imag) <= 1e-14 * max(1.0, abs(z)):
        return complex(np.cbrt(z.real))
    return z ** (1.0 / 3.0)


def _sqrt_snap(x: complex, snap: float) -> complex:
    if abs(x) <= snap:
        return 0j
    return cmath.sqrt(x)


def _quartic_core(r: float, q: float, s: float, a3: float, a4: float, noise: float, rel: float = 1e-12):
    """Roots of x^4 - 6 r^2 x^2 + q x + s (x = 4 lambda - 1) in the alpha parametrization.

    `noise` and `rel` are the absolute and relative rounding levels of the
    inputs; quantities that are zero up to that level are snapped to zero so that degenerate spectra (where
    the root formulas lose half or two thirds of the digits) stay accurate.
    """
    r2 = r * r
    a7 = r2 * r2 + s / 3
    a6 = q * q / 16 + r2 * s - r2**3
    a4_ = 3 * a7
    tiny = 1e-300
    if abs(a7) <= max(rel * r2 * r2, noise) and abs(a6) <= max(rel * r2**3, noise):
        # triply degenerate resolvent
        a5, a3_ = 0j, 0j
    else:
        # a doubly degenerate resolvent (two doubly degenerate levels) has a
        # discriminant that is zero up to rounding
        disc = a6 * a6 - a7**3
        root = _sqrt_snap(disc, max(rel * max(a6 * a6, abs(a7) ** 3), noise * noise, tiny))
        a5 = a6 + root
        if abs(a5) <= 1e-14 * max(abs(a6), tiny):
            a5 = a6 - root
        c = _cbrt(a5)
        a3_ = c + a4_ / (3 * c) if c != 0 else 0j
    a1 = cmath.sqrt(a3_ / 2 + r2)
    rad_snap = max(rel * r2, noise, tiny)
    if abs(a1) > 1e-9 * r:
        a2 = -q / (4 * a1)
    else:
        # pairs symmetric about 1/4: biquadratic
        a1 = 0j
        a2 = _sqrt_snap(9 * r2 * r2 - s, rad_snap)
    q1 = _sqrt_snap(3 * r2 - a1 * a1 - a2, rad_snap)
    q2 = _sqrt_snap(3 * r2 - a1 * a1 + a2, rad_snap)
    lam_c = np.array([1 - a1 - q1, 1 + a1 + q2, 1 + a1 - q2, 1 - a1 + q1]) / 4
    lam = np.array([_real(complex(z), 1e-8, f"lambda_{k + 1}") for k, z in enumerate(lam_c)])
    alphas = tuple(complex(z) for z in (a1, a2, a3_, a4_, a5, a6, a7))
    alphas = tuple(z.real if abs(z.imag) <= 1e-10 * max(1.0, abs(z)) else z for z in alphas)
    positivity = {"a2": 3 * (1 - r2) >= 0, "a3": a3 >= -1e-12, "a4": a4 >= -1e-12}
    return lam, QuarticRootParams(float(r), alphas, positivity)


def quartic_roots(r: float, a3: float, a4: float) -> tuple[np.ndarray, QuarticRootParams]:
    """Analytic spectrum of a four-level density matrix from (r, a_3, a_4).

    Complex intermediates with principal branches (real cube root for a real
    radicand). Raises ComplexRoots if the resulting eigenvalues are not real.
    """
    q = -4 * (16 * a3 + 3 * r * r - 1)
    s = 256 * a4 - 64 * a3 - 6 * r * r + 3
    return _quartic_core(r, q, s, a3, a4, noise=1e-14)


def quartic_roots_of(rho) -> tuple[np.ndarray, QuarticRootParams]:
    """quartic_roots for a 4x4 density matrix.

    The invariants are taken from moments of 4 rho - I rather than from a_3 and
    a_4 directly, which avoids the cancellation those suffer near rho = I/4.
    """
    d = as_density(rho)
    if d.dim != 4:
        raise DimensionMismatch("quartic roots need a 4x4 density matrix")
    x = 4 * d.matrix - np.eye(4)
    m2, m3, m4 = power_traces(x, 4)[1:]
    r2 = m2 / 12
    q = -m3 / 3
    s = (m2 * m2 / 2 - m4) / 4
    a3 = (1 - 3 * r2 - q / 4) / 16
    a4 = (s + 64 * a3 + 6 * r2 - 3) / 256
    r = np.sqrt(max(r2, 0.0))
    # entries of 4 rho - I carry absolute rounding ~1e-16, i.e. relative ~1e-16/r
    rel = max(1e-12, 1e-14 / max(r, 1e-300))
    return _quartic_core(r, q, s, a3, a4, noise=1e-300, rel=rel)


@dataclass(frozen=True)
class SplitOperator:
    """Operator written as c0 I + sum_i c_i Gamma_i."""

    identity_coeff: float
    gamma_coeffs: np.ndarray
    basis: GgmBasis = field(repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.identity_coeff * np.eye(self.basis.dim) + self.basis.combine(self.gamma_coeffs)


def _split(rho_dm: DensityMatrix, c0: float, coef_traceless_rho: float) -> SplitOperator:
    # traceless part of rho is (scale/N) r.Gamma
    n = rho_dm.dim
    basis = make_ggm(n)
    r_vec = density_to_bloch(rho_dm, basis).r_vec
    return SplitOperator(float(c0), coef_traceless_rho * basis.scale / n * r_vec, basis)


def fn_of_rho_degenerate(rho, f: Callable, cls: str) -> SplitOperator:
    """F(rho) for spectra with two distinct eigenvalue levels, without eigenvectors.

    cls: "N2" (qubit), "N3" (qutrit pattern (l1, l2, l2)) or "N4" (four-level,
    two distinct eigenvalues; covers both degenerate quartic classes).
    """
    d = as_density(rho)
    w = d.eigvals
    n = d.dim
    expected = {"N2": 2, "N3": 3, "N4": 4}
    if cls not in expected:
        raise ValueError(f"unknown class {cls!r}")
    if n != expected[cls]:
        raise DimensionMismatch(f"class {cls} needs N={expected[cls]}, got {n}")
    groups = _clusters(w, CLASS_TOL)
    if len(groups) == 1:
        fv = float(f(np.array([w.mean()]))[0])
        return SplitOperator(fv, np.zeros(n * n - 1), make_ggm(n))
    if len(groups) != 2:
        raise DegeneracyMismatch(f"spectrum {w} has {len(groups)} distinct levels, expected 2")
    if cls == "N3" and len(groups[0]) != 1:
        raise DegeneracyMismatch(f"spectrum {w} is not of the form (l1, l2, l2) with l1 > l2")
    l1, l2 = w[groups[0]].mean(), w[groups[1]].mean()
    f1, f2 = (float(v) for v in f(np.array([l1, l2])))
    k1, k2 = len(groups[0]), len(groups[1])
    # F = F2 I + (F1 - F2) P1,  P1 = (rho - l2 I)/(l1 - l2)
    slope = (f1 - f2) / (l1 - l2)
    c0 = (k1 * f1 + k2 * f2) / n
    return _split(d, c0, slope)


def fn_of_rho_conjecture(rho, f: Callable, relation: Callable, c: float) -> np.ndarray:
    """Experimental general-N form: mean of F(lambda_i) times I plus a traceless part
    built from relation(F(lambda)) / (c r).  Only valid for families where
    relation(lambda) = c r; not guaranteed in general.
    """
    d = as_density(rho)
    n = d.dim
    basis = make_ggm(n)
    bs = density_to_bloch(d, basis)
    fl = np.asarray(f(d.eigvals), dtype=float)
    out = fl.mean() * np.eye(n, dtype=complex)
    if bs.r > 0:
        out = out + basis.scale / (n * c * bs.r) * relation(fl) * basis.combine(bs.r_vec)
    return out
