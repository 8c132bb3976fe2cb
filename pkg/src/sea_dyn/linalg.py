"""Hermitian-matrix numerics: spectral data, supported matrix functions, partial traces."""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NotHermitian, NotNormalized, NotPositive

HERMITIAN_TOL = 1e-9
SUPPORT_THRESHOLD = 1e-12
CLAMP_WINDOW = 1e-10
TRACE_TOL = 1e-8


def _square(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    return a


def hermitian_part(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return (m + m^H)/2 after checking that m is Hermitian within `tol`."""
    a = _square(m)
    dev = np.max(np.abs(a - a.conj().T)) if a.size else 0.0
    if dev > tol:
        raise NotHermitian(f"matrix deviates from Hermitian by {dev:.3e}")
    return 0.5 * (a + a.conj().T)


def _fix_phases(v: np.ndarray) -> np.ndarray:
    # make the first non-negligible component of every eigenvector real positive
    idx = np.argmax(np.abs(v) > 1e-12, axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    return v * (np.abs(lead) / lead)[None, :]


def spectral_decompose(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues in descending order and a matching unitary eigenvector matrix.

    Eigenvector phases are fixed so that the first non-negligible component of
    each column is real and positive, which makes projector labels reproducible.
    """
    h = hermitian_part(m)
    w, v = np.linalg.eigh(h)
    w = w[::-1].copy()
    v = _fix_phases(v[:, ::-1])
    return w, v


def from_spectrum(w, v) -> np.ndarray:
    return (v * w) @ v.conj().T


class DensityMatrix:
    """Unit-trace positive semidefinite Hermitian matrix with cached spectrum.

    Eigenvalues in [-1e-10, 0) are clamped to zero (and the trace renormalized);
    anything more negative raises NotPositive.
    """

    __slots__ = ("_m", "_w", "_v", "threshold")

    def __init__(self, matrix, threshold: float = SUPPORT_THRESHOLD):
        h = hermitian_part(matrix)
        w, v = spectral_decompose(h)
        tr = w.sum()
        if abs(tr - 1.0) > TRACE_TOL:
            raise NotNormalized(f"trace is {tr:.12g}, expected 1")
        if w[-1] < -CLAMP_WINDOW:
            raise NotPositive(f"eigenvalue {w[-1]:.3e} below clamp window")
        if w[-1] < 0 or tr != 1.0:
            w = np.where(w < 0, 0.0, w)
            w = w / w.sum()
            h = from_spectrum(w, v)
        self._m, self._w, self._v = h, w, v
        self.threshold = threshold
        for a in (self._m, self._w, self._v):
            a.setflags(write=False)

    @classmethod
    def from_eig(cls, w, v, threshold: float = SUPPORT_THRESHOLD) -> "DensityMatrix":
        """Build from a trusted spectral pair without re-diagonalizing."""
        obj = cls.__new__(cls)
        w = np.asarray(w, dtype=float)
        order = np.argsort(-w, kind="stable")
        w, v = w[order], _fix_phases(np.asarray(v, dtype=complex)[:, order])
        obj._w, obj._v = w, v
        obj._m = from_spectrum(w, v)
        obj.threshold = threshold
        for a in (obj._m, obj._w, obj._v):
            a.setflags(write=False)
        return obj

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def eigvals(self) -> np.ndarray:
        return self._w

    @property
    def eigvecs(self) -> np.ndarray:
        return self._v

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self._w > self.threshold

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.support))

    def support_projector(self) -> np.ndarray:
        return from_spectrum(self.support.astype(float), self._v)

    def log(self) -> np.ndarray:
        """ln(rho) on the support, zero on the null space."""
        return from_spectrum(self.log_eigvals(), self._v)

    def log_eigvals(self) -> np.ndarray:
        s = self.support
        out = np.zeros_like(self._w)
        out[s] = np.log(self._w[s])
        return out

    def purity(self) -> float:
        return float(np.sum(self._w**2))

    def __array__(self, dtype=None, copy=None):
        return self._m if dtype is None else self._m.astype(dtype)

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, eigvals={np.array2string(self._w, precision=4)})"


def as_density(rho, threshold: float = SUPPORT_THRESHOLD) -> DensityMatrix:
    if isinstance(rho, DensityMatrix):
        return rho
    return DensityMatrix(rho, threshold)


def support_projector(rho, threshold: float = SUPPORT_THRESHOLD) -> np.ndarray:
    return as_density(rho, threshold).support_projector()


def matrix_log_supported(rho, threshold: float | None = None) -> np.ndarray:
    """Bln(rho): natural log on eigenvalues above threshold, 0 on the rest."""
    d = as_density(rho)
    if threshold is not None and threshold != d.threshold:
        d = DensityMatrix.from_eig(d.eigvals, d.eigvecs, threshold)
    return d.log()


def matrix_function(m, f) -> np.ndarray:
    """Apply scalar function f eigenvalue-wise to a Hermitian matrix."""
    w, v = spectral_decompose(m)
    return from_spectrum(np.asarray(f(w)), v)


def matrix_exp(m) -> np.ndarray:
    return matrix_function(m, np.exp)


def unitary_exp(h, t: float) -> np.ndarray:
    """exp(-i h t) for Hermitian h."""
    w, v = spectral_decompose(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def comm(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a @ b - b @ a


def acomm(a, b) -> np.ndarray:
    a, b = _square(a), _square(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a @ b + b @ a


def _keep_index(keep) -> int:
    if keep in ("A", "a", 0):
        return 0
    if keep in ("B", "b", 1):
        return 1
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def partial_trace(m, dims: tuple[int, int], keep="A") -> np.ndarray:
    """Trace out one factor of a bipartite operator on C^dA (x) C^dB."""
    a = _square(m)
    da, db = dims
    if a.shape[0] != da * db:
        raise DimensionMismatch(f"matrix of size {a.shape[0]} does not factor as {da}x{db}")
    t = a.reshape(da, db, da, db)
    if _keep_index(keep) == 0:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    k = n if rank is None else rank
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (g + g.conj().T)
