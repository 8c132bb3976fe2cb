import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sea_dyn.errors import DimensionMismatch, NotHermitian, NotPositive
from sea_dyn.linalg import (
    DensityMatrix,
    acomm,
    comm,
    haar_unitary,
    matrix_exp,
    matrix_function,
    matrix_log_supported,
    partial_trace,
    random_density,
    random_hermitian,
    spectral_decompose,
    support_projector,
    unitary_exp,
)
from sea_dyn.bloch import make_ggm

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


def test_spectral_decompose_diagonal():
    w, v = spectral_decompose(np.diag([1.0, 0.0]))
    assert np.allclose(w, [1, 0])
    assert np.allclose(v, np.eye(2))


def test_spectral_decompose_sigma_x():
    w, v = spectral_decompose(0.5 * (np.eye(2) + SX))
    assert np.allclose(w, [1, 0])
    assert np.allclose(v[:, 0], np.array([1, 1]) / np.sqrt(2))
    assert np.allclose(np.abs(v[:, 1]), np.array([1, 1]) / np.sqrt(2))
    assert abs(v[0, 1] + v[1, 1]) < 1e-12


def test_spectral_decompose_reconstructs(rng):
    h = random_hermitian(4, rng)
    w, v = spectral_decompose(h)
    assert np.all(np.diff(w) <= 0)
    assert np.allclose(v.conj().T @ v, np.eye(4), atol=1e-12)
    assert np.allclose((v * w) @ v.conj().T, h, atol=1e-12)


def test_spectral_decompose_phase_convention(rng):
    _, v = spectral_decompose(random_hermitian(5, rng))
    lead = v[0]
    assert np.allclose(lead.imag, 0, atol=1e-14)
    assert np.all(lead.real > 0)


def test_not_hermitian():
    with pytest.raises(NotHermitian):
        spectral_decompose(np.array([[0, 1], [0, 0]]))
    with pytest.raises(DimensionMismatch):
        spectral_decompose(np.ones((2, 3)))


def test_density_matrix_validation():
    with pytest.raises(NotPositive):
        DensityMatrix(np.diag([1.1, -0.1]))
    d = DensityMatrix(np.diag([1 + 5e-11, -5e-11]))
    assert d.eigvals.min() == 0.0
    assert abs(np.trace(d.matrix) - 1) < 1e-15


def test_log_examples():
    assert np.allclose(matrix_log_supported(np.eye(2) / 2), np.log(0.5) * np.eye(2))
    assert np.allclose(matrix_log_supported(np.diag([1.0, 0.0])), 0)
    assert np.allclose(matrix_log_supported(np.diag([0.75, 0.25])), np.diag(np.log([0.75, 0.25])))


def test_exp_examples():
    assert np.allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(unitary_exp(SZ, np.pi), -np.eye(2), atol=1e-14)


def test_support_projector(rng):
    rho = random_density(5, rng, rank=2)
    b = support_projector(rho)
    assert np.allclose(b @ b, b, atol=1e-12)
    assert np.allclose(b @ rho, rho @ b, atol=1e-10)
    assert abs(np.trace(b).real - 2) < 1e-12


def test_partial_trace_product(rng):
    ra, rb = random_density(2, rng), random_density(3, rng)
    m = np.kron(ra, rb)
    assert np.allclose(partial_trace(m, (2, 3), "A"), ra)
    assert np.allclose(partial_trace(m, (2, 3), "B"), rb)


def test_partial_trace_bell():
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    m = np.outer(phi, phi)
    assert np.allclose(partial_trace(m, (2, 2), "A"), np.eye(2) / 2)
    assert np.allclose(partial_trace(m, (2, 2), "B"), np.eye(2) / 2)


def test_partial_trace_dimension_check():
    with pytest.raises(DimensionMismatch):
        partial_trace(np.eye(5), (2, 2))


def test_comm_acomm_pauli():
    assert np.allclose(comm(SX, SY), 2j * SZ)
    assert np.allclose(acomm(SX, SY), 0)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_ggm_anticommutators(n):
    b = make_ggm(n)
    for i in range(len(b)):
        for j in range(len(b)):
            expect = (4 / n) * (i == j) * np.eye(n) + 2 * np.tensordot(b.sym_constants[i, j], b.generators, axes=1)
            assert np.allclose(acomm(b[i], b[j]), expect, atol=1e-12)


def test_haar_unitary(rng):
    u = haar_unitary(4, rng)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def _hermitian(n, seed):
    return random_hermitian(n, np.random.default_rng(seed))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1), scale=st.floats(0.01, 3.0))
def test_log_inverts_exp(n, seed, scale):
    h = scale * _hermitian(n, seed)
    h -= np.trace(h) / n * np.eye(n)
    e = matrix_exp(h)
    # log of the normalized exponential is h shifted by -ln Z
    shift = np.log(np.trace(e).real)
    assert np.allclose(matrix_log_supported(e / np.trace(e).real) + shift * np.eye(n), h, atol=1e-8)
    assert np.allclose(matrix_function(matrix_exp(h), np.log), h, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(da=st.integers(2, 4), db=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_partial_trace_is_adjoint_of_tensoring(da, db, seed):
    r = np.random.default_rng(seed)
    rho = random_density(da * db, r)
    xa = random_hermitian(da, r)
    xb = random_hermitian(db, r)
    lhs = np.trace(np.kron(xa, np.eye(db)) @ rho)
    assert abs(lhs - np.trace(xa @ partial_trace(rho, (da, db), "A"))) < 1e-10
    lhs = np.trace(np.kron(np.eye(da), xb) @ rho)
    assert abs(lhs - np.trace(xb @ partial_trace(rho, (da, db), "B"))) < 1e-10


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 2**32 - 1), rank=st.integers(1, 8))
def test_density_invariants(n, seed, rank):
    d = DensityMatrix(random_density(n, np.random.default_rng(seed), rank=min(rank, n)))
    m = d.matrix
    assert np.allclose(m, m.conj().T)
    assert abs(np.trace(m).real - 1) < 1e-10
    assert d.eigvals.min() >= -1e-10 and d.eigvals.max() <= 1 + 1e-10
    assert d.rank == min(rank, n)
