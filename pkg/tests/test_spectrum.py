import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nfcorr.correlation import CorrelationMatrix, nf_correlation_general, nf_one_ring_correlation
from nfcorr.errors import ValidationError
from nfcorr.geometry import ArrayGeometry, PolarPoint
from nfcorr.scattering import PointSetSpectrum
from nfcorr.spectrum import (EigenSpectrum, hermitian_eigendecompose, normalized_trace,
                             real_embedding, significant_count, stationarity_deviation,
                             write_eigenvalues_csv)


def random_hermitian(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def charpoly_roots(a):
    """Eigenvalues as roots of det(tI - A), coefficients by Faddeev-LeVerrier in 50 digits."""
    with mpmath.workdps(50):
        n = a.shape[0]
        A = mpmath.matrix([[mpmath.mpc(complex(v)) for v in row] for row in a])
        M = mpmath.zeros(n)
        coeffs = [mpmath.mpf(1)]
        for k in range(1, n + 1):
            M = A * M + coeffs[-1] * mpmath.eye(n)
            AM = A * M
            coeffs.append(-sum(AM[i, i] for i in range(n)) / k)
        roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
        return np.sort([float(mpmath.re(r)) for r in roots])[::-1]


def as_matrix(entries, beta0=1.0):
    n = entries.shape[0]
    return CorrelationMatrix(entries, beta0, "test", ArrayGeometry(n, 0.5, 1.0))


def test_scaled_identity():
    spec = hermitian_eigendecompose(3.0 * np.eye(6, dtype=complex))
    assert spec.eigenvalues == pytest.approx(np.full(6, 3.0), rel=1e-14)


def test_rank_one():
    rng = np.random.default_rng(1)
    v = rng.normal(size=20) + 1j * rng.normal(size=20)
    spec = hermitian_eigendecompose(np.outer(v, v.conj()), eigenvectors=True)
    norm2 = float(np.vdot(v, v).real)
    assert spec.eigenvalues[0] == pytest.approx(norm2, rel=1e-13)
    assert np.all(np.abs(spec.eigenvalues[1:]) <= 1e-10 * norm2)
    assert abs(np.vdot(spec.eigenvectors[:, 0], v)) == pytest.approx(math.sqrt(norm2), rel=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_random_8x8_against_characteristic_polynomial(seed):
    a = random_hermitian(8, seed)
    got = hermitian_eigendecompose(a).eigenvalues
    assert got == pytest.approx(charpoly_roots(a), abs=1e-8)


def test_embedding_pairs_and_reconstruction():
    a = random_hermitian(40, 9)
    emb = np.sort(np.linalg.eigvalsh(real_embedding(a)))[::-1]
    assert np.max(np.abs(emb[0::2] - emb[1::2])) <= 1e-10 * np.max(np.abs(emb))
    spec = hermitian_eigendecompose(a, eigenvectors=True)
    assert spec.reconstruction_error <= 1e-9
    v = spec.eigenvectors
    assert np.allclose(v.conj().T @ v, np.eye(40), atol=1e-12)
    assert np.all(np.diff(spec.eigenvalues) <= 0)


def test_degenerate_spectrum_vectors():
    rng = np.random.default_rng(4)
    q, _ = np.linalg.qr(rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    lam = np.array([5.0] * 4 + [2.0] * 4 + [0.0] * 4)
    a = (q * lam) @ q.conj().T
    a = (a + a.conj().T) / 2
    spec = hermitian_eigendecompose(a, eigenvectors=True)
    assert spec.eigenvalues == pytest.approx(lam, abs=1e-12)
    assert spec.reconstruction_error <= 1e-9


def test_non_hermitian_rejected():
    a = random_hermitian(5, 2)
    a[0, 1] += 1e-9
    with pytest.raises(ValidationError):
        hermitian_eigendecompose(a)
    with pytest.raises(ValidationError):
        hermitian_eigendecompose(np.ones((2, 3)))


def test_sum_equals_trace(small_array, near_ring):
    m = nf_one_ring_correlation(near_ring, small_array)
    spec = hermitian_eigendecompose(m)
    assert spec.trace == pytest.approx(m.trace(), rel=1e-9)
    assert spec.eigenvalues[-1] >= -1e-8 * m.trace()


def test_significant_count_threshold_arithmetic():
    assert significant_count(hermitian_eigendecompose(np.eye(50, dtype=complex)), 1.0) == 50
    # at N = 512 each eigenvalue 1 is below 1% of the trace 512
    assert significant_count(EigenSpectrum(np.ones(512)), 1.0) == 0
    v = np.arange(1, 9) * (1 + 1j)
    assert significant_count(hermitian_eigendecompose(np.outer(v, v.conj())), 2.0) == 1
    with pytest.raises(ValidationError):
        significant_count(EigenSpectrum(np.ones(3)), 1.0, threshold_fraction=1.0)


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-6, 1e6), seed=st.integers(0, 1000))
def test_significant_count_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.exponential(size=64) ** 3)[::-1]
    base = significant_count(EigenSpectrum(lam), 1.0)
    assert significant_count(EigenSpectrum(lam * scale), scale) == base


def test_normalized_trace_point_set(small_array):
    p = PolarPoint(3.0, 0.8)
    m = nf_correlation_general(PointSetSpectrum.single(p), small_array, beta0=2.0)
    x, y = p.cartesian
    rn2 = x * x + (y - small_array.indices * small_array.spacing) ** 2
    assert normalized_trace(m) == pytest.approx(np.sum(9.0 / rn2), rel=1e-13)


def test_stationarity_deviation():
    assert stationarity_deviation(as_matrix(2.0 * np.eye(7, dtype=complex), 2.0)) == 0.0
    t = np.array([[1.0, 0.5], [0.5, 1.0]], dtype=complex)
    assert stationarity_deviation(as_matrix(t)) == 0.0
    nt = np.array([[1.0, 0.5], [0.5, 2.0]], dtype=complex)
    assert stationarity_deviation(as_matrix(nt)) == 1.0


def test_eigenvalue_csv(tmp_path):
    path = tmp_path / "eig.csv"
    write_eigenvalues_csv(EigenSpectrum(np.array([4.0, 1.0, 0.5])), 2.0, path, comment="nfcorr test")
    lines = path.read_text().splitlines()
    assert lines == ["# nfcorr test", "rank,eigenvalue_over_beta0", "1,2.0", "2,0.5", "3,0.25"]
