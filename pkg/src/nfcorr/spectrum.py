"""Eigen-analysis of Hermitian correlation matrices.

Eigenvalues come from the real symmetric embedding ``[[Re, -Im], [Im, Re]]``
of the complex matrix.  Each eigenvalue of the complex matrix appears twice in
the embedding; the pairs are checked for consistency and deduplicated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .correlation import CorrelationMatrix
from .errors import ValidationError

PAIRING_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-9
HERMITIAN_ULPS = 8


@dataclass(frozen=True, eq=False)
class EigenSpectrum:
    """Eigenvalues sorted in descending order.

    ``eigenvectors`` (columns, matching ``eigenvalues``) and
    ``reconstruction_error`` are only set when vectors were requested.
    """

    eigenvalues: np.ndarray
    reconstruction_error: float | None = None
    eigenvectors: np.ndarray | None = None

    @property
    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))


def _as_array(matrix) -> np.ndarray:
    """Validated complex array.

    Built matrices must be exactly Hermitian.  Raw arrays may carry rounding
    asymmetry of a few ulps (e.g. ``np.outer(v, v.conj())``); they are
    accepted within ``HERMITIAN_ULPS`` of the largest entry and symmetrized.
    """
    exact = isinstance(matrix, CorrelationMatrix)
    a = matrix.entries if exact else np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    a = a.astype(complex)
    skew = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    limit = 0.0 if exact else HERMITIAN_ULPS * np.finfo(float).eps * float(np.max(np.abs(a)))
    if skew > limit:
        raise ValidationError(f"matrix is not Hermitian (max |A - A^H| = {skew:.3g})")
    return a if skew == 0 else 0.5 * (a + a.conj().T)


def real_embedding(a: np.ndarray) -> np.ndarray:
    """``[[Re A, -Im A], [Im A, Re A]]``, symmetric when ``A`` is Hermitian."""
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def _complex_vectors(vecs2: np.ndarray, n: int) -> np.ndarray:
    """n orthonormal complex eigenvectors from the 2n real ones.

    A real eigenvector [u; v] maps to the complex eigenvector u + jv, and its
    pair partner maps to a unit multiple of it.  Images belonging to distinct
    eigenvalues are orthogonal, so a column-pivoted QR of all 2n images gives
    an orthonormal basis whose columns each stay inside one eigenspace, also
    for degenerate eigenvalues.
    """
    w = vecs2[:n] + 1j * vecs2[n:]
    q, r, _ = scipy.linalg.qr(w, mode="economic", pivoting=True)
    if abs(r[n - 1, n - 1]) < 1e-8:
        raise ValidationError("could not extract a full set of complex eigenvectors")
    return q


def hermitian_eigendecompose(matrix, eigenvectors: bool = False) -> EigenSpectrum:
    """Eigenvalues (and optionally eigenvectors) of a Hermitian matrix."""
    a = _as_array(matrix)
    n = a.shape[0]
    emb = real_embedding(a)
    if eigenvectors:
        vals2, vecs2 = np.linalg.eigh(emb)
        order = np.argsort(vals2)[::-1]
        vals2, vecs2 = vals2[order], vecs2[:, order]
    else:
        vals2 = np.sort(np.linalg.eigvalsh(emb))[::-1]
    first, second = vals2[0::2], vals2[1::2]
    scale = max(float(np.max(np.abs(vals2))), np.finfo(float).tiny)
    mismatch = float(np.max(np.abs(first - second)))
    if mismatch > PAIRING_TOL * scale:
        raise ValidationError(f"embedding eigenvalues do not pair up (mismatch {mismatch:.3g})")
    vals = 0.5 * (first + second)
    if not eigenvectors:
        return EigenSpectrum(vals)
    vecs = _complex_vectors(vecs2, n)
    # Rayleigh quotients assign values to the chosen vectors
    vals_v = np.real(np.einsum("ij,ij->j", vecs.conj(), a @ vecs))
    order = np.argsort(vals_v)[::-1]
    vals_v, vecs = vals_v[order], vecs[:, order]
    recon = (vecs * vals_v) @ vecs.conj().T
    err = float(np.linalg.norm(recon - a) / max(np.linalg.norm(a), np.finfo(float).tiny))
    if err > RECONSTRUCTION_TOL:
        raise ValidationError(f"eigen reconstruction error {err:.3g} exceeds {RECONSTRUCTION_TOL:g}")
    return EigenSpectrum(vals, err, vecs)


def significant_count(spectrum: EigenSpectrum, beta0: float, threshold_fraction: float = 0.01) -> int:
    """Number of eigenvalues with ``lambda / beta0 >= threshold_fraction * trace / beta0``."""
    if not 0 < threshold_fraction < 1:
        raise ValidationError("threshold_fraction must lie in (0, 1)")
    normalized = spectrum.eigenvalues / beta0
    return int(np.count_nonzero(normalized >= threshold_fraction * spectrum.trace / beta0))


def normalized_trace(matrix: CorrelationMatrix) -> float:
    return matrix.trace() / matrix.beta0


def stationarity_deviation(matrix: CorrelationMatrix) -> float:
    """Largest spread of ``|R(n, n+k)|`` along any diagonal ``k``, over beta0.

    Zero for a Toeplitz matrix.
    """
    mag = np.abs(matrix.entries)
    n = mag.shape[0]
    worst = 0.0
    for k in range(-(n - 1), n):
        diag = np.diagonal(mag, k)
        worst = max(worst, float(diag.max() - diag.min()))
    return worst / matrix.beta0


def write_eigenvalues_csv(spectrum: EigenSpectrum, beta0: float, path, comment: str | None = None) -> None:
    """Write rows ``rank,eigenvalue_over_beta0`` (rank starts at 1)."""
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("rank,eigenvalue_over_beta0\n")
        for rank, lam in enumerate(spectrum.eigenvalues / beta0, start=1):
            fh.write(f"{rank},{float(lam)!r}\n")
