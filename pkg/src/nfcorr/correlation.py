r"""Near-field and far-field spatial correlation matrices.

Every integral builder evaluates a 2pi-periodic integral with the uniform
trapezoid rule and accumulates the matrix as a weighted sum of rank-one terms

.. math::  R = \beta_0 \sum_k w_k v_k v_k^H,

where ``v_k`` is the per-element response to the scatterer at node ``k``.
The node count is doubled (reusing the previous nodes) until no entry moves
by more than ``refinement_tolerance * beta0``.  Nodes are processed in fixed
chunks and the chunk results are combined by pairwise summation in a fixed
order, so results are bit-identical for any ``workers`` value.

Far-field matrices are Toeplitz; only the lag vector is integrated.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import toeplitz

from .errors import DomainError, SingularityError, ValidationError
from .geometry import ArrayGeometry, one_ring_terms, ring_point
from .scattering import (AngularPdf, GeneralizedOneRing, PointSetSpectrum,
                         TabulatedPolarSpectrum, UniformPdf, VonMisesPdf)
from .special import von_mises_characteristic_ratio

CHUNK_SIZE = 256
SINGULARITY_DISTANCE = 1e-6  # in wavelengths
PSD_TOLERANCE = 1e-8


class QuadratureWarning(UserWarning):
    """Node doubling stopped at ``max_doublings`` before meeting the tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 4096
    refinement_tolerance: float = 1e-8
    max_doublings: int = 4

    def __post_init__(self):
        if self.node_count < 64 or self.node_count & (self.node_count - 1):
            raise ValidationError(f"node_count must be a power of two >= 64, got {self.node_count}")
        if not self.refinement_tolerance > 0:
            raise ValidationError("refinement_tolerance must be positive")
        if self.max_doublings < 0:
            raise ValidationError("max_doublings must be >= 0")


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """N x N Hermitian correlation matrix with provenance.

    ``entries`` is indexed by array position ``n - geometry.min_index``; use
    :meth:`entry` for the signed element indices.
    """

    entries: np.ndarray
    beta0: float
    method_tag: str
    geometry: ArrayGeometry
    node_count: int | None = None
    converged: bool = True
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.geometry.num_elements
        if self.entries.shape != (n, n):
            raise ValidationError(f"entries must be {n}x{n}, got {self.entries.shape}")
        if not self.beta0 > 0:
            raise ValidationError(f"beta0 must be positive, got {self.beta0}")
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.geometry.num_elements

    def entry(self, n: int, m: int) -> complex:
        g = self.geometry
        g.check_index([n, m])
        return complex(self.entries[n - g.min_index, m - g.min_index])

    def normalized(self) -> np.ndarray:
        return self.entries / self.beta0

    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def invariant_failures(self, psd_tol: float = PSD_TOLERANCE) -> list[str]:
        """Names of violated invariants (empty when all hold)."""
        a = self.entries
        failures = []
        if not np.array_equal(a, a.conj().T):
            failures.append("hermitian")
        diag = np.diag(a)
        if np.any(diag.imag != 0) or np.any(diag.real < 0):
            failures.append("diagonal")
        if "hermitian" not in failures:
            lam_min = np.linalg.eigvalsh(a)[0]
            if lam_min < -psd_tol * max(self.trace(), np.finfo(float).tiny):
                failures.append("psd")
        return failures

    def assert_invariants(self, psd_tol: float = PSD_TOLERANCE) -> "CorrelationMatrix":
        failures = self.invariant_failures(psd_tol)
        if failures:
            raise ValidationError(f"{self.method_tag}: invariant check failed: {', '.join(failures)}")
        return self


@dataclass(frozen=True)
class ClosedFormTerms:
    c: float
    d: float
    e: float


# -- reduction and quadrature machinery --------------------------------------

def pairwise_sum(parts: Iterable[np.ndarray]):
    """Sum arrays with a fixed binary-tree order (binary-counter merging)."""
    stack: list[tuple[int, np.ndarray]] = []
    for part in parts:
        level, value = 0, part
        while stack and stack[-1][0] == level:
            value = stack.pop()[1] + value
            level += 1
        stack.append((level, value))
    if not stack:
        raise ValueError("pairwise_sum of an empty sequence")
    total = stack.pop()[1]
    while stack:
        total = stack.pop()[1] + total
    return total


def _chunked_sum(partial: Callable[[slice], np.ndarray], count: int, workers: int):
    slices = [slice(i, min(i + CHUNK_SIZE, count)) for i in range(0, count, CHUNK_SIZE)]
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return pairwise_sum(pool.map(partial, slices))
    return pairwise_sum(map(partial, slices))


def _periodic_quadrature(integrand: Callable[[np.ndarray], np.ndarray], quad: QuadratureSpec,
                         workers: int = 1, label: str = ""):
    """Trapezoid rule over [-pi, pi) with node doubling.

    ``integrand(phi)`` returns the sum over the given nodes of the weighted
    rank-one (or lag-vector) terms.  Returns ``(value, node_count, converged)``.
    """

    def pass_(count: int, offset: float):
        phi = -np.pi + 2 * np.pi * (np.arange(count) + offset) / count
        return _chunked_sum(lambda sl: integrand(phi[sl]), count, workers) * (2 * np.pi / count)

    k = quad.node_count
    current = pass_(k, 0.0)
    for _ in range(quad.max_doublings):
        refined = 0.5 * (current + pass_(k, 0.5))
        change = float(np.max(np.abs(refined - current)))
        current, k = refined, 2 * k
        if change <= quad.refinement_tolerance:
            return current, k, True
    if quad.max_doublings:
        warnings.warn(f"{label}: quadrature not converged at {k} nodes", QuadratureWarning, stacklevel=3)
    return current, k, quad.max_doublings == 0


def _hermitize(a: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle so the result is exactly Hermitian."""
    upper = np.triu(a, 1)
    out = upper + upper.conj().T
    out[np.diag_indices_from(out)] = np.diag(a).real
    return out


def _finish(entries, beta0, tag, geom, node_count=None, converged=True, **params) -> CorrelationMatrix:
    m = CorrelationMatrix(_hermitize(entries * beta0), beta0, tag, geom, node_count, converged, params)
    return m.assert_invariants()


def _finish_toeplitz(lags, beta0, tag, geom, node_count=None, converged=True, **params) -> CorrelationMatrix:
    lags = np.asarray(lags, dtype=complex) * beta0
    lags[0] = lags[0].real
    m = CorrelationMatrix(toeplitz(lags.conj(), lags), beta0, tag, geom, node_count, converged, params)
    return m.assert_invariants()


def _check_beta0(beta0):
    if not beta0 > 0:
        raise ValidationError(f"beta0 must be positive, got {beta0}")


def _guard_singular(rn: np.ndarray, geom: ArrayGeometry, x, y):
    limit = SINGULARITY_DISTANCE * geom.wavelength
    if np.any(rn <= limit):
        i, k = np.unravel_index(np.argmin(rn), rn.shape)
        raise SingularityError(
            f"scatterer node at ({float(np.ravel(x)[k]):.6g}, {float(np.ravel(y)[k]):.6g}) m lies within "
            f"{SINGULARITY_DISTANCE:g} wavelengths of element n={geom.min_index + i}")


def _nf_rank_one_sum(x, y, w, geom: ArrayGeometry) -> np.ndarray:
    """sum_k w_k v_k v_k^H with v_k(n) = r_k / r_{k,n} exp(-j 2pi/lambda r_{k,n})."""
    yn = (geom.indices * geom.spacing)[:, None]
    rn = np.hypot(x[None, :], y[None, :] - yn)
    _guard_singular(rn, geom, x, y)
    r = np.hypot(x, y)
    v = (r / rn) * np.exp(-1j * geom.wavenumber * rn)
    return (v * w) @ v.conj().T


def _lag_sum(sin_theta, w, geom: ArrayGeometry) -> np.ndarray:
    """sum_k w_k exp(-j 2pi/lambda * l d sin(theta_k)) for lags l = 0..N-1."""
    lag_phase = geom.wavenumber * geom.spacing * np.arange(geom.num_elements)
    return np.exp(-1j * lag_phase[:, None] * sin_theta[None, :]) @ w


def _ring_params(ring: GeneralizedOneRing) -> dict:
    params = dict(ring_center_distance_m=ring.center_distance, ring_center_angle_rad=ring.center_angle,
                  ring_radius_m=ring.radius)
    params.update(_pdf_params(ring.angular_pdf))
    return params


def _pdf_params(pdf: AngularPdf) -> dict:
    if isinstance(pdf, VonMisesPdf):
        return dict(angular_pdf="von-mises", vonmises_kappa=pdf.kappa, vonmises_mu_rad=pdf.mu)
    if isinstance(pdf, UniformPdf):
        return dict(angular_pdf="uniform")
    return dict(angular_pdf="tabulated")


# -- general PLS / PAS builders -------------------------------------------------

def nf_correlation_general(pls, geom: ArrayGeometry, quad: QuadratureSpec = QuadratureSpec(),
                           beta0: float = 1.0, workers: int = 1) -> CorrelationMatrix:
    """Near-field correlation for an arbitrary power location spectrum.

    Ring spectra are integrated over the ring angle; point sets and tabulated
    grids are exact weighted sums over their nodes.
    """
    _check_beta0(beta0)
    if isinstance(pls, GeneralizedOneRing):
        def integrand(phi):
            p = ring_point(pls, phi)
            return _nf_rank_one_sum(p[:, 0], p[:, 1], pls.angular_pdf.density(phi), geom)

        acc, k, ok = _periodic_quadrature(integrand, quad, workers, "nf-general")
        return _finish(acc, beta0, "nf-general", geom, k, ok, pls="ring", **_ring_params(pls))
    if isinstance(pls, (PointSetSpectrum, TabulatedPolarSpectrum)):
        x, y, w = pls.nodes()
        acc = _chunked_sum(lambda sl: _nf_rank_one_sum(x[sl], y[sl], w[sl], geom), w.size, workers)
        kind = "point-set" if isinstance(pls, PointSetSpectrum) else "tabulated-polar"
        return _finish(acc, beta0, "nf-general", geom, int(w.size), True, pls=kind)
    raise TypeError(f"unsupported power location spectrum: {type(pls).__name__}")


def ff_correlation(pas, geom: ArrayGeometry, quad: QuadratureSpec = QuadratureSpec(),
                   beta0: float = 1.0, workers: int = 1) -> CorrelationMatrix:
    """Far-field (plane-wave) correlation from an angular spectrum.

    ``pas`` is either an :class:`AngularPdf` over the arrival angle, or a
    power location spectrum whose arrival-angle distribution is used.
    """
    _check_beta0(beta0)
    if isinstance(pas, AngularPdf):
        def integrand(theta):
            return _lag_sum(np.sin(theta), pas.density(theta), geom)

        acc, k, ok = _periodic_quadrature(integrand, quad, workers, "ff-general")
        return _finish_toeplitz(acc, beta0, "ff-general", geom, k, ok, pas="angular", **_pdf_params(pas))
    if isinstance(pas, GeneralizedOneRing):
        m = ff_one_ring_correlation(pas, geom, quad, beta0, workers)
        return CorrelationMatrix(m.entries, beta0, "ff-general", geom, m.node_count, m.converged, m.parameters)
    if isinstance(pas, (PointSetSpectrum, TabulatedPolarSpectrum)):
        x, y, w = pas.nodes()
        sin_theta = y / np.hypot(x, y)
        acc = _chunked_sum(lambda sl: _lag_sum(sin_theta[sl], w[sl], geom), w.size, workers)
        return _finish_toeplitz(acc, beta0, "ff-general", geom, int(w.size), True, pas="point-set")
    raise TypeError(f"unsupported angular spectrum: {type(pas).__name__}")


# -- generalized one-ring builders ----------------------------------------------

def nf_one_ring_correlation(ring: GeneralizedOneRing, geom: ArrayGeometry,
                            quad: QuadratureSpec = QuadratureSpec(), beta0: float = 1.0,
                            workers: int = 1) -> CorrelationMatrix:
    """Exact spherical-wave correlation of the generalized one-ring model."""
    _check_beta0(beta0)
    cx, cy = ring.center

    def integrand(phi):
        x = cx + ring.radius * np.cos(phi)
        y = cy + ring.radius * np.sin(phi)
        return _nf_rank_one_sum(x, y, ring.angular_pdf.density(phi), geom)

    acc, k, ok = _periodic_quadrature(integrand, quad, workers, "nf-integral")
    return _finish(acc, beta0, "nf-integral", geom, k, ok, **_ring_params(ring))


def ff_one_ring_correlation(ring: GeneralizedOneRing, geom: ArrayGeometry,
                            quad: QuadratureSpec = QuadratureSpec(), beta0: float = 1.0,
                            workers: int = 1) -> CorrelationMatrix:
    """Plane-wave correlation with the exact arrival angle of each ring point."""
    _check_beta0(beta0)
    if ring.center_distance == 0 and ring.radius == 0:
        raise ValidationError("degenerate ring: S = R = 0")
    cx, cy = ring.center

    def integrand(phi):
        x = cx + ring.radius * np.cos(phi)
        y = cy + ring.radius * np.sin(phi)
        return _lag_sum(y / np.hypot(x, y), ring.angular_pdf.density(phi), geom)

    acc, k, ok = _periodic_quadrature(integrand, quad, workers, "ff-integral")
    return _finish_toeplitz(acc, beta0, "ff-integral", geom, k, ok, **_ring_params(ring))


def _require_offset(ring: GeneralizedOneRing):
    if not ring.center_distance > 0:
        raise DomainError("ring center distance S must be positive for the S >> R forms")


def nf_lemma2_correlation(ring: GeneralizedOneRing, geom: ArrayGeometry,
                          quad: QuadratureSpec = QuadratureSpec(), beta0: float = 1.0,
                          workers: int = 1) -> CorrelationMatrix:
    """Near-field correlation with distances expanded to first order in R/S."""
    _check_beta0(beta0)
    _require_offset(ring)
    n = geom.indices
    root_a = np.sqrt(one_ring_terms(ring, geom, n, 0.0).a)[:, None]
    k0 = geom.wavenumber

    def integrand(phi):
        b = one_ring_terms(ring, geom, n[:, None], phi[None, :]).b
        v = np.exp(-1j * k0 * (ring.center_distance * root_a + ring.radius * b / root_a)) / root_a
        return (v * ring.angular_pdf.density(phi)) @ v.conj().T

    acc, k, ok = _periodic_quadrature(integrand, quad, workers, "nf-lemma2")
    return _finish(acc, beta0, "nf-lemma2", geom, k, ok, **_ring_params(ring))


def ff_lemma3_correlation(ring: GeneralizedOneRing, geom: ArrayGeometry,
                          quad: QuadratureSpec = QuadratureSpec(), beta0: float = 1.0,
                          workers: int = 1) -> CorrelationMatrix:
    """Far-field correlation with the arrival-angle sine linearized in R/S."""
    _check_beta0(beta0)
    _require_offset(ring)
    psi = ring.center_angle
    spread = ring.radius / ring.center_distance * math.cos(psi)

    def integrand(phi):
        return _lag_sum(math.sin(psi) + spread * np.sin(phi - psi), ring.angular_pdf.density(phi), geom)

    acc, k, ok = _periodic_quadrature(integrand, quad, workers, "ff-lemma3")
    return _finish_toeplitz(acc, beta0, "ff-lemma3", geom, k, ok, **_ring_params(ring))


# -- closed forms -----------------------------------------------------------------

def _closed_form_arrays(ring: GeneralizedOneRing, geom: ArrayGeometry, n, m):
    _require_offset(ring)
    n = geom.check_index(n)
    m = geom.check_index(m)
    s = ring.center_distance
    inv_root_n = 1.0 / np.sqrt(one_ring_terms(ring, geom, n, 0.0).a)
    inv_root_m = 1.0 / np.sqrt(one_ring_terms(ring, geom, m, 0.0).a)
    scale = geom.wavenumber * ring.radius
    c = scale * (inv_root_n - inv_root_m)
    d = scale * geom.spacing / s * (n * inv_root_n - m * inv_root_m)
    e = scale * (n - m) * geom.spacing * math.cos(ring.center_angle) / s
    return c, d, e


def closed_form_terms(ring: GeneralizedOneRing, geom: ArrayGeometry, n: int, m: int) -> ClosedFormTerms:
    """The dimensionless c_nm, d_nm, e_nm entering the closed forms."""
    c, d, e = _closed_form_arrays(ring, geom, n, m)
    return ClosedFormTerms(float(c), float(d), float(e))


def _von_mises_of(ring: GeneralizedOneRing) -> VonMisesPdf:
    pdf = ring.angular_pdf
    if isinstance(pdf, UniformPdf):
        return VonMisesPdf(0.0, 0.0)
    if isinstance(pdf, VonMisesPdf):
        return pdf
    raise ValidationError("closed forms require a von Mises (or uniform) ring angular pdf")


def _bessel_ratio(x, y, kappa, as_printed):
    if not as_printed:
        return von_mises_characteristic_ratio(x, y, kappa)
    # typeset variant: I0(j * sqrt(...)) instead of I0(sqrt(...))
    z = 1j * np.sqrt(x * x + y * y)
    return von_mises_characteristic_ratio(z, np.zeros_like(z), kappa)


def nf_closed_form(ring: GeneralizedOneRing, geom: ArrayGeometry, beta0: float = 1.0,
                   as_printed: bool = False) -> CorrelationMatrix:
    """Closed-form near-field correlation under the S >> R expansion.

    Evaluated through the von Mises characteristic integral
    ``I0(sqrt(x^2 + y^2)) / I0(kappa)``. ``as_printed=True`` applies an extra
    factor ``j`` inside I0 as in the commonly typeset expression; that variant
    is for comparison reports only and does not equal the defining integral.
    """
    _check_beta0(beta0)
    _require_offset(ring)
    vm = _von_mises_of(ring)
    n_all = geom.indices
    iu, ju = np.triu_indices(geom.num_elements)
    n, m = n_all[iu], n_all[ju]
    c, d, _ = _closed_form_arrays(ring, geom, n, m)
    psi = ring.center_angle
    x = vm.kappa * math.cos(vm.mu) - 1j * c * math.cos(psi)
    y = vm.kappa * math.sin(vm.mu) - 1j * (c * math.sin(psi) - d)
    root_a = np.sqrt(one_ring_terms(ring, geom, n_all, 0.0).a)
    steer = np.exp(-1j * geom.wavenumber * ring.center_distance * root_a) / root_a
    values = steer[iu] * steer[ju].conj() * _bessel_ratio(x, y, vm.kappa, as_printed)
    upper = np.zeros((geom.num_elements,) * 2, dtype=complex)
    upper[iu, ju] = values
    tag = "nf-closed-printed" if as_printed else "nf-closed"
    m_ = CorrelationMatrix(_hermitize(upper * beta0), beta0, tag, geom, None, True, _ring_params(ring))
    return m_ if as_printed else m_.assert_invariants()


def ff_closed_form(ring: GeneralizedOneRing, geom: ArrayGeometry, beta0: float = 1.0,
                   as_printed: bool = False) -> CorrelationMatrix:
    """Closed-form far-field correlation under the S >> R expansion (Toeplitz)."""
    _check_beta0(beta0)
    _require_offset(ring)
    vm = _von_mises_of(ring)
    psi = ring.center_angle
    lag = np.arange(geom.num_elements)  # m - n
    e = -geom.wavenumber * ring.radius * lag * geom.spacing * math.cos(psi) / ring.center_distance
    x = np.full(lag.shape, vm.kappa * math.cos(vm.mu - psi), dtype=complex)
    y = vm.kappa * math.sin(vm.mu - psi) + 1j * e
    steer = np.exp(-1j * geom.wavenumber * lag * geom.spacing * math.sin(psi))
    lags = steer * _bessel_ratio(x, y, vm.kappa, as_printed)
    tag = "ff-closed-printed" if as_printed else "ff-closed"
    if as_printed:
        lags = np.asarray(lags, dtype=complex) * beta0
        lags[0] = lags[0].real
        return CorrelationMatrix(toeplitz(lags.conj(), lags), beta0, tag, geom, None, True, _ring_params(ring))
    return _finish_toeplitz(lags, beta0, tag, geom, None, True, **_ring_params(ring))


BUILDERS = {
    "nf-general": nf_correlation_general,
    "ff-general": ff_correlation,
    "nf-integral": nf_one_ring_correlation,
    "ff-integral": ff_one_ring_correlation,
    "nf-lemma2": nf_lemma2_correlation,
    "ff-lemma3": ff_lemma3_correlation,
    "nf-closed": nf_closed_form,
    "ff-closed": ff_closed_form,
}
