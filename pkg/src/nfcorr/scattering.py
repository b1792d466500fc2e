"""Scatterer power distributions.

Angular densities over the ring angle (uniform, von Mises, tabulated) and
power location spectra over 2D scatterer positions:

* :class:`GeneralizedOneRing` -- scatterers on a circle of radius R whose
  center sits at distance S and angle Psi from the array center;
* :class:`PointSetSpectrum` -- a finite set of weighted locations (also the
  representation of a delta-like angular spectrum);
* :class:`TabulatedPolarSpectrum` -- a density sampled on an (r, theta) grid.

Every spectrum can turn uniforms in [0, 1) into scatterer positions, which is
what the Monte Carlo channel generator consumes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ValidationError
from .geometry import PolarPoint, ring_point, wrap_angle
from .special import bessel_i0e_real

CDF_TABLE_SIZE = 2 ** 16
NORMALIZATION_TOL = 1e-9
_INTEGRAL_NODES = 2 ** 14


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class AngularPdf:
    """Density over an angle in [-pi, pi)."""

    def density(self, phi):
        raise NotImplementedError

    def _inverse_cdf(self):
        table = getattr(self, "_cdf_cache", None)
        if table is None:
            grid = np.linspace(-np.pi, np.pi, CDF_TABLE_SIZE + 1)
            f = self.density(grid)
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * (grid[1] - grid[0]))])
            cdf /= cdf[-1]
            table = (grid, cdf)
            object.__setattr__(self, "_cdf_cache", table)
        return table

    def angles_from_uniforms(self, u):
        """Inverse-CDF map from uniforms in [0, 1) to angles in [-pi, pi)."""
        grid, cdf = self._inverse_cdf()
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(cdf, u, side="right") - 1, 0, CDF_TABLE_SIZE - 1)
        lo = cdf[idx]
        width = cdf[idx + 1] - lo
        frac = np.divide(u - lo, width, out=np.zeros_like(u), where=width > 0)
        return wrap_angle(grid[idx] + frac * (grid[1] - grid[0]))


@dataclass(frozen=True)
class UniformPdf(AngularPdf):
    def density(self, phi):
        return np.full(np.shape(phi), 1.0 / (2 * np.pi)) if np.ndim(phi) else 1.0 / (2 * np.pi)


@dataclass(frozen=True)
class VonMisesPdf(AngularPdf):
    """``exp(kappa cos(phi - mu)) / (2 pi I0(kappa))``."""

    kappa: float
    mu: float = 0.0

    def __post_init__(self):
        if not self.kappa >= 0 or not math.isfinite(self.kappa):
            raise ValidationError(f"von Mises concentration must be >= 0, got {self.kappa}")
        object.__setattr__(self, "mu", wrap_angle(self.mu))

    def density(self, phi):
        # scaled form: finite for any kappa
        phi = np.asarray(phi, dtype=float)
        val = np.exp(self.kappa * (np.cos(phi - self.mu) - 1.0)) / (2 * np.pi * bessel_i0e_real(self.kappa))
        return float(val) if val.ndim == 0 else val


@dataclass(frozen=True, eq=False)
class TabulatedPdf(AngularPdf):
    """Periodic piecewise-linear density through ``(nodes, densities)``.

    The interpolant is renormalized to unit mass at construction; the mass of
    the raw input is kept in ``raw_mass``.
    """

    nodes: np.ndarray
    densities: np.ndarray
    raw_mass: float = field(init=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        dens = np.asarray(self.densities, dtype=float)
        if nodes.ndim != 1 or nodes.shape != dens.shape or nodes.size < 2:
            raise ValidationError("tabulated pdf needs matching 1D node/density arrays (>= 2 nodes)")
        if np.any(nodes < -np.pi) or np.any(nodes >= np.pi) or np.any(np.diff(nodes) <= 0):
            raise ValidationError("tabulated nodes must be strictly ascending in [-pi, pi)")
        if not np.all(np.isfinite(dens)) or np.any(dens < 0):
            raise ValidationError("tabulated densities must be finite and non-negative")
        mass = _periodic_trapezoid_mass(nodes, dens)
        if not mass > 0:
            raise ValidationError("tabulated pdf is not normalizable (zero mass)")
        object.__setattr__(self, "nodes", _frozen_array(nodes))
        object.__setattr__(self, "densities", _frozen_array(dens / mass))
        object.__setattr__(self, "raw_mass", float(mass))

    def density(self, phi):
        val = np.interp(wrap_angle(phi), self.nodes, self.densities, period=2 * np.pi)
        return float(val) if np.ndim(val) == 0 else val


def _periodic_gaps(nodes: np.ndarray) -> np.ndarray:
    return np.diff(np.concatenate([nodes, [nodes[0] + 2 * np.pi]]))


def _periodic_trapezoid_mass(nodes, dens) -> float:
    gaps = _periodic_gaps(nodes)
    return float(np.sum(0.5 * (dens + np.roll(dens, -1)) * gaps))


def pdf_value(pdf: AngularPdf, phi):
    return pdf.density(phi)


def pdf_integral_check(pdf: AngularPdf) -> float:
    """Numerical integral of the density over [-pi, pi)."""
    if isinstance(pdf, TabulatedPdf):
        # exact for the piecewise-linear interpolant
        return _periodic_trapezoid_mass(pdf.nodes, pdf.densities)
    phi = -np.pi + 2 * np.pi * np.arange(_INTEGRAL_NODES) / _INTEGRAL_NODES
    return float(np.sum(pdf.density(phi)) * 2 * np.pi / _INTEGRAL_NODES)


def sample_angle(pdf: AngularPdf, rng: np.random.Generator, size=None):
    """Draw angles distributed per ``pdf`` by inverse-CDF lookup."""
    return pdf.angles_from_uniforms(rng.random(size))


# -- power location spectra ---------------------------------------------------

@dataclass(frozen=True)
class GeneralizedOneRing:
    """Ring of radius R centered at distance S, angle Psi from the array center.

    ``center_distance == 0`` is the conventional one-ring model.
    """

    center_distance: float
    center_angle: float
    radius: float
    angular_pdf: AngularPdf = field(default_factory=UniformPdf)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError(f"ring radius must be positive, got {self.radius}")
        if not self.center_distance >= 0:
            raise ValidationError(f"ring center distance must be >= 0, got {self.center_distance}")
        if not abs(self.center_angle) < np.pi / 2:
            raise ValidationError(f"ring center angle must lie in (-pi/2, pi/2), got {self.center_angle}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.center_distance * math.cos(self.center_angle),
                         self.center_distance * math.sin(self.center_angle)])

    def scaled(self, factor: float) -> "GeneralizedOneRing":
        """Same ring shape with S and R multiplied by ``factor``."""
        return GeneralizedOneRing(self.center_distance * factor, self.center_angle,
                                  self.radius * factor, self.angular_pdf)

    def min_origin_distance(self) -> float:
        return abs(self.center_distance - self.radius)

    def locations_from_uniforms(self, u):
        p = ring_point(self, self.angular_pdf.angles_from_uniforms(u))
        return p[..., 0], p[..., 1]


@dataclass(frozen=True, eq=False)
class PointSetSpectrum:
    """Finite set of scatterer locations with probability weights."""

    radii: np.ndarray
    angles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.radii, dtype=float))
        a = np.atleast_1d(np.asarray(self.angles, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if not (r.shape == a.shape == w.shape) or r.ndim != 1 or r.size == 0:
            raise ValidationError("point set needs matching non-empty 1D radius/angle/weight arrays")
        if np.any(r <= 0) or not np.all(np.isfinite(r)):
            raise ValidationError("point set radii must be strictly positive")
        if np.any(w < 0) or abs(w.sum() - 1.0) > NORMALIZATION_TOL:
            raise ValidationError(f"point set weights must be non-negative and sum to 1 (sum={w.sum()!r})")
        object.__setattr__(self, "radii", _frozen_array(r))
        object.__setattr__(self, "angles", _frozen_array(wrap_angle(a)))
        object.__setattr__(self, "weights", _frozen_array(w / w.sum()))

    @classmethod
    def single(cls, point: PolarPoint) -> "PointSetSpectrum":
        return cls([point.radius], [point.angle], [1.0])

    def nodes(self):
        """Cartesian nodes and weights ``(x, y, w)``."""
        return self.radii * np.cos(self.angles), self.radii * np.sin(self.angles), self.weights

    def locations_from_uniforms(self, u):
        x, y, w = self.nodes()
        return _pick_nodes(x, y, w, u)


@dataclass(frozen=True, eq=False)
class TabulatedPolarSpectrum:
    """Density sampled on a rectangular (radius, angle) grid.

    The grid is treated as a quadrature rule: node (i, j) carries mass
    ``f_ij * r_i * dr_i * dtheta_j`` (trapezoid in r, periodic trapezoid in
    theta), renormalized to unit total mass. Correlations and the Monte Carlo
    sampler both use these discrete nodes.
    """

    radii: np.ndarray
    angles: np.ndarray
    density: np.ndarray
    raw_mass: float = field(init=False)

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        a = np.asarray(self.angles, dtype=float)
        f = np.asarray(self.density, dtype=float)
        if r.ndim != 1 or a.ndim != 1 or f.shape != (r.size, a.size):
            raise ValidationError("tabulated spectrum needs density of shape (len(radii), len(angles))")
        if np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ValidationError("tabulated radii must be strictly positive and ascending")
        if np.any(a < -np.pi) or np.any(a >= np.pi) or np.any(np.diff(a) <= 0):
            raise ValidationError("tabulated angles must be strictly ascending in [-pi, pi)")
        if not np.all(np.isfinite(f)) or np.any(f < 0):
            raise ValidationError("tabulated densities must be finite and non-negative")
        if r.size > 1:
            dr = np.zeros_like(r)
            dr[:-1] += 0.5 * np.diff(r)
            dr[1:] += 0.5 * np.diff(r)
        else:
            dr = np.ones(1)
        gaps = _periodic_gaps(a)
        dtheta = 0.5 * (gaps + np.roll(gaps, 1))
        mass = f * (r * dr)[:, None] * dtheta[None, :]
        total = float(mass.sum())
        if not total > 0:
            raise ValidationError("tabulated spectrum is not normalizable (zero mass)")
        object.__setattr__(self, "radii", _frozen_array(r))
        object.__setattr__(self, "angles", _frozen_array(a))
        object.__setattr__(self, "density", _frozen_array(f))
        object.__setattr__(self, "raw_mass", total)
        object.__setattr__(self, "_weights", mass.ravel() / total)

    def nodes(self):
        rr, aa = np.meshgrid(self.radii, self.angles, indexing="ij")
        return (rr * np.cos(aa)).ravel(), (rr * np.sin(aa)).ravel(), self._weights

    def locations_from_uniforms(self, u):
        x, y, w = self.nodes()
        return _pick_nodes(x, y, w, u)


PowerLocationSpectrum = Union[GeneralizedOneRing, PointSetSpectrum, TabulatedPolarSpectrum]


def _pick_nodes(x, y, w, u):
    cum = np.cumsum(w)
    idx = np.minimum(np.searchsorted(cum, np.asarray(u) * cum[-1], side="right"), w.size - 1)
    return x[idx], y[idx]


def sample_location(pls: PowerLocationSpectrum, rng: np.random.Generator) -> PolarPoint:
    x, y = pls.locations_from_uniforms(rng.random())
    return PolarPoint.from_cartesian(float(x), float(y))


# -- CSV loaders --------------------------------------------------------------

def _numeric_rows(path, width: int):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                values = [float(v) for v in row]
            except ValueError:
                if rows:
                    raise ValidationError(f"{path}:{lineno}: non-numeric row {row}") from None
                continue  # header
            if len(values) != width:
                raise ValidationError(f"{path}:{lineno}: expected {width} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return np.array(rows)


def load_angular_pdf_csv(path) -> TabulatedPdf:
    """Read rows ``angle,density`` (radians) into a :class:`TabulatedPdf`."""
    data = _numeric_rows(path, 2)
    order = np.argsort(data[:, 0])
    return TabulatedPdf(data[order, 0], data[order, 1])


def load_pls_csv(path) -> TabulatedPolarSpectrum:
    """Read rows ``radius,angle,density`` covering a full rectangular grid."""
    data = _numeric_rows(path, 3)
    radii = np.unique(data[:, 0])
    angles = np.unique(data[:, 1])
    if radii.size * angles.size != data.shape[0]:
        raise ValidationError(f"{path}: rows do not form a full (radius, angle) grid")
    grid = np.full((radii.size, angles.size), np.nan)
    grid[np.searchsorted(radii, data[:, 0]), np.searchsorted(angles, data[:, 1])] = data[:, 2]
    if np.isnan(grid).any():
        raise ValidationError(f"{path}: duplicate grid rows")
    return TabulatedPolarSpectrum(radii, angles, grid)
