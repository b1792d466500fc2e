"""ULA element placement and scatterer/transmitter/element distances.

Coordinates are 2D Cartesian in meters.  The array lies on the y-axis with
element ``n`` at ``(0, n*d)`` for ``-ceil((N-1)/2) <= n <= floor((N-1)/2)``.

Every distance is computed as a Cartesian norm (``np.hypot``); the polar
closed forms lose digits when the square-root argument approaches zero.
Functions broadcast over array-valued ``n`` and ``phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import DomainError, ValidationError

if TYPE_CHECKING:
    from .scattering import GeneralizedOneRing

SPEED_OF_LIGHT = 299_792_458.0


def wrap_angle(angle):
    """Map an angle (or array of angles) into [-pi, pi)."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array along the y-axis.

    Attributes:
        num_elements: number of elements N.
        spacing: element spacing d in meters.
        wavelength: carrier wavelength in meters.
    """

    num_elements: int
    spacing: float
    wavelength: float

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 1:
            raise ValidationError(f"num_elements must be a positive integer, got {self.num_elements}")
        if not self.spacing > 0 or not math.isfinite(self.spacing):
            raise ValidationError(f"spacing must be positive, got {self.spacing}")
        if not self.wavelength > 0 or not math.isfinite(self.wavelength):
            raise ValidationError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "num_elements", int(self.num_elements))

    @classmethod
    def from_carrier(cls, num_elements: int, carrier_frequency_hz: float,
                     spacing_wavelengths: float = 0.5) -> "ArrayGeometry":
        if not carrier_frequency_hz > 0:
            raise ValidationError("carrier frequency must be positive")
        wavelength = SPEED_OF_LIGHT / carrier_frequency_hz
        return cls(num_elements, spacing_wavelengths * wavelength, wavelength)

    @property
    def min_index(self) -> int:
        return -math.ceil((self.num_elements - 1) / 2)

    @property
    def max_index(self) -> int:
        return (self.num_elements - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.min_index, self.max_index + 1)

    @property
    def wavenumber(self) -> float:
        return 2 * np.pi / self.wavelength

    @property
    def aperture(self) -> float:
        """N*d, the array length scale used in far-field conditions."""
        return self.num_elements * self.spacing

    def check_index(self, n):
        n = np.asarray(n)
        if not np.issubdtype(n.dtype, np.integer):
            if not np.all(n == np.round(n)):
                raise IndexError(f"element index must be an integer, got {n}")
            n = n.astype(int)
        if np.any(n < self.min_index) or np.any(n > self.max_index):
            raise IndexError(
                f"element index outside [{self.min_index}, {self.max_index}]: {n}")
        return n

    def positions(self) -> np.ndarray:
        """All element positions, shape (N, 2)."""
        y = self.indices * self.spacing
        return np.column_stack([np.zeros_like(y, dtype=float), y])


@dataclass(frozen=True)
class PolarPoint:
    """Point at distance ``radius`` from the origin and angle ``angle`` from +x."""

    radius: float
    angle: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValidationError(f"radius must be non-negative, got {self.radius}")
        object.__setattr__(self, "angle", wrap_angle(self.angle))

    @classmethod
    def from_cartesian(cls, x: float, y: float) -> "PolarPoint":
        return cls(math.hypot(x, y), math.atan2(y, x))

    @property
    def cartesian(self) -> np.ndarray:
        return np.array([self.radius * math.cos(self.angle), self.radius * math.sin(self.angle)])


@dataclass(frozen=True)
class TransmitterLocation:
    """Transmitter at distance ``distance`` and angle ``angle`` in [-pi/2, pi/2]."""

    distance: float
    angle: float

    def __post_init__(self):
        if not self.distance > 0:
            raise ValidationError(f"transmitter distance must be positive, got {self.distance}")
        if abs(self.angle) > np.pi / 2:
            raise ValidationError(f"transmitter angle must lie in [-pi/2, pi/2], got {self.angle}")

    @property
    def cartesian(self) -> np.ndarray:
        return np.array([self.distance * math.cos(self.angle), self.distance * math.sin(self.angle)])


@dataclass(frozen=True)
class OneRingTerms:
    """The per-element quantities a_n (> 0) and b_n of the S >> R expansion."""

    a: np.ndarray
    b: np.ndarray


def element_position(geom: ArrayGeometry, n) -> np.ndarray:
    """Position (0, n*d) of element ``n``; shape (2,) or (..., 2)."""
    n = geom.check_index(n)
    y = n * geom.spacing
    return np.stack([np.zeros_like(y, dtype=float), y * 1.0], axis=-1)


def distance_to_element(s: PolarPoint, geom: ArrayGeometry, n):
    """Distance between scatterer ``s`` and element ``n``.

    Returns 0 when the scatterer sits on the element; callers that divide by
    the distance must guard against it.
    """
    n = geom.check_index(n)
    x, y = s.cartesian
    return np.hypot(x, y - n * geom.spacing)


def transmitter_scatterer_distance(e: TransmitterLocation, s: PolarPoint) -> float:
    ex, ey = e.cartesian
    sx, sy = s.cartesian
    return math.hypot(sx - ex, sy - ey)


def ring_point(ring: "GeneralizedOneRing", phi):
    """Cartesian position of the ring scatterer at ring angle ``phi``.

    Returns an array whose last axis holds (x, y).
    """
    phi = np.asarray(phi, dtype=float)
    x = ring.center_distance * math.cos(ring.center_angle) + ring.radius * np.cos(phi)
    y = ring.center_distance * math.sin(ring.center_angle) + ring.radius * np.sin(phi)
    return np.stack([x, y], axis=-1)


def ring_distance(ring: "GeneralizedOneRing", phi, geom: ArrayGeometry, n):
    """Exact distance from ring point ``phi`` to element ``n`` (broadcasting)."""
    n = geom.check_index(n)
    p = ring_point(ring, phi)
    return np.hypot(p[..., 0], p[..., 1] - n * geom.spacing)


def farfield_distance_approx(s: PolarPoint, geom: ArrayGeometry, n):
    """First-order (plane-wave) distance ``r - n d sin(theta)``.

    Accurate only when N*d is much smaller than ``s.radius``; not enforced.
    """
    n = geom.check_index(n)
    return s.radius - n * geom.spacing * math.sin(s.angle)


def _require_center_offset(ring: "GeneralizedOneRing"):
    if not ring.center_distance > 0:
        raise DomainError("ring center distance S must be positive for the S >> R expansion")


def one_ring_terms(ring: "GeneralizedOneRing", geom: ArrayGeometry, n, phi) -> OneRingTerms:
    """a_n = 1 + (nd/S)^2 - 2 (nd/S) sin(Psi),  b_n = cos(Psi - phi) - (nd/S) sin(phi)."""
    _require_center_offset(ring)
    n = geom.check_index(n)
    u = n * geom.spacing / ring.center_distance
    psi = ring.center_angle
    a = 1.0 + u * u - 2.0 * u * math.sin(psi)
    if np.any(a <= 0):
        raise DomainError("a_n must be positive; |Psi| < pi/2 violated")
    phi = np.asarray(phi, dtype=float)
    b = np.cos(psi - phi) - u * np.sin(phi)
    return OneRingTerms(a=a, b=b)


def lemma2_distance_approx(ring: "GeneralizedOneRing", geom: ArrayGeometry, n, phi):
    """Distance expanded to first order in R/S: ``S sqrt(a_n) + R b_n / sqrt(a_n)``."""
    t = one_ring_terms(ring, geom, n, phi)
    root = np.sqrt(t.a)
    return ring.center_distance * root + ring.radius * t.b / root
