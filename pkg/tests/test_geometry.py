import math

import mpmath
import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from nfcorr.errors import DomainError, ValidationError
from nfcorr.geometry import (SPEED_OF_LIGHT, ArrayGeometry, PolarPoint, TransmitterLocation,
                             distance_to_element, element_position, farfield_distance_approx,
                             lemma2_distance_approx, one_ring_terms, ring_distance, ring_point,
                             transmitter_scatterer_distance, wrap_angle)
from nfcorr.scattering import GeneralizedOneRing


def algebraic_distance(r, theta, nd):
    """r * sqrt(1 + (nd/r)^2 - 2 sin(theta) nd / r)."""
    u = nd / r
    return r * math.sqrt(1 + u * u - 2 * math.sin(theta) * u)


def test_index_range_even_and_odd(xl_array):
    assert xl_array.min_index == -256 and xl_array.max_index == 255
    assert len(xl_array.indices) == 512
    g = ArrayGeometry(5, 0.04, 0.08)
    assert list(g.indices) == [-2, -1, 0, 1, 2]
    one = ArrayGeometry(1, 0.1, 0.2)
    assert list(one.indices) == [0]


def test_element_positions(xl_array):
    assert np.array_equal(element_position(xl_array, 0), [0.0, 0.0])
    g = ArrayGeometry(5, 0.04, 0.08)
    assert element_position(g, -2) == pytest.approx([0.0, -0.08])
    assert np.array_equal(g.positions()[:, 1], g.indices * 0.04)


@pytest.mark.parametrize("n", [-257, 256, 0.5])
def test_element_index_out_of_range(xl_array, n):
    with pytest.raises(IndexError):
        element_position(xl_array, n)


@pytest.mark.parametrize("kwargs", [dict(num_elements=0, spacing=1, wavelength=1),
                                    dict(num_elements=4, spacing=0, wavelength=1),
                                    dict(num_elements=4, spacing=1, wavelength=-1)])
def test_geometry_validation(kwargs):
    with pytest.raises(ValidationError):
        ArrayGeometry(**kwargs)


def test_from_carrier_half_wavelength():
    g = ArrayGeometry.from_carrier(8, 3.5e9)
    assert g.wavelength == SPEED_OF_LIGHT / 3.5e9
    assert g.spacing == g.wavelength / 2


def test_wrap_angle_range():
    assert wrap_angle(math.pi) == -math.pi
    assert PolarPoint(1.0, 3 * math.pi / 2).angle == pytest.approx(-math.pi / 2)
    with pytest.raises(ValidationError):
        PolarPoint(-1.0, 0.0)


def test_distance_examples():
    g = ArrayGeometry(16, 0.5, 1.0)
    s = PolarPoint(10.0, math.pi / 6)
    assert distance_to_element(s, g, 0) == 10.0
    cart = math.hypot(10 * math.cos(math.pi / 6), 10 * math.sin(math.pi / 6) - 3.5)
    assert distance_to_element(s, g, 7) == pytest.approx(cart, rel=1e-15)
    on_element = PolarPoint(3 * 0.5, math.pi / 2)
    assert distance_to_element(on_element, g, 3) == pytest.approx(0.0, abs=1e-15)  # cos(pi/2) is not exactly 0


@settings(max_examples=300, deadline=None)
@given(r=st.floats(0.05, 1e4), theta=st.floats(-math.pi, math.pi, exclude_max=True), n=st.integers(-255, 255))
def test_distance_matches_algebraic_form(r, theta, n):
    g = ArrayGeometry(512, 0.0428, 0.0857)
    nd = n * g.spacing
    exact = algebraic_distance(r, theta, nd)
    assume(exact > 1e-3 * r)  # algebraic form is the ill-conditioned one near the element
    got = distance_to_element(PolarPoint(r, theta), g, n)
    assert got == pytest.approx(exact, rel=1e-12)


def test_transmitter_distance():
    e = TransmitterLocation(20.0, 0.0)
    assert transmitter_scatterer_distance(e, PolarPoint(5.0, math.pi / 2)) == pytest.approx(math.sqrt(425), rel=1e-15)
    assert transmitter_scatterer_distance(e, PolarPoint(5.0, 0.0)) == pytest.approx(15.0)
    assert transmitter_scatterer_distance(e, PolarPoint(20.0, 0.0)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValidationError):
        TransmitterLocation(1.0, 2.0)


@settings(max_examples=100, deadline=None)
@given(D=st.floats(0.1, 100), phi=st.floats(-math.pi / 2, math.pi / 2), r=st.floats(0.1, 100),
       theta=st.floats(-math.pi, math.pi))
def test_transmitter_distance_law_of_cosines(D, phi, r, theta):
    law = math.sqrt(max(r * r + D * D - 2 * r * D * math.cos(theta - phi), 0.0))
    got = transmitter_scatterer_distance(TransmitterLocation(D, phi), PolarPoint(r, theta))
    assert got == pytest.approx(law, rel=1e-9, abs=1e-9 * (r + D))


def test_ring_point_examples():
    ring = GeneralizedOneRing(10.0, math.pi / 3, 3.0)
    assert ring_point(ring, 0.0) == pytest.approx([8.0, 8.660254037844386])
    assert np.hypot(*ring_point(ring, math.pi / 3)) == pytest.approx(13.0)
    conventional = GeneralizedOneRing(0.0, 0.0, 3.0)
    pts = ring_point(conventional, np.linspace(-3, 3, 7))
    assert np.hypot(pts[:, 0], pts[:, 1]) == pytest.approx(np.full(7, 3.0))


def test_ring_distance_examples(xl_array, rng):
    ring = GeneralizedOneRing(10.0, math.pi / 3, 3.0)
    expected = math.hypot(10 * math.cos(math.pi / 3) - 3, 10 * math.sin(math.pi / 3))
    assert ring_distance(ring, math.pi, xl_array, 0) == pytest.approx(expected, rel=1e-15)
    assert ring_distance(GeneralizedOneRing(0.0, 0.0, 3.0), 1.234, xl_array, 0) == pytest.approx(3.0)
    phi = rng.uniform(-np.pi, np.pi, 100)
    n = rng.integers(-256, 256, 100)
    for p, k in zip(phi, n):
        point = PolarPoint.from_cartesian(*ring_point(ring, p))
        assert ring_distance(ring, p, xl_array, k) == pytest.approx(distance_to_element(point, xl_array, k), rel=1e-13)


def test_ring_distance_broadcasts(xl_array, near_ring):
    phi = np.linspace(-np.pi, np.pi, 5)
    out = ring_distance(near_ring, phi[None, :], xl_array, xl_array.indices[:, None])
    assert out.shape == (512, 5)


def test_farfield_approximation():
    g = ArrayGeometry(3, 1.0, 2.0)
    s = PolarPoint(1000.0, math.pi / 4)
    assert farfield_distance_approx(s, g, 1) == pytest.approx(1000 - math.sqrt(0.5), rel=1e-14)
    assert farfield_distance_approx(s, g, 0) == 1000.0
    assert farfield_distance_approx(PolarPoint(50.0, 0.0), g, -1) == 50.0
    exact = distance_to_element(s, g, 1)
    assert abs(farfield_distance_approx(s, g, 1) - exact) / exact < 1e-6


@settings(max_examples=200, deadline=None)
@given(scale=st.floats(100, 1e4), theta=st.floats(-math.pi, math.pi), n=st.integers(-255, 255))
def test_farfield_taylor_dominance(scale, theta, n):
    g = ArrayGeometry(512, 0.0428, 0.0857)
    r = scale * g.aperture
    s = PolarPoint(r, theta)
    gap = abs(farfield_distance_approx(s, g, n) - distance_to_element(s, g, n)) / r
    assert gap <= (g.aperture / r) ** 2


def test_one_ring_terms_reference_element(xl_array):
    ring = GeneralizedOneRing(70.0, math.pi / 3, 3.0)
    t = one_ring_terms(ring, xl_array, 0, 0.4)
    assert t.a == 1.0
    assert t.b == pytest.approx(math.cos(math.pi / 3 - 0.4))


def test_one_ring_terms_extended_precision(xl_array):
    ring = GeneralizedOneRing(70.0, math.pi / 3, 3.0)
    t = one_ring_terms(ring, xl_array, 255, 1.0)
    with mpmath.workdps(40):
        u = 255 * mpmath.mpf(xl_array.spacing) / 70
        a = 1 + u ** 2 - 2 * u * mpmath.sin(mpmath.pi / 3)
        b = mpmath.cos(mpmath.pi / 3 - 1) - u * mpmath.sin(1)
    assert float(t.a) == pytest.approx(float(a), rel=1e-15)
    assert float(t.b) == pytest.approx(float(b), rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(n_el=st.integers(1, 4096), s=st.floats(0.01, 1e3), psi=st.floats(-1.5707, 1.5707))
def test_a_positive_over_full_index_range(n_el, s, psi):
    g = ArrayGeometry(n_el, 0.05, 0.1)
    ring = GeneralizedOneRing(s, psi, 1.0)
    assert np.all(one_ring_terms(ring, g, g.indices, 0.0).a > 0)


def test_one_ring_terms_require_offset(xl_array):
    with pytest.raises(DomainError):
        one_ring_terms(GeneralizedOneRing(0.0, 0.0, 3.0), xl_array, 0, 0.0)
    with pytest.raises(DomainError):
        lemma2_distance_approx(GeneralizedOneRing(0.0, 0.0, 3.0), xl_array, 0, 0.0)


def test_lemma2_distance_examples(xl_array):
    ring = GeneralizedOneRing(70.0, math.pi / 3, 3.0)
    assert lemma2_distance_approx(ring, xl_array, 0, 0.2) == pytest.approx(70 + 3 * math.cos(math.pi / 3 - 0.2))
    exact = ring_distance(ring, 0.7, xl_array, 100)
    rel = abs(lemma2_distance_approx(ring, xl_array, 100, 0.7) - exact) / exact
    assert rel <= (3 / 70) ** 2
    # vanishing radius: the center-to-element distance
    tiny = GeneralizedOneRing(70.0, math.pi / 3, 1e-300)
    center = np.hypot(70 * math.cos(math.pi / 3), 70 * math.sin(math.pi / 3) - 37 * xl_array.spacing)
    assert lemma2_distance_approx(tiny, xl_array, 37, 1.0) == pytest.approx(center, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(ratio=st.floats(20, 500), radius=st.floats(0.1, 10), psi=st.floats(-1.4, 1.4),
       phi=st.floats(-math.pi, math.pi), n=st.integers(-256, 255))
def test_lemma2_dominance(xl_array, ratio, radius, psi, phi, n):
    ring = GeneralizedOneRing(ratio * radius, psi, radius)
    gap = abs(lemma2_distance_approx(ring, xl_array, n, phi) - ring_distance(ring, phi, xl_array, n))
    assert gap <= 5 * radius ** 2 / ring.center_distance
