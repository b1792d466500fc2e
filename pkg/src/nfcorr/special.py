r"""Modified Bessel function :math:`I_0` for real and complex arguments.

Two evaluation paths are used:

* ``|z| <= 20``: the power series :math:`\sum_k (z^2/4)^k / (k!)^2`, summed in
  double-double arithmetic.  Near the imaginary axis the series terms grow to
  roughly :math:`e^{|z|}` before cancelling down to :math:`J_0(|z|)`, which
  costs about eight digits in plain double precision at ``|z| = 20``.
* ``|z| > 20``: the large-argument Hankel expansion including the
  exponentially small companion term, truncated at its smallest term.

Both paths are vectorized over numpy arrays.
"""

import numpy as np

from .errors import BesselRangeError

SERIES_RADIUS = 20.0
MAX_ARGUMENT = 700.0

_SPLITTER = 134217729.0  # 2**27 + 1
_MAX_SERIES_TERMS = 200
_MAX_ASYMPTOTIC_TERMS = 80


# -- double-double kernels (arrays of hi/lo pairs) ---------------------------

def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    s, e = _quick_two_sum(s, e + t)
    return _quick_two_sum(s, e + f)


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    return _quick_two_sum(p, e + (ah * bl + al * bh))


def _dd_div_scalar(ah, al, b):
    q1 = ah / b
    p, e = _two_prod(q1, b)
    q2 = ((ah - p) - e + al) / b
    return _quick_two_sum(q1, q2)


def _i0_series(z):
    """Power series for I0(z), double-double accumulation. ``z`` complex array."""
    x = z.real.astype(float)
    y = z.imag.astype(float)
    # w = z**2 / 4, exact to double-double
    xx_h, xx_l = _two_prod(x, x)
    yy_h, yy_l = _two_prod(y, y)
    wr_h, wr_l = _dd_add(xx_h, xx_l, -yy_h, -yy_l)
    wr_h, wr_l = 0.25 * wr_h, 0.25 * wr_l
    wi_h, wi_l = _two_prod(x, y)
    wi_h, wi_l = 0.5 * wi_h, 0.5 * wi_l

    zero = np.zeros_like(x)
    tr_h, tr_l, ti_h, ti_l = np.ones_like(x), zero.copy(), zero.copy(), zero.copy()
    sr_h, sr_l, si_h, si_l = np.ones_like(x), zero.copy(), zero.copy(), zero.copy()
    peak = np.ones_like(x)
    for k in range(1, _MAX_SERIES_TERMS):
        a_h, a_l = _dd_mul(tr_h, tr_l, wr_h, wr_l)
        b_h, b_l = _dd_mul(ti_h, ti_l, wi_h, wi_l)
        c_h, c_l = _dd_mul(tr_h, tr_l, wi_h, wi_l)
        d_h, d_l = _dd_mul(ti_h, ti_l, wr_h, wr_l)
        tr_h, tr_l = _dd_add(a_h, a_l, -b_h, -b_l)
        ti_h, ti_l = _dd_add(c_h, c_l, d_h, d_l)
        kk = float(k * k)
        tr_h, tr_l = _dd_div_scalar(tr_h, tr_l, kk)
        ti_h, ti_l = _dd_div_scalar(ti_h, ti_l, kk)
        sr_h, sr_l = _dd_add(sr_h, sr_l, tr_h, tr_l)
        si_h, si_l = _dd_add(si_h, si_l, ti_h, ti_l)
        mag = np.hypot(tr_h, ti_h)
        peak = np.maximum(peak, mag)
        if np.all(mag <= 1e-33 * peak):
            break
    return (sr_h + sr_l) + 1j * (si_h + si_l)


def _i0e_asymptotic(z):
    """exp(-|Re z|) * I0(z) from the Hankel expansion, for |z| > SERIES_RADIUS."""
    z = np.where(z.real < 0, -z, z)  # I0 is even
    sign = np.where(z.imag >= 0, 1j, -1j)
    s_grow = np.ones_like(z)
    s_decay = np.ones_like(z)
    term = np.ones_like(z)
    prev = np.ones(z.shape)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, _MAX_ASYMPTOTIC_TERMS):
        term = term * ((2 * k - 1) ** 2 / (8.0 * k)) / z
        mag = np.abs(term)
        active &= mag < prev
        if not active.any():
            break
        s_grow = np.where(active, s_grow + term, s_grow)
        s_decay = np.where(active, s_decay + (-1) ** k * term, s_decay)
        prev = mag
        active &= mag > 1e-18 * np.abs(s_grow)
    phase = np.exp(1j * z.imag)
    return (phase * s_grow + sign * np.exp(-2.0 * z.real) / phase * s_decay) / np.sqrt(2 * np.pi * z)


def bessel_i0e_complex(z):
    """Exponentially scaled ``exp(-|Re z|) * I0(z)`` for complex ``z``.

    No upper bound on ``|z|``; this is the overflow-free form used when the
    von Mises concentration is large.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) <= SERIES_RADIUS
    if small.any():
        zs = z[small]
        out[small] = _i0_series(zs) * np.exp(-np.abs(zs.real))
    if (~small).any():
        out[~small] = _i0e_asymptotic(z[~small])
    return out if out.ndim else out[()]


def bessel_i0_complex(z):
    """I0(z) for complex ``z`` (scalar or array), ``|z| <= 700``.

    Raises:
        BesselRangeError: if any ``|z|`` exceeds ``MAX_ARGUMENT``, or the
            result is not finite.
    """
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise BesselRangeError("non-finite Bessel argument")
    if np.any(np.abs(z) > MAX_ARGUMENT):
        raise BesselRangeError(f"|z| exceeds {MAX_ARGUMENT}: max |z| = {np.abs(z).max():.6g}")
    out = bessel_i0e_complex(z) * np.exp(np.abs(z.real))
    if not np.all(np.isfinite(out)):
        raise BesselRangeError("I0 overflowed")
    return out


def bessel_i0_real(x):
    """I0(x) for real ``x`` with ``|x| <= 700``. Returns float or float array."""
    x = np.asarray(x, dtype=float)
    return bessel_i0_complex(x).real


def bessel_i0e_real(x):
    """``exp(-|x|) * I0(x)`` for real ``x`` of any magnitude."""
    x = np.asarray(x, dtype=float)
    return bessel_i0e_complex(x).real


def von_mises_characteristic_integral(x, y):
    r"""Mean of ``exp(x cos(phi) + y sin(phi))`` over one period.

    Evaluates :math:`\frac{1}{2\pi}\int_{-\pi}^{\pi} e^{x\cos\phi + y\sin\phi}\,d\phi
    = I_0(\sqrt{x^2 + y^2})` for complex ``x`` and ``y``. The result does not
    depend on the square-root branch because I0 is even.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return bessel_i0_complex(np.sqrt(x * x + y * y))


def von_mises_characteristic_ratio(x, y, kappa):
    """``von_mises_characteristic_integral(x, y) / I0(kappa)`` without overflow."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    z = np.sqrt(x * x + y * y)
    scale = np.exp(np.abs(z.real) - kappa)
    return bessel_i0e_complex(z) / bessel_i0e_real(kappa) * scale
