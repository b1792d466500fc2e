"""Monte Carlo channel realizations and empirical covariance estimation.

Each trial draws ``Q`` scatterer locations from a power location spectrum,
i.i.d. phases uniform on [-pi, pi) and (for the radar-equation model)
exponentially distributed RCS values, and forms the channel vector

    h_n = sqrt(beta0 / Q) * sum_q (r_q / r_{q,n}) exp(-j 2pi/lambda (t_q + r_{q,n}) + j psi_q).

Randomness is organized in fixed blocks of trials: block ``b`` is generated
from ``SeedSequence([seed, b])`` and every scatterer consumes exactly three
uniforms (location, phase, RCS).  Trial ``t`` is therefore reproducible from
``(seed, t)`` alone, whether drawn individually or inside a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .correlation import SINGULARITY_DISTANCE, CorrelationMatrix, _hermitize, pairwise_sum
from .errors import SingularityError, ValidationError
from .geometry import ArrayGeometry, TransmitterLocation

UNIFORMS_PER_SCATTERER = 3
_BLOCK_UNIFORM_BUDGET = 2 ** 16
_BATCH_BUDGET = 2 ** 21  # trials * scatterers * elements per vectorized batch
_MAX_RESAMPLE = 8


@dataclass(frozen=True)
class UnitGain:
    """g_q = 1 for every scatterer."""


@dataclass(frozen=True)
class ExponentialRcs:
    """Radar cross sections i.i.d. exponential with the given mean (m^2)."""

    mean: float

    def __post_init__(self):
        if not self.mean > 0:
            raise ValidationError(f"mean RCS must be positive, got {self.mean}")


RcsModel = Union[UnitGain, ExponentialRcs]


@dataclass(frozen=True)
class MonteCarloSpec:
    num_scatterers: int = 1
    num_trials: int = 10_000
    seed: int = 0
    rcs_model: RcsModel = field(default_factory=UnitGain)
    beta0: float = 1.0

    def __post_init__(self):
        if self.num_scatterers < 1 or self.num_trials < 1:
            raise ValidationError("num_scatterers and num_trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")
        if not self.beta0 > 0:
            raise ValidationError("beta0 must be positive")

    @property
    def block_trials(self) -> int:
        return max(1, _BLOCK_UNIFORM_BUDGET // self.num_scatterers)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    coefficients: np.ndarray
    trial_index: int = -1

    def __post_init__(self):
        if not np.all(np.isfinite(self.coefficients)):
            raise ValidationError("channel realization has non-finite coefficients")


@dataclass(frozen=True, eq=False)
class ScattererDraw:
    """Per-trial scatterer draws, arrays of shape (trials, Q)."""

    x: np.ndarray
    y: np.ndarray
    phase: np.ndarray
    rcs: np.ndarray


@dataclass(frozen=True, eq=False)
class MonteCarloEstimate:
    """Empirical correlation with per-entry standard errors."""

    matrix: CorrelationMatrix
    standard_error: np.ndarray
    num_trials: int


def _block_uniforms(spec: MonteCarloSpec, block: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, block]))
    return rng.random((spec.block_trials, spec.num_scatterers, UNIFORMS_PER_SCATTERER))


def _draw_from_uniforms(pls, spec: MonteCarloSpec, u: np.ndarray) -> ScattererDraw:
    x, y = pls.locations_from_uniforms(u[..., 0])
    phase = -np.pi + 2 * np.pi * u[..., 1]
    if isinstance(spec.rcs_model, ExponentialRcs):
        rcs = -spec.rcs_model.mean * np.log1p(-u[..., 2])
    else:
        rcs = np.ones_like(u[..., 2])
    return ScattererDraw(np.asarray(x, float), np.asarray(y, float), phase, rcs)


def _resample_close(pls, geom: ArrayGeometry, spec: MonteCarloSpec, draw: ScattererDraw,
                    first_trial: int) -> ScattererDraw:
    """Redraw scatterer locations that fall on an element (bounded retries).

    Redraws for trial ``t`` come from ``SeedSequence([seed, t, attempt, 1])``
    so they do not depend on batching.
    """
    limit = SINGULARITY_DISTANCE * geom.wavelength
    yn = geom.indices * geom.spacing
    x, y = draw.x.copy(), draw.y.copy()
    for attempt in range(1, _MAX_RESAMPLE + 1):
        bad = ((np.abs(x) <= limit)[..., None] & (np.abs(y[..., None] - yn) <= limit)).any(axis=-1)
        if not bad.any():
            return ScattererDraw(x, y, draw.phase, draw.rcs)
        for row in np.flatnonzero(bad.any(axis=1)):
            rng = np.random.default_rng(np.random.SeedSequence([spec.seed, first_trial + int(row), attempt, 1]))
            cols = bad[row]
            nx, ny = pls.locations_from_uniforms(rng.random(int(cols.sum())))
            x[row, cols], y[row, cols] = nx, ny
    raise SingularityError(f"scatterer kept landing on an element after {_MAX_RESAMPLE} redraws")


def draw_scatterers(pls, spec: MonteCarloSpec, trial_index: int) -> ScattererDraw:
    """Scatterer draws of a single trial, shape (1, Q)."""
    if trial_index < 0:
        raise ValidationError("trial_index must be non-negative")
    block, offset = divmod(trial_index, spec.block_trials)
    u = _block_uniforms(spec, block)[offset:offset + 1]
    return _draw_from_uniforms(pls, spec, u)


def _channels(draw: ScattererDraw, geom: ArrayGeometry, spec: MonteCarloSpec,
              tx: TransmitterLocation | None, radar: bool) -> np.ndarray:
    """Channel matrix (trials, N) for a batch of draws."""
    k = geom.wavenumber
    yn = geom.indices * geom.spacing
    x, y = draw.x[..., None], draw.y[..., None]
    rn = np.hypot(x, y - yn)
    if tx is not None:
        ex, ey = tx.cartesian
        t = np.hypot(draw.x - ex, draw.y - ey)[..., None]
    else:
        t = 0.0
    phasor = np.exp(-1j * k * (t + rn) + 1j * draw.phase[..., None])
    if radar:
        amp = geom.wavelength * np.sqrt(draw.rcs)[..., None] / ((4 * np.pi) ** 1.5 * t * rn)
        return (amp * phasor).sum(axis=1)
    r = np.hypot(draw.x, draw.y)[..., None]
    return math.sqrt(spec.beta0 / spec.num_scatterers) * ((r / rn) * phasor).sum(axis=1)


def draw_channel(pls, geom: ArrayGeometry, spec: MonteCarloSpec, trial_index: int,
                 tx: TransmitterLocation | None = None) -> ChannelRealization:
    """One realization normalized to reference-element power beta0.

    Without ``tx`` the transmitter-to-scatterer phase is omitted; it is a
    per-scatterer constant that the uniform phase absorbs.
    """
    draw = _resample_close(pls, geom, spec, draw_scatterers(pls, spec, trial_index), trial_index)
    return ChannelRealization(_channels(draw, geom, spec, tx, radar=False)[0], trial_index)


def draw_channel_rcs(pls, tx: TransmitterLocation, geom: ArrayGeometry, spec: MonteCarloSpec,
                     trial_index: int) -> ChannelRealization:
    """One realization from the bistatic radar equation with random RCS."""
    if not isinstance(spec.rcs_model, ExponentialRcs):
        raise ValidationError("draw_channel_rcs requires an ExponentialRcs model")
    draw = _resample_close(pls, geom, spec, draw_scatterers(pls, spec, trial_index), trial_index)
    return ChannelRealization(_channels(draw, geom, spec, tx, radar=True)[0], trial_index)


def empirical_correlation(realizations: Sequence[ChannelRealization], geom: ArrayGeometry | None = None,
                          beta0: float = 1.0) -> CorrelationMatrix:
    """Sample mean of h h^H over the given realizations."""
    if len(realizations) == 0:
        raise ValidationError("empirical_correlation needs at least one realization")
    h = np.stack([r.coefficients for r in realizations])
    if geom is None:
        geom = ArrayGeometry(h.shape[1], 1.0, 2.0)
    elif geom.num_elements != h.shape[1]:
        raise ValidationError("realization length does not match the geometry")
    acc = h.T @ h.conj() / h.shape[0]
    return CorrelationMatrix(_hermitize(acc), beta0, "monte-carlo", geom, None, True,
                             dict(mc_num_trials=h.shape[0]))


def estimate_correlation(pls, geom: ArrayGeometry, spec: MonteCarloSpec,
                         tx: TransmitterLocation | None = None) -> MonteCarloEstimate:
    """Stream ``spec.num_trials`` trials into an empirical correlation matrix.

    Partial sums are combined in a fixed pairwise order. The standard error
    of entry (n, m) is estimated from the sample second moment of
    ``|h_n h_m^*|``.
    """
    radar = isinstance(spec.rcs_model, ExponentialRcs)
    if radar and tx is None:
        raise ValidationError("the radar-equation model needs a transmitter location")
    total = spec.num_trials
    batch = max(1, _BATCH_BUDGET // (spec.num_scatterers * geom.num_elements))

    def partials():
        for start in range(0, total, spec.block_trials):
            block = start // spec.block_trials
            u = _block_uniforms(spec, block)[: min(spec.block_trials, total - start)]
            for b0 in range(0, u.shape[0], batch):
                draw = _draw_from_uniforms(pls, spec, u[b0:b0 + batch])
                draw = _resample_close(pls, geom, spec, draw, start + b0)
                h = _channels(draw, geom, spec, tx, radar)
                p = np.abs(h) ** 2
                yield np.stack([h.T @ h.conj(), (p.T @ p).astype(complex)])

    first, second = pairwise_sum(partials())
    mean = first / total
    var = np.maximum(second.real / total - np.abs(mean) ** 2, 0.0)
    params = dict(mc_num_scatterers=spec.num_scatterers, mc_num_trials=total, seed=spec.seed,
                  rcs_model="exponential" if radar else "unit-gain")
    if radar:
        params["rcs_mean_m2"] = spec.rcs_model.mean
    beta0 = spec.beta0
    matrix = CorrelationMatrix(_hermitize(mean), beta0, "monte-carlo", geom, None, True, params)
    return MonteCarloEstimate(matrix, np.sqrt(var / total), total)


def write_realizations_csv(realizations: Sequence[ChannelRealization], geom: ArrayGeometry, path) -> None:
    """Write rows ``trial,n,re,im``."""
    with open(path, "w") as fh:
        fh.write("trial,n,re,im\n")
        for real in realizations:
            for n, h in zip(geom.indices, real.coefficients):
                fh.write(f"{real.trial_index},{n},{float(h.real)!r},{float(h.imag)!r}\n")
