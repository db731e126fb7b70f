"""Quadrature-variance model of a below-threshold OPA and pointwise transforms.

All variances are normalized to the vacuum (shot-noise) level, so a coherent
or vacuum state has variance 1 in every quadrature and a minimum-uncertainty
state satisfies ``v1 * v2 == 1``. Angles are radians throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AboveThresholdError, DomainError, NonPhysicalTraceError

SPEED_OF_LIGHT = 2.998e8  # m/s, three significant digits like the cavity data

_DB_PER_NEPER_POWER = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class CavityConstants:
    """Coupler transmissivity, round-trip loss and optical round-trip length."""

    coupler_transmissivity: float
    round_trip_loss: float
    round_trip_length: float  # m, optical path

    def __post_init__(self):
        T, L, l = self.coupler_transmissivity, self.round_trip_loss, self.round_trip_length
        if not 0.0 < T < 1.0:
            raise DomainError(f"coupler_transmissivity must lie in (0, 1), got {T!r}")
        if not 0.0 <= L < 1.0:
            raise DomainError(f"round_trip_loss must lie in [0, 1), got {L!r}")
        if not T + L < 1.0:
            raise DomainError(f"coupler_transmissivity + round_trip_loss must be < 1, got {T + L!r}")
        if not (l > 0.0 and math.isfinite(l)):
            raise DomainError(f"round_trip_length must be positive and finite, got {l!r}")


@dataclass(frozen=True)
class SqueezerParams:
    """Fitted source parameters plus the fixed cavity constants."""

    efficiency: float
    threshold_power: float  # W
    phase_jitter: float  # rad, rms
    cavity: CavityConstants = field(
        default_factory=lambda: CavityConstants(0.10, 0.001, 0.0798)
    )

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"efficiency must lie in [0, 1], got {self.efficiency!r}")
        if not (self.threshold_power > 0.0 and math.isfinite(self.threshold_power)):
            raise DomainError(f"threshold_power must be positive, got {self.threshold_power!r}")
        if not 0.0 <= self.phase_jitter < math.pi / 2:
            raise DomainError(f"phase_jitter must lie in [0, pi/2), got {self.phase_jitter!r}")


@dataclass(frozen=True)
class VariancePair:
    """Squeezed (``v1``) and anti-squeezed (``v2``) variances, vacuum = 1."""

    v1: float
    v2: float

    def __post_init__(self):
        if not (self.v1 > 0.0 and self.v2 > 0.0):
            raise DomainError(f"variances must be positive, got ({self.v1!r}, {self.v2!r})")


@dataclass(frozen=True)
class OperatingPoint:
    pump_power: float  # W
    frequency: float  # Hz, sideband (Fourier) frequency

    def __post_init__(self):
        if not self.pump_power >= 0.0:
            raise DomainError(f"pump_power must be >= 0, got {self.pump_power!r}")
        if not self.frequency >= 0.0:
            raise DomainError(f"frequency must be >= 0, got {self.frequency!r}")


REFERENCE_CAVITY = CavityConstants(0.10, 0.001, 0.0798)
REFERENCE_PARAMS = SqueezerParams(0.965, 0.221, math.radians(0.66), REFERENCE_CAVITY)


def decay_rate(cavity: CavityConstants) -> float:
    """Cavity decay rate ``c (T + L) / l`` in 1/s."""
    if not isinstance(cavity, CavityConstants):
        raise DomainError("decay_rate expects CavityConstants")
    return SPEED_OF_LIGHT * (cavity.coupler_transmissivity + cavity.round_trip_loss) / cavity.round_trip_length


def _check_below_threshold(pump_power, threshold_power):
    p = np.asarray(pump_power, dtype=float)
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise DomainError("pump power must be finite and >= 0")
    if np.any(p >= threshold_power):
        worst = float(np.max(p))
        raise AboveThresholdError(
            f"pump power {worst!r} W is above threshold {threshold_power!r} W"
        )


def raw_variances(efficiency, pump_ratio_sqrt, detuning):
    """Loss-degraded OPA variances before phase jitter.

    ``pump_ratio_sqrt`` is sqrt(P / P_thr) and ``detuning`` is 2 pi f / kappa.
    Written without the ``1 - eta * gain`` subtraction so the squeezed
    variance keeps full relative precision close to threshold.
    Works elementwise on arrays.
    """
    x = pump_ratio_sqrt
    w2 = 4.0 * detuning * detuning
    lower = (1.0 - x) ** 2 + w2
    d_sqz = (1.0 + x) ** 2 + w2
    v1 = (lower + 4.0 * x * (1.0 - efficiency)) / d_sqz
    v2 = (lower + 4.0 * efficiency * x) / lower
    # v1 <= 1 holds exactly; drop the last-ulp rounding excess at eta = 0
    return np.minimum(v1, 1.0), v2


def opa_variance_pair(params: SqueezerParams, op: OperatingPoint) -> VariancePair:
    """Squeezed/anti-squeezed variances of the OPA output, without jitter."""
    _check_below_threshold(op.pump_power, params.threshold_power)
    x = math.sqrt(op.pump_power / params.threshold_power)
    detuning = 2.0 * math.pi * op.frequency / decay_rate(params.cavity)
    v1, v2 = raw_variances(params.efficiency, x, detuning)
    return VariancePair(float(v1), float(v2))


def _jitter_weight(theta):
    # sin^2 form keeps v1' >= v1 and v2' <= v2 exactly in floating point.
    s = math.sin(theta)
    return s * s


def apply_phase_jitter(pair: VariancePair, theta_fluc: float) -> VariancePair:
    """Mix the two quadratures as a detection phase offset of ``theta_fluc``.

    ``theta_fluc = pi/2`` is accepted and swaps the components.
    """
    if not 0.0 <= theta_fluc <= math.pi / 2:
        raise DomainError(f"phase jitter must lie in [0, pi/2], got {theta_fluc!r}")
    if theta_fluc == 0.0:
        return pair
    if theta_fluc == math.pi / 2:
        return VariancePair(pair.v2, pair.v1)
    delta = (pair.v2 - pair.v1) * _jitter_weight(theta_fluc)
    return VariancePair(pair.v1 + delta, pair.v2 - delta)


def apply_efficiency(pair: VariancePair, efficiency: float) -> VariancePair:
    """Pass both quadratures through a loss channel of transmission ``efficiency``."""
    if not 0.0 <= efficiency <= 1.0:
        raise DomainError(f"efficiency must lie in [0, 1], got {efficiency!r}")
    return VariancePair(
        1.0 + efficiency * (pair.v1 - 1.0),
        1.0 + efficiency * (pair.v2 - 1.0),
    )


def variance_at_angle(pair: VariancePair, theta: float) -> float:
    """Variance of ``X1 cos(theta) + X2 sin(theta)`` for uncorrelated quadratures."""
    return pair.v1 + (pair.v2 - pair.v1) * _jitter_weight(theta)


def to_db(v):
    """Linear variance (vacuum = 1) to dB; accepts scalars or arrays."""
    arr = np.asarray(v, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("dB conversion requires strictly positive values")
    out = 10.0 * np.log10(arr)
    return float(out) if out.ndim == 0 else out


def from_db(x):
    """dB relative to vacuum back to linear variance."""
    out = np.power(10.0, np.asarray(x, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def normalize_and_correct(meas, vacuum, dark=0.0):
    """Dark-noise-subtracted, vacuum-normalized variance.

    All three inputs are raw linear powers on a common scale; scalars and
    equal-length arrays both work.
    """
    m = np.asarray(meas, dtype=float)
    vac = np.asarray(vacuum, dtype=float)
    d = np.asarray(dark, dtype=float)
    if np.any(d < 0.0):
        raise NonPhysicalTraceError("dark-noise power must be >= 0")
    if np.any(~(vac > d)):
        raise NonPhysicalTraceError("vacuum reference must exceed the dark-noise level")
    if np.any(~(m > d)):
        raise NonPhysicalTraceError("measured power must exceed the dark-noise level")
    out = (m - d) / (vac - d)
    return float(out) if out.ndim == 0 else out


def visibility_to_efficiency(visibility: float) -> float:
    """Homodyne efficiency factor from fringe visibility (mode mismatch enters squared)."""
    if not 0.0 <= visibility <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {visibility!r}")
    return visibility * visibility


def uncertainty_product(pair: VariancePair) -> float:
    return pair.v1 * pair.v2


def db_sigma_from_linear(mean, sigma):
    """First-order propagation of a linear-power std to dB at ``mean``."""
    return _DB_PER_NEPER_POWER * sigma / mean
