"""Seeded synthetic measurements and the trace reduction applied to them.

Noise is multiplicative Gaussian scatter on linear power. All randomness is
drawn from numpy's Philox counter-based generator keyed by the single seed
in :class:`TraceSpec`; sub-streams for individual traces are spawned from a
``SeedSequence`` so results do not depend on evaluation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InputError
from .estimation import ANTISQUEEZED, SQUEEZED, Dataset, MeasurementPoint
from .quadrature import (
    OperatingPoint,
    SqueezerParams,
    apply_phase_jitter,
    db_sigma_from_linear,
    normalize_and_correct,
    opa_variance_pair,
    to_db,
)

PRNG_NAME = "numpy.random.Philox-4x64"
PRNG_VERSION = 1
TRACE_KINDS = ("vacuum", "squeezed", "antisqueezed", "dark")
DEFAULT_RELATIVE_SCATTER = 0.0715  # 10*log10(1.0715) = 0.30 dB


@dataclass(frozen=True)
class TraceSpec:
    n_points: int = 1000
    rbw: float = 200e3  # Hz
    vbw: float = 200.0  # Hz
    n_averages: int = 1
    relative_scatter: float | None = DEFAULT_RELATIVE_SCATTER  # None: derive from rbw/vbw
    dark_level: float = 0.0  # linear power relative to vacuum
    seed: int = 0

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise DomainError(f"n_points must be an integer >= 2, got {self.n_points!r}")
        if not self.rbw > 0.0 or not self.vbw > 0.0:
            raise DomainError("rbw and vbw must be positive")
        if int(self.n_averages) != self.n_averages or self.n_averages < 1:
            raise DomainError(f"n_averages must be an integer >= 1, got {self.n_averages!r}")
        if self.relative_scatter is not None and not self.relative_scatter >= 0.0:
            raise DomainError(f"relative_scatter must be >= 0, got {self.relative_scatter!r}")
        if not 0.0 <= self.dark_level < 1.0:
            raise DomainError(f"dark_level must lie in [0, 1), got {self.dark_level!r}")
        if not 0 <= int(self.seed) < 2 ** 64 or int(self.seed) != self.seed:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")

    @property
    def scatter(self) -> float:
        """Relative scatter in use; derived as ``1/sqrt(RBW / (2 VBW))`` when unset."""
        if self.relative_scatter is not None:
            return self.relative_scatter
        return 1.0 / math.sqrt(self.rbw / (2.0 * self.vbw))


@dataclass(frozen=True)
class Trace:
    values: np.ndarray  # linear power relative to vacuum, index = position
    kind: str
    spec: TraceSpec = field(default_factory=TraceSpec)

    def __post_init__(self):
        if self.kind not in TRACE_KINDS:
            raise DomainError(f"unknown trace kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if self.kind == "dark":
            if np.any(vals < 0.0):
                raise DomainError("dark trace values must be >= 0")
        elif np.any(~(vals > 0.0)):
            raise DomainError(f"{self.kind} trace values must be > 0")

    @property
    def samples(self):
        return list(enumerate(self.values.tolist()))

    def __len__(self):
        return len(self.values)


def generator(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def _child_seeds(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


def _noisy(level, n_points, scatter, n_averages, rng):
    """Mean of ``n_averages`` independent multiplicative-noise sweeps."""
    if scatter == 0.0:
        return np.full(n_points, float(level))
    draws = rng.standard_normal((n_averages, n_points))
    # Clip far tail so a linear power can never go non-positive.
    factor = np.clip(1.0 + scatter * draws, 1e-6, None).mean(axis=0)
    return level * factor


def model_pair(params: SqueezerParams, pump_power: float, frequency: float):
    pair = opa_variance_pair(params, OperatingPoint(pump_power, frequency))
    return apply_phase_jitter(pair, params.phase_jitter)


def _level(params, op, tag):
    if tag == "vacuum":
        return 1.0
    if tag == "dark":
        return 0.0
    pair = model_pair(params, op.pump_power, op.frequency)
    return pair.v1 if tag == "squeezed" else pair.v2


def synth_zero_span(params: SqueezerParams, op: OperatingPoint, tag: str, spec: TraceSpec,
                    seed=None) -> Trace:
    """Raw zero-span trace (model variance plus dark level) with seeded scatter.

    ``seed`` overrides ``spec.seed``; it may be a ``SeedSequence``.
    """
    if tag not in TRACE_KINDS:
        raise DomainError(f"unknown trace kind {tag!r}")
    rng = generator(spec.seed if seed is None else seed)
    if tag == "dark":
        values = _noisy(spec.dark_level, spec.n_points, spec.scatter, spec.n_averages, rng)
    else:
        level = _level(params, op, tag)
        values = _noisy(level, spec.n_points, spec.scatter, spec.n_averages, rng) + spec.dark_level
    return Trace(values, tag, spec)


def reduce_trace(trace: Trace):
    """Straight-line fit to the linear samples; returns (mean_db, sigma_db).

    The mean is the fitted line at the trace midpoint; sigma is the residual
    standard deviation, converted to dB at that mean.
    """
    y = np.asarray(trace.values, dtype=float)
    n = len(y)
    if n < 2:
        raise DomainError("trace reduction needs at least two samples")
    if trace.kind != "dark" and np.any(~(y > 0.0)):
        raise DomainError("non-dark trace contains non-positive samples")
    idx = np.arange(n, dtype=float)
    slope, intercept = np.polyfit(idx, y, 1)
    mid = intercept + slope * (n - 1) / 2.0
    resid = y - (intercept + slope * idx)
    dof = n - 2
    std = math.sqrt(float(resid @ resid) / dof) if dof > 0 else 0.0
    return to_db(mid), float(db_sigma_from_linear(mid, std))


def synth_pump_sweep(params: SqueezerParams, pump_powers, frequency: float, spec: TraceSpec,
                     pump_jitter_rel: float = 0.03, level_scatter_db: float | None = None,
                     pump_noise: bool | None = None, sigma_floor_db: float = 0.01) -> Dataset:
    """Squeezed and anti-squeezed points at each pump power, as in a pump sweep.

    For every power one zero-span trace per quadrature is generated and
    reduced; the reduced sigma becomes the point's error bar. Repeated
    acquisitions at nominally equal settings scatter by more than the
    trace mean's standard error, so each point's level is additionally
    offset by Gaussian noise of ``level_scatter_db`` (default: the
    reduced trace sigma). The recorded pump power deviates from the true
    one by ``pump_jitter_rel`` (relative, Gaussian) when ``pump_noise`` is
    set; by default this follows whether the trace spec is noisy.
    """
    powers = [float(p) for p in pump_powers]
    if not powers:
        raise InputError("pump sweep needs at least one pump power")
    if not 0.0 <= pump_jitter_rel < 1.0:
        raise DomainError(f"pump_jitter_rel must lie in [0, 1), got {pump_jitter_rel!r}")
    if pump_noise is None:
        pump_noise = spec.scatter > 0.0
    for p in powers:
        if not 0.0 <= p < params.threshold_power:
            raise DomainError(f"pump power {p!r} W outside [0, P_thr)")

    children = _child_seeds(spec.seed, len(powers))
    points = []
    for p_true, child in zip(powers, children):
        trace_seeds = child.spawn(3)
        offsets = generator(trace_seeds[2]).standard_normal(3)
        op = OperatingPoint(p_true, frequency)
        p_rec = p_true * (1.0 + pump_jitter_rel * offsets[2]) if pump_noise else p_true
        p_rec = max(p_rec, 0.0)
        for k, tag in enumerate((SQUEEZED, ANTISQUEEZED)):
            trace = synth_zero_span(params, op, tag, spec, seed=trace_seeds[k])
            if spec.dark_level > 0.0:
                corrected = normalize_and_correct(trace.values, 1.0 + spec.dark_level, spec.dark_level)
                trace = Trace(corrected, tag, spec)
            mean_db, sigma_db = reduce_trace(trace)
            level_sd = sigma_db if level_scatter_db is None else level_scatter_db
            value = mean_db + level_sd * offsets[k]
            points.append(MeasurementPoint(
                pump_power=p_rec,
                sigma_pump=pump_jitter_rel * p_rec,
                frequency=frequency,
                quadrature=tag,
                value_db=float(value),
                sigma_db=max(sigma_db, sigma_floor_db),
            ))
    meta = {
        "generator": "synth_pump_sweep",
        "seed": str(spec.seed),
        "prng": f"{PRNG_NAME} v{PRNG_VERSION}",
        "relative_scatter": repr(spec.scatter),
        "pump_jitter_rel": repr(pump_jitter_rel),
    }
    return Dataset(points, params.cavity, meta)


def frequency_grid(lo: float, hi: float, n: int) -> np.ndarray:
    if not (lo > 0.0 and math.isfinite(hi)):
        raise DomainError("frequency range must start above 0 Hz")
    if int(n) != n or n < 1:
        raise DomainError(f"number of frequencies must be >= 1, got {n!r}")
    if hi < lo or (n > 1 and hi == lo):
        raise DomainError("frequency range is empty")
    return np.linspace(lo, hi, int(n))


def synth_spectrum(params: SqueezerParams, pump_power: float, f_range, spec: TraceSpec | None = None):
    """(f, squeezed_dB, antisqueezed_dB) rows over a linear frequency grid.

    Without a spec, or with zero scatter, the rows are the exact model.
    Otherwise each frequency bin carries the average of ``n_averages``
    noisy sweeps; the output is dark-corrected and vacuum-normalized.
    """
    lo, hi, n = f_range
    freqs = frequency_grid(lo, hi, n)
    sqz = np.empty(len(freqs))
    asq = np.empty(len(freqs))
    for i, f in enumerate(freqs):
        pair = model_pair(params, pump_power, float(f))
        sqz[i], asq[i] = pair.v1, pair.v2
    if spec is not None and spec.scatter > 0.0:
        rng = generator(spec.seed)
        sqz = _noisy(1.0, len(freqs), spec.scatter, spec.n_averages, rng) * sqz
        asq = _noisy(1.0, len(freqs), spec.scatter, spec.n_averages, rng) * asq
    return [(float(f), float(a), float(b)) for f, a, b in zip(freqs, to_db(sqz), to_db(asq))]
