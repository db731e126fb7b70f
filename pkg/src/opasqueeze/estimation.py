"""Weighted nonlinear least-squares characterization of a squeezer.

Fits detection efficiency, threshold power and rms phase jitter to
pump-power sweeps of squeezed and anti-squeezed variances, with the cavity
constants held fixed. Pump-power uncertainties enter through the effective
variance method::

    sigma_eff**2 = sigma_value**2 + (d model / d P * sigma_pump)**2

The optimizer is a Levenberg-Marquardt loop on an unconstrained
reparameterization that keeps every parameter inside its physical range
and the threshold above every recorded pump power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .errors import AboveThresholdError, DomainError, IllConditionedError
from .quadrature import (
    CavityConstants,
    OperatingPoint,
    SqueezerParams,
    apply_phase_jitter,
    decay_rate,
    from_db,
    opa_variance_pair,
    raw_variances,
    to_db,
)

PARAM_NAMES = ("efficiency", "threshold_power", "phase_jitter")
SQUEEZED, ANTISQUEEZED = "squeezed", "antisqueezed"
_DB = 10.0 / math.log(10.0)


@dataclass(frozen=True)
class MeasurementPoint:
    pump_power: float  # W
    sigma_pump: float  # W
    frequency: float  # Hz
    quadrature: str  # "squeezed" | "antisqueezed"
    value_db: float  # dB relative to vacuum
    sigma_db: float  # dB

    def __post_init__(self):
        if self.quadrature not in (SQUEEZED, ANTISQUEEZED):
            raise DomainError(f"quadrature must be 'squeezed' or 'antisqueezed', got {self.quadrature!r}")
        if not self.pump_power >= 0.0:
            raise DomainError(f"pump_power must be >= 0, got {self.pump_power!r}")
        if not self.sigma_pump >= 0.0:
            raise DomainError(f"sigma_pump must be >= 0, got {self.sigma_pump!r}")
        if not self.sigma_db > 0.0:
            raise DomainError(f"sigma_db must be > 0, got {self.sigma_db!r}")
        if not (self.frequency > 0.0 and math.isfinite(self.frequency)):
            raise DomainError(f"frequency must be positive, got {self.frequency!r}")
        if not math.isfinite(self.value_db):
            raise DomainError("value_db must be finite")


@dataclass(frozen=True)
class Dataset:
    points: tuple
    cavity: CavityConstants
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "metadata", dict(self.metadata))

    def __len__(self):
        return len(self.points)

    def arrays(self):
        """Column arrays (P, sigma_P, f, is_squeezed, value_db, sigma_db)."""
        pts = self.points
        return (
            np.array([p.pump_power for p in pts], dtype=float),
            np.array([p.sigma_pump for p in pts], dtype=float),
            np.array([p.frequency for p in pts], dtype=float),
            np.array([p.quadrature == SQUEEZED for p in pts], dtype=bool),
            np.array([p.value_db for p in pts], dtype=float),
            np.array([p.sigma_db for p in pts], dtype=float),
        )


@dataclass(frozen=True)
class FitConfig:
    residual_domain: str = "db"  # "db" or "linear"
    max_iterations: int = 500
    initial_damping: float = 1e-3
    chi2_rtol: float = 1e-12
    step_tol: float = 1e-10
    gradient_tol: float = 1e-4  # relative to max(1, chi2)
    fixed: Mapping = field(default_factory=dict)  # name -> value in SI units
    initial: Mapping = field(default_factory=dict)  # name -> starting value

    def __post_init__(self):
        if self.residual_domain not in ("db", "linear"):
            raise DomainError(f"residual_domain must be 'db' or 'linear', got {self.residual_domain!r}")
        for name in list(self.fixed) + list(self.initial):
            if name not in PARAM_NAMES:
                raise DomainError(f"unknown fit parameter {name!r}")
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")


@dataclass
class FitResult:
    params: SqueezerParams
    covariance: np.ndarray  # scaled by chi2/dof, order (eta, P_thr, theta)
    std_errors: np.ndarray
    chi_squared: float
    dof: int
    converged: bool
    iterations: int
    covariance_unscaled: np.ndarray = None
    gradient_norm: float = 0.0
    free: tuple = PARAM_NAMES
    at_bound: tuple = ()
    chi2_history: list = field(default_factory=list)
    message: str = ""

    @property
    def reduced_chi_squared(self):
        return self.chi_squared / self.dof if self.dof > 0 else float("nan")


# --------------------------------------------------------------------------
# model and derivatives


def model_prediction(params: SqueezerParams, point: MeasurementPoint) -> float:
    """Jitter-mixed model variance of ``point``'s quadrature, in dB."""
    pair = opa_variance_pair(params, OperatingPoint(point.pump_power, point.frequency))
    pair = apply_phase_jitter(pair, params.phase_jitter)
    return to_db(pair.v1 if point.quadrature == SQUEEZED else pair.v2)


def _model(p, pump, freq, is_sqz, cavity, domain, derivatives=True):
    """Vectorized model with partials.

    Returns (model, d model / d (eta, P_thr, theta) as n x 3, d model / d P,
    d^2 model / d P d (eta, P_thr, theta) as n x 3). The last term is what
    makes the effective-variance weights parameter dependent.
    """
    eta, pthr, theta = p
    if np.any(pump >= pthr):
        raise AboveThresholdError(f"pump power {float(pump.max())!r} W at or above threshold {pthr!r} W")
    x = np.sqrt(pump / pthr)
    w = 2.0 * math.pi * freq / decay_rate(cavity)
    v1, v2 = raw_variances(eta, x, w)
    s = math.sin(theta) ** 2
    v1j = v1 + (v2 - v1) * s
    v2j = v2 - (v2 - v1) * s
    v = np.where(is_sqz, v1j, v2j)
    m = _DB * np.log(v) if domain == "db" else v
    if not derivatives:
        return m, None, None, None

    c = 4.0 * w * w
    d1 = (1.0 + x) ** 2 + c
    d2 = (1.0 - x) ** 2 + c
    g1, g2 = 4.0 * x / d1, 4.0 * x / d2
    num = 1.0 + c - x * x
    dg1 = 4.0 * num / d1 ** 2
    dg2 = 4.0 * num / d2 ** 2
    ddg1 = 4.0 * (-2.0 * x * d1 - 4.0 * (1.0 + x) * num) / d1 ** 3
    ddg2 = 4.0 * (-2.0 * x * d2 + 4.0 * (1.0 - x) * num) / d2 ** 3
    sin2 = math.sin(2.0 * theta)

    def mix(a1, a2):
        return np.where(is_sqz, a1 + (a2 - a1) * s, a2 - (a2 - a1) * s)

    def mix_theta(a1, a2):
        return np.where(is_sqz, (a2 - a1) * sin2, -(a2 - a1) * sin2)

    dv_eta = mix(-g1, g2)
    dv_x = mix(-eta * dg1, eta * dg2)
    dv_theta = mix_theta(v1, v2)
    dv_x_eta = mix(-dg1, dg2)
    dv_x_x = mix(-eta * ddg1, eta * ddg2)
    dv_x_theta = mix_theta(-eta * dg1, eta * dg2)

    if domain == "db":
        scale = _DB / v
        dscale = -_DB / v ** 2
    else:
        scale = np.ones_like(v)
        dscale = np.zeros_like(v)
    dx_pthr = -x / (2.0 * pthr)
    dv_pthr = dv_x * dx_pthr
    jac = np.column_stack([scale * dv_eta, scale * dv_pthr, scale * dv_theta])

    # dm/dP = dm/dx / (2 sqrt(P P_thr)); finite at P = 0 only through sigma_P = 0.
    dm_x = scale * dv_x
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(pump > 0.0, 1.0 / (2.0 * np.sqrt(pump * pthr)), 0.0)
    dm_pump = dm_x * k
    dm_x_eta = dscale * dv_eta * dv_x + scale * dv_x_eta
    dm_x_theta = dscale * dv_theta * dv_x + scale * dv_x_theta
    dm_x_pthr = dscale * dv_pthr * dv_x + scale * dv_x_x * dx_pthr
    hess_pump = np.column_stack([
        dm_x_eta * k,
        dm_x_pthr * k - dm_pump / (2.0 * pthr),
        dm_x_theta * k,
    ])
    return m, jac, dm_pump, hess_pump


def _vector(params: SqueezerParams):
    return (params.efficiency, params.threshold_power, params.phase_jitter)


def _observations(dataset: Dataset, domain: str):
    pump, sp, freq, is_sqz, y_db, s_db = dataset.arrays()
    if domain == "db":
        return pump, sp, freq, is_sqz, y_db, s_db
    y = from_db(y_db)
    return pump, sp, freq, is_sqz, np.asarray(y), np.asarray(y) * s_db / _DB


def effective_sigma(params: SqueezerParams, dataset: Dataset, domain: str = "db") -> np.ndarray:
    """Per-point sigma with the pump uncertainty folded in."""
    pump, sp, freq, is_sqz, _, sy = _observations(dataset, domain)
    _, _, dm_pump, _ = _model(_vector(params), pump, freq, is_sqz, dataset.cavity, domain)
    return np.sqrt(sy ** 2 + (dm_pump * sp) ** 2)


def residual_vector(params: SqueezerParams, dataset: Dataset, domain: str = "db",
                    sigma=None) -> np.ndarray:
    """``(observed - model) / sigma_eff``; pass ``sigma`` to freeze the weights."""
    pump, sp, freq, is_sqz, y, sy = _observations(dataset, domain)
    m, _, dm_pump, _ = _model(_vector(params), pump, freq, is_sqz, dataset.cavity, domain,
                              derivatives=sigma is None)
    if sigma is None:
        sigma = np.sqrt(sy ** 2 + (dm_pump * sp) ** 2)
    return (y - m) / sigma


def _residuals_and_jacobians(p, pump, sp, freq, is_sqz, y, sy, cavity, domain):
    m, jac, dm_pump, hess_pump = _model(p, pump, freq, is_sqz, cavity, domain)
    sigma = np.sqrt(sy ** 2 + (dm_pump * sp) ** 2)
    r = (y - m) / sigma
    frozen = -jac / sigma[:, None]
    dsigma = (dm_pump * sp * sp / sigma)[:, None] * hess_pump
    full = frozen - (r / sigma)[:, None] * dsigma
    return r, frozen, full


def jacobian(params: SqueezerParams, dataset: Dataset, domain: str = "db",
             frozen_weights: bool = True) -> np.ndarray:
    """d residual / d (eta, P_thr, theta) as an n x 3 array.

    With ``frozen_weights`` the effective sigmas are held at their values at
    ``params`` (the Gauss-Newton linearization); otherwise the weights'
    own parameter dependence is included, giving the exact derivative of
    :func:`residual_vector`.
    """
    pump, sp, freq, is_sqz, y, sy = _observations(dataset, domain)
    _, frozen, full = _residuals_and_jacobians(_vector(params), pump, sp, freq, is_sqz, y, sy,
                                               dataset.cavity, domain)
    return frozen if frozen_weights else full


# --------------------------------------------------------------------------
# reparameterization


class _Transform:
    """eta = sin^2 u0, P_thr = P_max (1 + exp u1), theta = (pi/2) sin^2 u2."""

    def __init__(self, p_max):
        self.p_max = p_max

    def to_physical(self, u):
        return np.array([
            math.sin(u[0]) ** 2,
            self.p_max * (1.0 + math.exp(u[1])),
            0.5 * math.pi * math.sin(u[2]) ** 2,
        ])

    def derivative(self, u):
        return np.array([
            math.sin(2.0 * u[0]),
            self.p_max * math.exp(u[1]),
            0.5 * math.pi * math.sin(2.0 * u[2]),
        ])

    def to_internal(self, p):
        eta, pthr, theta = p
        ratio = pthr / self.p_max - 1.0
        if not ratio > 0.0:
            raise DomainError("threshold power must exceed every recorded pump power")
        return np.array([
            math.asin(math.sqrt(min(max(eta, 0.0), 1.0))),
            math.log(ratio),
            math.asin(math.sqrt(min(max(2.0 * theta / math.pi, 0.0), 1.0))),
        ])


def initial_guess(dataset: Dataset) -> np.ndarray:
    """(eta, P_thr, theta) start: deepest squeezing, 1.3 x max pump, 0.5 degrees."""
    pump, _, _, is_sqz, y_db, _ = dataset.arrays()
    lin = from_db(y_db[is_sqz]) if np.any(is_sqz) else from_db(y_db)
    eta0 = min(max(1.0 - float(np.min(lin)), 0.5), 0.999)
    return np.array([eta0, 1.3 * float(np.max(pump)), math.radians(0.5)])


def _check_dataset(dataset: Dataset, n_free: int):
    if len(dataset) == 0:
        raise IllConditionedError("dataset is empty")
    pump = np.array([p.pump_power for p in dataset.points])
    if len(np.unique(pump)) < 2:
        raise IllConditionedError("dataset needs at least two distinct pump powers")
    if len(dataset) <= n_free:
        raise IllConditionedError(
            f"{len(dataset)} points cannot constrain {n_free} free parameters"
        )
    if np.max(pump) <= 0.0:
        raise IllConditionedError("dataset has no pumped points")


def fit(dataset: Dataset, config: FitConfig | None = None) -> FitResult:
    """Levenberg-Marquardt fit of (eta, P_thr, theta_fluc) to ``dataset``."""
    config = config or FitConfig()
    domain = config.residual_domain
    free = tuple(n for n in PARAM_NAMES if n not in config.fixed)
    free_idx = np.array([PARAM_NAMES.index(n) for n in free], dtype=int)
    _check_dataset(dataset, len(free))

    pump, sp, freq, is_sqz, y, sy = _observations(dataset, domain)
    cavity = dataset.cavity
    tr = _Transform(float(np.max(pump)))

    start = initial_guess(dataset)
    for name, value in config.initial.items():
        start[PARAM_NAMES.index(name)] = value
    for name, value in config.fixed.items():
        start[PARAM_NAMES.index(name)] = value
    if not start[1] > tr.p_max:
        raise AboveThresholdError("threshold power must exceed every recorded pump power")
    u = tr.to_internal(start)

    def physical(u_vec):
        p = tr.to_physical(u_vec)
        for name, value in config.fixed.items():
            p[PARAM_NAMES.index(name)] = value
        return p

    def evaluate(u_vec):
        p = physical(u_vec)
        r, _, j_phys = _residuals_and_jacobians(p, pump, sp, freq, is_sqz, y, sy, cavity, domain)
        j_u = j_phys[:, free_idx] * tr.derivative(u_vec)[free_idx]
        return p, r, j_phys, j_u

    p, r, j_phys, j_u = evaluate(u)
    chi2 = float(r @ r)
    history = [chi2]
    lam = config.initial_damping
    converged = False
    message = "maximum iterations reached"
    iterations = 0

    while iterations < config.max_iterations:
        iterations += 1
        grad = j_u.T @ r
        jtj = j_u.T @ j_u
        diag = np.maximum(np.diag(jtj), 1e-12 * max(1.0, float(np.max(np.diag(jtj)))))
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            u_try = u.copy()
            u_try[free_idx] += step
            try:
                p_try, r_try, jp_try, ju_try = evaluate(u_try)
            except (AboveThresholdError, DomainError, FloatingPointError):
                lam *= 10.0
                continue
            chi2_try = float(r_try @ r_try)
            if np.isfinite(chi2_try) and chi2_try <= chi2:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            message = "no downhill step found"
            converged = _small_gradient(j_u, r, chi2, config)
            break
        lam = max(lam / 10.0, 1e-15)
        change = chi2 - chi2_try
        step_norm = float(np.linalg.norm(step))
        u, p, r, j_phys, j_u, chi2 = u_try, p_try, r_try, jp_try, ju_try, chi2_try
        history.append(chi2)
        if chi2 < 1e-28:
            converged, message = True, "exact fit"
            break
        if change <= config.chi2_rtol * chi2:
            converged, message = True, "relative chi-squared change below tolerance"
            break
        if step_norm < config.step_tol:
            converged, message = True, "step norm below tolerance"
            break

    grad_norm = float(np.linalg.norm(2.0 * (j_u.T @ r)))
    if converged and not _small_gradient(j_u, r, chi2, config):
        converged = False
        message += "; gradient not small"

    n = len(dataset)
    dof = n - len(free)
    cov_u = np.zeros((3, 3))
    jf = j_phys[:, free_idx]
    jtj = jf.T @ jf
    sub = np.linalg.pinv(jtj, rcond=1e-14, hermitian=True)
    cov_u[np.ix_(free_idx, free_idx)] = sub
    cov_u = 0.5 * (cov_u + cov_u.T)
    scale = chi2 / dof if dof > 0 else 1.0
    cov = cov_u * scale
    params = SqueezerParams(float(p[0]), float(p[1]), float(p[2]), cavity)

    at_bound = []
    if "efficiency" in free and (p[0] < 1e-6 or p[0] > 1.0 - 1e-9):
        at_bound.append("efficiency")
    if "threshold_power" in free and p[1] / tr.p_max - 1.0 < 1e-9:
        at_bound.append("threshold_power")
    if "phase_jitter" in free and p[2] > 0.5 * math.pi * (1.0 - 1e-9):
        at_bound.append("phase_jitter")

    return FitResult(
        params=params,
        covariance=cov,
        std_errors=np.sqrt(np.clip(np.diag(cov), 0.0, None)),
        chi_squared=chi2,
        dof=dof,
        converged=converged,
        iterations=iterations,
        covariance_unscaled=cov_u,
        gradient_norm=grad_norm,
        free=free,
        at_bound=tuple(at_bound),
        chi2_history=history,
        message=message,
    )


def _small_gradient(j_u, r, chi2, config):
    return float(np.linalg.norm(2.0 * (j_u.T @ r))) <= config.gradient_tol * max(1.0, chi2)


def parameter_errors(result: FitResult) -> np.ndarray:
    """Standard errors (dimensionless, W, rad) from the scaled covariance."""
    if not result.converged:
        raise DomainError("standard errors requested for a fit that did not converge")
    cov = np.asarray(result.covariance, dtype=float)
    return np.sqrt(np.clip(np.diag(cov), 0.0, None))


def with_params(params: SqueezerParams, vector) -> SqueezerParams:
    return replace(params, efficiency=float(vector[0]), threshold_power=float(vector[1]),
                   phase_jitter=float(vector[2]))
