"""Standing-wave resonator eigenmodes and spectral figures.

Layouts are ordered from the coupling mirror to the end mirror. Ray matrices
use reduced angles (``n * angle``), so a slab of length ``d`` contributes
``d / n``, a flat interface is the identity and a mirror immersed in a
medium of index ``n`` acts like a mirror of radius ``R / n`` in air. Every
element matrix then has unit determinant and the Gaussian beam parameter
propagated is the reduced ``q / n``, which evolves with the vacuum
wavelength.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, InstabilityError, LayoutError
from .quadrature import SPEED_OF_LIGHT, CavityConstants


@dataclass(frozen=True)
class Gap:
    length: float  # m

    def __post_init__(self):
        if not self.length > 0.0:
            raise LayoutError(f"gap length must be > 0, got {self.length!r}")


@dataclass(frozen=True)
class Slab:
    length: float  # m
    refractive_index: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise LayoutError(f"slab length must be > 0, got {self.length!r}")
        if not self.refractive_index >= 1.0:
            raise LayoutError(f"refractive index must be >= 1, got {self.refractive_index!r}")


@dataclass(frozen=True)
class CurvedMirror:
    """Mirror with radius of curvature ``roc`` (concave toward the beam positive).

    ``math.inf`` gives a planar mirror. ``immersed_index`` is the index of the
    medium the mirror faces, e.g. a coated crystal end face.
    """

    roc: float  # m
    power_reflectivity: float = 1.0
    immersed_index: float = 1.0

    def __post_init__(self):
        if self.roc == 0.0 or math.isnan(self.roc):
            raise LayoutError("mirror radius of curvature must be non-zero")
        if not 0.0 < self.power_reflectivity <= 1.0:
            raise LayoutError(
                f"power_reflectivity must lie in (0, 1], got {self.power_reflectivity!r}"
            )
        if not self.immersed_index >= 1.0:
            raise LayoutError(f"immersed_index must be >= 1, got {self.immersed_index!r}")


@dataclass(frozen=True)
class FlatInterface:
    """Planar boundary between media; identity in reduced-angle matrices."""


Element = Union[Gap, Slab, CurvedMirror, FlatInterface]


@dataclass(frozen=True)
class CavityLayout:
    elements: tuple
    wavelength: float  # m, vacuum

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        els = self.elements
        if len(els) < 3:
            raise LayoutError("layout needs two mirrors and at least one propagation element")
        if not isinstance(els[0], CurvedMirror) or not isinstance(els[-1], CurvedMirror):
            raise LayoutError("first and last elements must be mirrors")
        for el in els[1:-1]:
            if isinstance(el, CurvedMirror):
                raise LayoutError("internal mirrors are not supported in a standing-wave layout")
            if not isinstance(el, (Gap, Slab, FlatInterface)):
                raise LayoutError(f"unknown element {el!r}")
        if not any(isinstance(el, (Gap, Slab)) for el in els[1:-1]):
            raise LayoutError("layout has zero length")
        if not self.wavelength > 0.0:
            raise LayoutError(f"wavelength must be > 0, got {self.wavelength!r}")

    @property
    def coupler(self) -> CurvedMirror:
        return self.elements[0]

    @property
    def end_mirror(self) -> CurvedMirror:
        return self.elements[-1]

    def reversed(self) -> "CavityLayout":
        return CavityLayout(tuple(reversed(self.elements)), self.wavelength)

    def segments(self):
        """(start, stop, index) of each homogeneous region along the physical axis."""
        out = []
        z = 0.0
        for el in self.elements[1:-1]:
            if isinstance(el, Gap):
                out.append((z, z + el.length, 1.0))
                z += el.length
            elif isinstance(el, Slab):
                out.append((z, z + el.length, el.refractive_index))
                z += el.length
        return out

    @property
    def physical_length(self) -> float:
        return self.segments()[-1][1]

    @property
    def optical_round_trip_length(self) -> float:
        return 2.0 * sum((b - a) * n for a, b, n in self.segments())


@dataclass(frozen=True)
class EigenmodeResult:
    waist_radius: float  # m
    waist_position: float  # m from the coupler, physical path
    stability_parameter: float  # g1*g2 equivalent; stable inside (0, 1)
    rayleigh_range: float  # m, physical, in the medium containing the waist
    waist_index: float = 1.0
    q_at_coupler: complex = 0j  # reduced q just inside the coupler, heading in


def propagation(d: float, n: float = 1.0) -> np.ndarray:
    return np.array([[1.0, d / n], [0.0, 1.0]])


def mirror(roc: float, n: float = 1.0) -> np.ndarray:
    return np.array([[1.0, 0.0], [-2.0 * n / roc, 1.0]])


def _propagate_between(layout: CavityLayout, z0: float, z1: float) -> np.ndarray:
    """Reduced matrix for travel between physical positions z0 <= z1 (either direction)."""
    reduced = 0.0
    for a, b, n in layout.segments():
        lo, hi = max(a, z0), min(b, z1)
        if hi > lo:
            reduced += (hi - lo) / n
    return propagation(reduced)


def round_trip_matrix(layout: CavityLayout, start: float = 0.0) -> np.ndarray:
    """Round-trip ABCD matrix referenced at physical distance ``start`` from the coupler.

    The reference plane faces the end mirror: the ray first travels toward
    it, reflects, returns to the coupler, reflects and comes back to
    ``start``.
    """
    if not isinstance(layout, CavityLayout):
        raise LayoutError("round_trip_matrix expects a CavityLayout")
    length = layout.physical_length
    if not 0.0 <= start <= length:
        raise LayoutError(f"start must lie within [0, {length}], got {start!r}")
    m1, m2 = layout.coupler, layout.end_mirror
    to_end = _propagate_between(layout, start, length)
    full = _propagate_between(layout, 0.0, length)
    back = _propagate_between(layout, 0.0, start)
    r1 = mirror(m1.roc, m1.immersed_index)
    r2 = mirror(m2.roc, m2.immersed_index)
    return back @ r1 @ full @ r2 @ to_end


def stability_parameter(m: np.ndarray) -> float:
    """``(A + D + 2) / 4``; equals g1*g2 for a two-mirror resonator."""
    return float((m[0, 0] + m[1, 1] + 2.0) / 4.0)


def propagate_q(m: np.ndarray, q: complex) -> complex:
    return (m[0, 0] * q + m[0, 1]) / (m[1, 0] * q + m[1, 1])


def eigenmode(layout: CavityLayout) -> EigenmodeResult:
    """Self-consistent Gaussian mode of the resonator.

    Raises :class:`InstabilityError` (carrying the stability parameter) when
    ``|A + D| >= 2``. The waist position is located along the physical axis;
    if the beam has no waist inside the resonator the position is
    extrapolated beyond the nearest mirror.
    """
    m = round_trip_matrix(layout, 0.0)
    A, B, D = m[0, 0], m[0, 1], m[1, 1]
    g = stability_parameter(m)
    half_trace = (A + D) / 2.0
    if not abs(half_trace) < 1.0 or B == 0.0:
        raise InstabilityError(
            f"resonator is unstable or marginal (stability parameter {g:.6g})", g
        )
    inv_q = complex((D - A) / (2.0 * B), -math.sqrt(1.0 - half_trace ** 2) / abs(B))
    q0 = 1.0 / inv_q
    lam = layout.wavelength

    # Re(q_reduced) grows by dz/n along the axis, so it vanishes exactly once.
    segs = layout.segments()
    qr = q0.real
    waist_z = None
    waist_n = segs[0][2]
    for a, b, n in segs:
        dq = (b - a) / n
        if qr <= 0.0 <= qr + dq:
            waist_z = a - qr * n
            waist_n = n
            break
        qr += dq
    if waist_z is None:
        if q0.real > 0.0:
            waist_n = segs[0][2]
            waist_z = -q0.real * waist_n
        else:
            a, b, n = segs[-1]
            waist_n = n
            waist_z = b - qr * n
    w0 = math.sqrt(lam * q0.imag / math.pi)
    return EigenmodeResult(
        waist_radius=w0,
        waist_position=waist_z,
        stability_parameter=g,
        rayleigh_range=waist_n * q0.imag,
        waist_index=waist_n,
        q_at_coupler=q0,
    )


def free_spectral_range(layout: CavityLayout) -> float:
    return SPEED_OF_LIGHT / layout.optical_round_trip_length


def finesse(r1: float, r2: float, loss: float = 0.0) -> float:
    """Airy finesse ``pi sqrt(rho) / (1 - rho)`` with ``rho = sqrt(r1 r2 (1 - loss))``."""
    for name, r in (("r1", r1), ("r2", r2)):
        if not 0.0 < r <= 1.0:
            raise DomainError(f"{name} must lie in (0, 1], got {r!r}")
    if not 0.0 <= loss < 1.0:
        raise DomainError(f"loss must lie in [0, 1), got {loss!r}")
    rho = math.sqrt(r1 * r2 * (1.0 - loss))
    if rho >= 1.0:
        raise DomainError("lossless resonator: finesse diverges")
    return math.pi * math.sqrt(rho) / (1.0 - rho)


def fwhm_linewidth(layout: CavityLayout, r1: float | None = None, r2: float | None = None,
                   loss: float = 0.0) -> float:
    """Full width at half maximum in Hz; mirror reflectivities default to the layout's."""
    if r1 is None:
        r1 = layout.coupler.power_reflectivity
    if r2 is None:
        r2 = layout.end_mirror.power_reflectivity
    return free_spectral_range(layout) / finesse(r1, r2, loss)


def cavity_constants(layout: CavityLayout, loss: float = 0.0) -> CavityConstants:
    """Decay-rate constants for the squeezing model; end-mirror leakage is folded into L."""
    return CavityConstants(
        coupler_transmissivity=1.0 - layout.coupler.power_reflectivity,
        round_trip_loss=loss + (1.0 - layout.end_mirror.power_reflectivity),
        round_trip_length=layout.optical_round_trip_length,
    )


PPKTP_INDEX_1550 = 1.816


def opa_layout(wavelength: float = 1550e-9) -> CavityLayout:
    """Hemilithic OPA: curved coupler, air gap, AR face, crystal with HR curved back face."""
    n = PPKTP_INDEX_1550
    return CavityLayout(
        (
            CurvedMirror(25e-3, 0.90),
            Gap(23e-3),
            FlatInterface(),
            Slab(9.3e-3, n),
            CurvedMirror(12e-3, 1.0, immersed_index=n),
        ),
        wavelength,
    )


def shg_layout(wavelength: float = 1550e-9) -> CavityLayout:
    """Two 25 mm mirrors around a 10 mm crystal with 20 mm air gaps."""
    n = PPKTP_INDEX_1550
    return CavityLayout(
        (
            CurvedMirror(25e-3, 0.90),
            Gap(20e-3),
            FlatInterface(),
            Slab(10e-3, n),
            FlatInterface(),
            Gap(20e-3),
            CurvedMirror(25e-3, 1.0),
        ),
        wavelength,
    )


def layout_summary(layout: CavityLayout, loss: float = 0.0) -> dict:
    """All cavity figures in SI units; an unstable layout reports diagnostics instead of a mode."""
    from .quadrature import decay_rate

    m = round_trip_matrix(layout)
    out = {
        "optical_round_trip_length_m": layout.optical_round_trip_length,
        "physical_length_m": layout.physical_length,
        "stability_parameter": stability_parameter(m),
        "round_trip_matrix": m.tolist(),
        "free_spectral_range_Hz": free_spectral_range(layout),
    }
    try:
        mode = eigenmode(layout)
    except InstabilityError:
        out["stable"] = False
    else:
        out.update(
            stable=True,
            waist_radius_m=mode.waist_radius,
            waist_position_m=mode.waist_position,
            rayleigh_range_m=mode.rayleigh_range,
        )
    try:
        out["finesse"] = finesse(layout.coupler.power_reflectivity,
                                 layout.end_mirror.power_reflectivity, loss)
        out["fwhm_Hz"] = out["free_spectral_range_Hz"] / out["finesse"]
    except DomainError:
        out["finesse"] = None
        out["fwhm_Hz"] = None
    try:
        consts = cavity_constants(layout, loss)
    except DomainError:
        out["decay_rate_per_s"] = None
    else:
        out["decay_rate_per_s"] = decay_rate(consts)
        out["decay_linewidth_Hz"] = out["decay_rate_per_s"] / (2.0 * math.pi)
    return out

