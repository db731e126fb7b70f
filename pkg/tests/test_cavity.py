import math

import numpy as np
import pytest

from opasqueeze.cavity import (
    CavityLayout,
    CurvedMirror,
    FlatInterface,
    Gap,
    Slab,
    cavity_constants,
    eigenmode,
    finesse,
    free_spectral_range,
    fwhm_linewidth,
    mirror,
    opa_layout,
    propagate_q,
    propagation,
    round_trip_matrix,
    shg_layout,
)
from opasqueeze.errors import DomainError, InstabilityError, LayoutError
from opasqueeze.quadrature import decay_rate

LAMBDA = 1550e-9
N_KTP = 1.816


def two_mirror_waist(d, r1, r2, lam=LAMBDA):
    """Textbook two-mirror waist from g-parameters (independent oracle)."""
    g1, g2 = 1 - d / r1, 1 - d / r2
    g = g1 * g2
    return math.sqrt(lam * d / math.pi * math.sqrt(g * (1 - g) / (g1 + g2 - 2 * g) ** 2))


def symmetric_cavity(d, roc):
    return CavityLayout((CurvedMirror(roc, 0.99), Gap(d), CurvedMirror(roc, 0.99)), LAMBDA)


def test_free_propagation_matrix():
    np.testing.assert_array_equal(propagation(0.3), [[1, 0.3], [0, 1]])
    np.testing.assert_array_equal(propagation(0.01, 2.0), [[1, 0.005], [0, 1]])


def test_round_trip_unit_determinant():
    for layout in (opa_layout(), shg_layout(), symmetric_cavity(0.1, 0.2)):
        for start in (0.0, 0.5 * layout.physical_length, layout.physical_length):
            assert np.linalg.det(round_trip_matrix(layout, start)) == pytest.approx(1.0, abs=1e-9)


def test_opa_round_trip_is_stable():
    m = round_trip_matrix(opa_layout())
    assert abs(m[0, 0] + m[1, 1]) < 2


def test_opa_waist_matches_two_mirror_oracle():
    d = 23e-3 + 9.3e-3 / N_KTP
    expected = two_mirror_waist(d, 25e-3, 12e-3 / N_KTP)
    mode = eigenmode(opa_layout())
    assert mode.waist_radius == pytest.approx(expected, rel=1e-9)
    assert mode.waist_radius == pytest.approx(40.3e-6, rel=2e-3)


def test_shg_waist_matches_two_mirror_oracle():
    d = 40e-3 + 10e-3 / N_KTP
    expected = two_mirror_waist(d, 25e-3, 25e-3)
    mode = eigenmode(shg_layout())
    assert mode.waist_radius == pytest.approx(expected, rel=1e-9)
    assert mode.waist_radius == pytest.approx(59.4e-6, rel=2e-3)
    assert mode.waist_position == pytest.approx(25e-3, abs=1e-12)


def test_near_confocal_vacuum_cavity():
    # exact confocal round trip is -I (every q reproduces), so approach the limit
    d = 0.05
    mode = eigenmode(symmetric_cavity(d, d * (1 + 1e-6)))
    assert mode.waist_radius ** 2 == pytest.approx(LAMBDA * d / (2 * math.pi), rel=1e-5)
    assert mode.waist_position == pytest.approx(d / 2, rel=1e-4)


def test_exact_confocal_is_degenerate():
    with pytest.raises(InstabilityError) as info:
        eigenmode(symmetric_cavity(0.05, 0.05))
    assert info.value.stability == pytest.approx(0.0, abs=1e-12)


def test_eigenmode_is_fixed_point_of_round_trip():
    for layout in (opa_layout(), shg_layout()):
        mode = eigenmode(layout)
        q = mode.q_at_coupler
        q_after = propagate_q(round_trip_matrix(layout), q)
        assert abs(q_after - q) / abs(q) < 1e-9


def test_reversal_of_symmetric_cavity_keeps_waist():
    layout = shg_layout()
    assert eigenmode(layout.reversed()).waist_radius == pytest.approx(
        eigenmode(layout).waist_radius, rel=1e-12)


def test_unstable_cavity_reports_stability():
    layout = CavityLayout((CurvedMirror(0.02), Gap(0.05), CurvedMirror(0.02)), LAMBDA)
    with pytest.raises(InstabilityError) as info:
        eigenmode(layout)
    assert info.value.stability == pytest.approx((1 - 0.05 / 0.02) ** 2)


def test_planar_cavity_is_marginal():
    layout = CavityLayout((CurvedMirror(math.inf), Gap(0.05), CurvedMirror(math.inf)), LAMBDA)
    with pytest.raises(InstabilityError) as info:
        eigenmode(layout)
    assert info.value.stability == 1.0


@pytest.mark.parametrize("elements", [
    (Gap(0.01), CurvedMirror(0.1)),
    (CurvedMirror(0.1), Gap(0.01), Gap(0.02)),
    (CurvedMirror(0.1), FlatInterface(), CurvedMirror(0.1)),
    (CurvedMirror(0.1), Gap(0.01), CurvedMirror(0.1), Gap(0.01), CurvedMirror(0.1)),
])
def test_malformed_layouts(elements):
    with pytest.raises(LayoutError):
        CavityLayout(elements, LAMBDA)


def test_element_validation():
    with pytest.raises(LayoutError):
        Gap(0.0)
    with pytest.raises(LayoutError):
        Slab(0.01, 0.9)
    with pytest.raises(LayoutError):
        CurvedMirror(0.0)
    with pytest.raises(LayoutError):
        CurvedMirror(0.1, power_reflectivity=0.0)


def test_immersed_mirror_matrix():
    np.testing.assert_allclose(mirror(0.012, N_KTP), [[1, 0], [-2 * N_KTP / 0.012, 1]])


def test_optical_lengths_and_fsr():
    assert opa_layout().optical_round_trip_length == pytest.approx(0.0798, abs=1e-4)
    assert shg_layout().optical_round_trip_length == pytest.approx(0.11632, rel=1e-12)
    assert free_spectral_range(opa_layout()) == pytest.approx(3.757e9, rel=1e-3)
    assert free_spectral_range(shg_layout()) == pytest.approx(2.578e9, rel=1e-3)
    vac = symmetric_cavity(0.15, 1.0)
    assert free_spectral_range(vac) == pytest.approx(0.9993e9, rel=1e-4)


def test_finesse_values():
    assert finesse(0.90, 1.0, 0.001) == pytest.approx(59.1, abs=0.05)
    assert finesse(0.90, 1.0, 0.0) == pytest.approx(59.6, abs=0.05)
    with pytest.raises(DomainError):
        finesse(1.0, 1.0, 0.0)


def test_finesse_monotonic():
    base = finesse(0.9, 0.99, 0.01)
    assert finesse(0.95, 0.99, 0.01) > base
    assert finesse(0.9, 0.995, 0.01) > base
    assert finesse(0.9, 0.99, 0.02) < base


def test_linewidths():
    assert fwhm_linewidth(opa_layout(), loss=0.001) == pytest.approx(63.6e6, rel=2e-3)
    assert fwhm_linewidth(shg_layout()) == pytest.approx(43.3e6, rel=3e-3)


def test_linewidth_halves_with_outcoupling():
    lay = opa_layout()
    full = fwhm_linewidth(lay, r1=1 - 0.002, r2=1.0, loss=0.0)
    half = fwhm_linewidth(lay, r1=1 - 0.001, r2=1.0, loss=0.0)
    assert half / full == pytest.approx(0.5, rel=2e-3)


def test_airy_vs_decay_rate_linewidth_gap():
    lay = opa_layout()
    airy = fwhm_linewidth(lay, loss=0.001)
    kappa_lw = decay_rate(cavity_constants(lay, 0.001)) / (2 * math.pi)
    assert kappa_lw == pytest.approx(60.4e6, rel=2e-3)
    # agreement only up to O(T + L)
    assert abs(airy - kappa_lw) / airy < 0.101
