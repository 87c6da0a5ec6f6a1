"""Variation profiles, coarea densities, discrete norms, and the two
sampled estimate verifiers."""
import math

import numpy as np
import pytest

from hamflow import construction, flow, regularity
from hamflow.fields import (AnalyticScalarField, PlanarField, Transversality,
                            shear_field, translation_field)
from hamflow.geometry import AxisRect, Point


# --- Lipschitz constant -----------------------------------------------------

def test_cprime_pins():
    assert regularity.lipschitz_constant_Cprime(1.0, 1.0, 1.0) == 4.0
    assert abs(regularity.lipschitz_constant_Cprime(1.0, 1.0, 0.5)
               - 36.0) < 1e-12


def test_cprime_monotone_in_delta():
    cs = [regularity.lipschitz_constant_Cprime(1.0, 1.0, d)
          for d in (0.25, 0.5, 1.0, 2.0)]
    assert cs == sorted(cs, reverse=True)


def test_cprime_requires_positive_delta():
    with pytest.raises(ValueError):
        regularity.lipschitz_constant_Cprime(1.0, 1.0, 0.0)


# --- variation profile on a smooth shear ------------------------------------

SHEAR_W = AxisRect(0.0, 1.0, 0.0, 1.0)
SHEAR_HS = np.linspace(-4.0 / 3.0, 0.0, 21)


def _shear_y_of_h(h: float) -> float:
    # level height: root of y + y^3/3 + h = 0 on [0, 1]
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid + mid ** 3 / 3.0 + h <= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="module")
def shear_profile():
    b = shear_field()
    return regularity.variation_profile(b, b.stream, SHEAR_W, SHEAR_HS,
                                        variant="bv", resolution=512)


def test_shear_bv_profile_matches_analytic(shear_profile):
    # b = (1 + y^2, 0): |Db| = 2y dy dx, {H <= h} = {y >= y_h},
    # so g(h) = 1 - y_h^2 and the full-window mass is 1.
    exact = np.array([1.0 - _shear_y_of_h(h) ** 2 for h in SHEAR_HS])
    assert float(np.max(np.abs(shear_profile.g - exact))) < 5e-3
    assert abs(shear_profile.total_mass - 1.0) < 5e-3


def test_shear_profile_monotone(shear_profile):
    assert np.all(np.diff(shear_profile.g) >= -1e-12)


def test_profile_value_at_endpoints(shear_profile):
    assert abs(float(shear_profile.value_at(SHEAR_HS[-1]))
               - shear_profile.g[-1]) < 1e-15
    # clamped outside the grid
    assert float(shear_profile.value_at(-10.0)) == shear_profile.g[0]
    assert float(shear_profile.value_at(10.0)) == shear_profile.g[-1]


def test_profile_csv_rows(shear_profile):
    rows = list(shear_profile.csv_rows())
    assert len(rows) == len(SHEAR_HS)
    assert rows[0] == (float(SHEAR_HS[0]), float(shear_profile.g[0]))


def test_sobolev_variant_agrees_on_smooth_field():
    b = shear_field()
    sob = regularity.variation_profile(b, b.stream, SHEAR_W, SHEAR_HS,
                                       variant="sobolev", resolution=256)
    exact = np.array([1.0 - _shear_y_of_h(h) ** 2 for h in SHEAR_HS])
    assert float(np.max(np.abs(sob.g - exact))) < 1e-2
    assert sob.variant == "sobolev"


# --- variation profile on the cascade (exact edge route) --------------------

@pytest.fixture(scope="module")
def cascade2():
    b = construction.build_velocity(2)
    inner = construction.cascade_inner(b)
    return b, inner


def test_cascade_profile_reaches_edge_mass(cascade2):
    b, inner = cascade2
    dom = inner.domain
    full = AxisRect(dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi)
    total = sum(e.mass for e in construction.jump_edges(inner))
    hs = np.array([-1.0, 0.0])      # f >= 0, so {H <= 0} is everything
    prof = regularity.variation_profile(b, b.stream, full, hs, variant="bv")
    assert abs(prof.g[-1] - total) < 1e-12 * (1 + total)
    assert abs(prof.total_mass - total) < 1e-12 * (1 + total)


def test_cascade_profile_window_clipping(cascade2):
    b, inner = cascade2
    dom = inner.domain
    full = AxisRect(dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi)
    half = AxisRect(dom.x_lo, 0.5 * (dom.x_lo + dom.x_hi), dom.y_lo, dom.y_hi)
    hs = np.array([-1.0, 0.0])
    g_full = regularity.variation_profile(b, b.stream, full, hs,
                                          variant="bv").g[-1]
    g_half = regularity.variation_profile(b, b.stream, half, hs,
                                          variant="bv").g[-1]
    assert 0.0 < g_half < g_full


def test_cascade_profile_increasing_between_levels(cascade2):
    b, inner = cascade2
    dom = inner.domain
    full = AxisRect(dom.x_lo, dom.x_hi, dom.y_lo, dom.y_hi)
    hs = np.linspace(-0.45, -1e-3, 9)
    prof = regularity.variation_profile(b, b.stream, full, hs, variant="bv")
    assert np.all(np.diff(prof.g) >= -1e-12)


# --- coarea densities --------------------------------------------------------

def _unit_gradient_level(scale: float) -> AnalyticScalarField:
    return AnalyticScalarField(
        lambda x, y, s=scale: -s * y + 0.0 * x,
        lambda x, y, s=scale: (0.0 * x, -s + 0.0 * y),
        domain=AxisRect(0.0, 1.0, 0.0, 1.0), lipschitz_bound=scale)


def test_coarea_density_unit_slope():
    H = _unit_gradient_level(1.0)
    rho = regularity.coarea_density(H, AxisRect(0.0, 1.0, 0.0, 1.0),
                                    np.linspace(-0.9, -0.1, 9), e=(1.0, 0.0))
    assert float(np.max(np.abs(rho - 1.0))) < 1e-9


def test_coarea_density_scales_inversely():
    H = _unit_gradient_level(2.0)
    rho = regularity.coarea_density(H, AxisRect(0.0, 1.0, 0.0, 1.0),
                                    np.linspace(-1.8, -0.2, 9), e=(1.0, 0.0))
    assert float(np.max(np.abs(rho - 0.5))) < 1e-9


def test_coarea_area_identity():
    # integrating the density over the full level range recovers the area
    H = _unit_gradient_level(1.0)
    hs = np.linspace(-1.0 + 1e-6, -1e-6, 201)
    rho = regularity.coarea_density(H, AxisRect(0.0, 1.0, 0.0, 1.0), hs,
                                    e=(1.0, 0.0))
    assert abs(float(np.trapezoid(rho, hs)) - 1.0) < 1e-2


# --- discrete norms on a synthetic identity map ------------------------------

N_GRID = 16


def _identity_map(flags=None) -> flow.FlowMap:
    xs = np.linspace(0.0, 1.0, N_GRID + 1)
    gx, gy = np.meshgrid(xs, xs)
    if flags is None:
        flags = np.zeros((N_GRID + 1, N_GRID + 1), dtype=np.int8)
    return flow.FlowMap(origin=Point(0.0, 0.0),
                        spacing=(1.0 / N_GRID, 1.0 / N_GRID),
                        nx=N_GRID + 1, ny=N_GRID + 1, t=0.0, method="rk",
                        images=np.stack((gx, gy), axis=-1), flags=flags)


def test_discrete_tv_identity_is_area():
    fm = _identity_map()
    assert regularity.discrete_tv(fm, component=0).value == 1.0
    assert regularity.discrete_tv(fm, component=1).value == 1.0


def test_discrete_sobolev_identity():
    # |DX|_F = sqrt(2) everywhere, area 1: norm = sqrt(2) for every p
    fm = _identity_map()
    assert abs(regularity.discrete_sobolev(fm, p=2.0).value
               - math.sqrt(2.0)) < 1e-12
    assert abs(regularity.discrete_sobolev(fm, p=3.0).value
               - math.sqrt(2.0)) < 1e-12


def test_discrete_sobolev_rejects_p_below_one():
    with pytest.raises(ValueError):
        regularity.discrete_sobolev(_identity_map(), p=0.5)


def test_discrete_tv_excludes_flagged_differences():
    flags = np.zeros((N_GRID + 1, N_GRID + 1), dtype=np.int8)
    flags[0, 0] = 2        # corner node touches one x- and one y-difference
    fm = _identity_map(flags)
    assert regularity.discrete_tv(fm, component=0).excluded == 2


def test_discrete_tv_region_restriction():
    fm = _identity_map()
    reg = regularity.discrete_tv(fm, component=0,
                                 region=AxisRect(0.0, 0.5, 0.0, 0.5))
    assert abs(reg.value - 0.25) < 1e-12


# --- local estimate verifier --------------------------------------------------

def test_verify_local_shear():
    b = shear_field()
    rep = regularity.verify_local_estimate(
        b, b.stream, AxisRect(0.0, 1.0, -0.9, 0.9),
        t_bar=0.02, pairs=300, seed=1)
    assert rep.violations == 0
    assert rep.pairs_tested >= 50
    assert rep.constants["C_prime"] > 0
    assert rep.constants["delta"] >= 1.0
    assert rep.kind == "local"
    d = rep.to_json_dict()
    assert d["violations"] == 0 and d["kind"] == "local"


def test_verify_local_rescaling_invariance():
    # doubling b and halving the horizon probes the same trajectory arcs;
    # the estimate should hold just the same
    dom = AxisRect(-2.0, 3.0, -1.0, 2.0)
    H2 = AnalyticScalarField(
        lambda x, y: -2.0 * (y + y ** 3 / 3.0) + 0.0 * x,
        lambda x, y: (0.0 * x, -2.0 * (1.0 + y * y)),
        dom, lipschitz_bound=10.0)
    b2 = PlanarField(stream=H2, sup_norm=10.0,
                     transversality=Transversality((1.0, 0.0), 2.0, dom),
                     regularity_tag="smooth")
    rep = regularity.verify_local_estimate(
        b2, H2, AxisRect(0.0, 1.0, -0.9, 0.9),
        t_bar=0.01, pairs=150, seed=1)
    assert rep.violations == 0
    assert rep.pairs_tested >= 30


def test_verify_local_cascade_window(cascade2):
    b, _ = cascade2
    rep = regularity.verify_local_estimate(
        b, b.stream, AxisRect(3.0 / 8.0, 5.0 / 8.0, 0.05, 0.45),
        t_bar=0.01, pairs=200, seed=2)
    assert rep.violations == 0
    assert rep.pairs_tested >= 50


def test_verify_local_rejects_negative_horizon():
    b = shear_field()
    with pytest.raises(ValueError):
        regularity.verify_local_estimate(b, b.stream, SHEAR_W,
                                         t_bar=-0.1, pairs=10)


# --- global estimate verifier --------------------------------------------------

def test_verify_global_translation():
    b = translation_field()
    rep = regularity.verify_global_estimate(b, b.stream, k=2, t=0.5,
                                            pairs=120, seed=3)
    assert rep.violations == 0
    assert rep.pairs_tested >= 40
    assert rep.constants["c1"] == 6.0          # 2 (k + 1)
    assert rep.constants["N_tilde"] >= 1.0
    for key in ("c2", "r_bar", "r"):
        assert key in rep.constants
    assert rep.kind == "global"


def test_verify_global_argument_validation():
    b = translation_field()
    with pytest.raises(ValueError):
        regularity.verify_global_estimate(b, b.stream, k=0, t=0.5, pairs=10)
    with pytest.raises(ValueError):
        regularity.verify_global_estimate(b, b.stream, k=2, t=0.0, pairs=10)
