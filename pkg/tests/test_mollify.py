"""Mollifier kernel, collar quadrature, smoothed increments, and the
Sobolev feasibility schedule.

Reference values marked "independent adaptive quadrature" were produced
offline with an adaptive dblquad/quad oracle and are frozen here so the
suite has no dependency beyond numpy.
"""
import math

import numpy as np
import pytest

from hamflow import cascade, construction, mollify
from hamflow.errors import NumericalError
from hamflow.fields import low_discrepancy_points
from hamflow.geometry import AxisRect

# marginal second moment: int kappa(t)^2 dt for the marginal kappa of the
# standard kernel (independent adaptive quadrature)
I_KAP2 = 1.4879955703003458


@pytest.fixture(scope="module")
def kernel():
    return mollify.standard_kernel()


@pytest.fixture(scope="module")
def h1():
    return mollify.increment(1)


@pytest.fixture(scope="module")
def m1(h1):
    return mollify.mollify_increment(h1)


# --- kernel -------------------------------------------------------------------

def test_kernel_moment_guard(kernel):
    mollify.check_kernel(kernel)


def test_kernel_unit_mass_radial(kernel):
    # radial profile: mass = 2 pi int_0^(1/2) K(s, 0) s ds
    s = np.linspace(0.0, 0.5, 20001)
    mass = 2.0 * math.pi * float(np.trapezoid(kernel.value_many(s, 0.0) * s, s))
    assert abs(mass - 1.0) < 1e-8


def test_autocorrelation_mass(kernel):
    d, phi = kernel.autocorrelation()
    mass = 2.0 * math.pi * float(np.trapezoid(phi * d, d))
    assert abs(mass - 1.0) < 3e-6


def test_autocorrelation_marginal_identity(kernel):
    # 2 int_0^1 phi(d) dd equals int kappa^2 for radially averaged kernels
    d, phi = kernel.autocorrelation()
    i_phi = 2.0 * float(np.trapezoid(phi, d))
    assert abs(i_phi - I_KAP2) < 1e-6 * I_KAP2


def test_rescaled_kernel_rejected(kernel):
    class Doubled(mollify.MollifierKernel):
        def value_many(self, ux, uy):
            return 2.0 * super().value_many(ux, uy)

    with pytest.raises(NumericalError):
        mollify.check_kernel(Doubled())


def test_single_edge_correlation_norm(kernel):
    # one straight edge of length L, jump lam, normal nu = e2: the interior
    # contribution is lam^2 L int kappa_r^2 = lam^2 L I_KAP2 / r, with edge-end
    # corrections of relative size O(r / L)
    lam, L, r = 0.7, 0.05, 0.002
    nsq = mollify.correlation_norm_sq(np.array([[0.0, 0.0]]),
                                      np.array([[L, 0.0]]),
                                      np.array([[0.0, lam]]),
                                      np.array([[0.0, 1.0]]), r)
    ref = lam * lam * L * I_KAP2 / r
    assert abs(nsq - ref) / ref < 0.02


# --- increments -----------------------------------------------------------------

def test_increment_edge_counts(h1):
    assert len(h1.edges) == 44
    assert len(mollify.increment(2).edges) == 88


def test_increment_band_boxes(h1):
    assert np.allclose(h1.bands, [[3.0 / 8.0, 5.0 / 8.0, 0.0, 0.5]])
    assert mollify.increment(2).bands.shape == (2, 4)


def test_increment_vanishes_outside_band(h1):
    assert h1.value(0.3, 0.25) == 0.0
    assert h1.value(0.7, 0.1) == 0.0


def test_default_radius_is_generation_margin(m1):
    assert m1.r == float(cascade.geometry_margins(1)[1])


# --- exactness of the smoothed field ---------------------------------------------

def test_mollified_increment_zero_far_out(m1):
    assert m1.value(0.1, 0.4) == 0.0


def test_smooth_field_exact_inside_deep_square():
    # collars only live within r_n of generation-n edges; a generation-3
    # square interior point is untouched when smoothing depth 2
    f2 = construction.build_field(2)
    sm2 = mollify.build_f_smooth(2)
    sq = cascade.component_geometry((0, 0)).square
    z = (float(sq.x_lo) + 0.4 * float(sq.width),
         float(sq.y_lo) + 0.6 * float(sq.height))
    assert sm2.value(*z) == f2.value(*z)


def test_smooth_field_ambient_far_away():
    sm2 = mollify.build_f_smooth(2)
    assert sm2.value(-1.0, 0.8) == 0.8
    assert sm2.gradient(-1.0, 0.8) == (0.0, 1.0)


# --- collar quadrature -------------------------------------------------------------

COLLAR_Z = (0.5, 0.0005)        # straddles the root floor edge (y = 0)
# independent adaptive quadrature of kernel * increment over the collar square
COLLAR_REF = 0.0031516541430365135
DIAG_Z = (0.43, 0.08)           # near a trapezoid diagonal edge
DIAG_REF = 0.022184323009780894


def test_collar_value_vs_adaptive_reference(m1):
    v = m1.value(*COLLAR_Z)
    assert abs(v - COLLAR_REF) < 1e-7 * (abs(COLLAR_REF) + 1)


def test_collar_gradient_vs_finite_differences(m1):
    gx, gy = m1.gradient(*COLLAR_Z)
    x, y = COLLAR_Z
    eps = 1e-6
    fdx = (m1._quad_value(x + eps, y) - m1._quad_value(x - eps, y)) / (2 * eps)
    fdy = (m1._quad_value(x, y + eps) - m1._quad_value(x, y - eps)) / (2 * eps)
    assert abs(gx - fdx) < 1e-5
    assert abs(gy - fdy) < 1e-5


def test_diagonal_collar_value_vs_adaptive_reference(h1, m1):
    assert h1.edge_distance(*DIAG_Z) < m1.r / 2     # inside the collar
    v = m1.value(*DIAG_Z)
    assert abs(v - DIAG_REF) < 1e-7 * (abs(DIAG_REF) + 1)


def test_hessian_zero_away_from_edges(m1):
    assert float(np.abs(m1.hessian(0.5, 0.25)).max()) == 0.0


def test_hessian_vs_finite_differences(m1):
    hz = m1.hessian(*COLLAR_Z)
    x, y = COLLAR_Z
    eps = 2e-6
    v0 = m1._quad_value(x, y)
    fdxx = (m1._quad_value(x + eps, y) - 2 * v0
            + m1._quad_value(x - eps, y)) / eps ** 2
    fdyy = (m1._quad_value(x, y + eps) - 2 * v0
            + m1._quad_value(x, y - eps)) / eps ** 2
    fdxy = (m1._quad_value(x + eps, y + eps) - m1._quad_value(x + eps, y - eps)
            - m1._quad_value(x - eps, y + eps)
            + m1._quad_value(x - eps, y - eps)) / (4 * eps ** 2)
    scale = max(1.0, abs(fdxx), abs(fdyy))
    assert abs(hz[0, 0] - fdxx) / scale < 5e-3
    assert abs(hz[1, 1] - fdyy) / scale < 5e-3
    assert abs(0.5 * (hz[0, 1] + hz[1, 0]) - fdxy) / scale < 5e-3


# --- smoothed velocity ---------------------------------------------------------------

def test_smooth_velocity_suggested_step():
    bsm = mollify.build_velocity_smooth(2)
    assert abs(bsm.suggested_max_step
               - float(cascade.geometry_margins(2)[1]) / 4) < 1e-18


def test_smooth_velocity_transversal():
    bsm = mollify.build_velocity_smooth(2)
    root = cascade.component_geometry(()).square
    grown = AxisRect(float(root.x_lo) - 0.1, float(root.x_hi) + 0.1,
                     float(root.y_lo) - 0.1, float(root.y_hi) + 0.1)
    worst = min(bsm.velocity(x, y)[0]
                for x, y in low_discrepancy_points(grown, 400))
    assert worst > 0.0
    # collar points hugging the root floor edge
    worst_collar = min(bsm.velocity(0.4 + 0.05 * i, 1e-4)[0] for i in range(5))
    assert worst_collar > 0.0


# --- Sobolev schedule -----------------------------------------------------------------

SCHEDULE_NORMS = (10.7536239049, 8.16126707265, 11.0044163955, 17.2138859878)


@pytest.fixture(scope="module")
def schedule4():
    return mollify.sobolev_schedule(4, p=2.0)


def test_schedule_levels_and_method(schedule4):
    assert schedule4.levels == (1, 2, 3, 4)
    assert schedule4.method == "edge-correlation"


def test_schedule_norms_pinned(schedule4):
    for got, ref in zip(schedule4.norms, SCHEDULE_NORMS):
        assert math.isfinite(got)
        assert abs(got - ref) < 1e-6 * ref


def test_schedule_partial_sums_and_gap(schedule4):
    sums = schedule4.partial_sums
    assert all(sums[i] < sums[i + 1] for i in range(3))
    assert abs(schedule4.cauchy_gap(4) - 0.365217901871) < 1e-9


def test_grid_route_agrees_with_correlation_route(schedule4):
    val, ok = mollify._hessian_grid_norm(1, 2.0, 2048, None)
    assert ok
    assert abs(val - schedule4.norms[0]) / schedule4.norms[0] < 0.02


def test_schedule_p3():
    s3 = mollify.sobolev_schedule(2, p=3.0, max_grid=700)
    assert all(s3.feasible)
    refs = (17.2584201755, 24.0139767706)
    for got, ref in zip(s3.norms, refs):
        assert abs(got - ref) < 1e-6 * ref


def test_schedule_flags_infeasible_grid():
    s = mollify.sobolev_schedule(3, p=3.0, max_grid=64)
    assert not s.feasible[-1]
    assert math.isnan(s.norms[-1])
