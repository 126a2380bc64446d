import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from hgflow.grid import DecayParams, Grid
from hgflow.wave_kernel import (InitialData, QuadratureSpec, TorusOracleSpec, constant_data,
                                duhamel_eval, gaussian_data, h_branch, h_integral, horizon,
                                kernel_constants, kernel_sample, linear_solution,
                                poisson_eval, poisson_field, poisson_points,
                                rational_class_constant, rational_data, spectral_solve_periodic)

QUAD = QuadratureSpec(radial_nodes=96, angular_nodes=96)


def gaussian_centre(t):
    # solution at the origin for phi0 = exp(-|x|^2), phi1 = 0
    return 1.0 - 2.0 * t * special.dawsn(t)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.5, 4.0])
def test_gaussian_centre_closed_form(t):
    assert poisson_eval(t, (0.0, 0.0), gaussian_data(), QUAD) == pytest.approx(gaussian_centre(t), abs=1e-12)


def test_velocity_data_centre_closed_form():
    # phi1 = exp(-|x|^2): value at the origin is the Dawson function
    data = InitialData(phi0=lambda a, b: 0 * a, phi1=lambda a, b: np.exp(-a * a - b * b))
    for t in (0.5, 2.0, 3.5):
        assert poisson_eval(t, (0.0, 0.0), data, QUAD) == pytest.approx(special.dawsn(t), abs=1e-12)


def test_rational_centre_closed_form():
    data = rational_data(1.0, 2.0, -1.0)

    def w0(t):
        a = math.sqrt(1 + t * t)
        return math.log((a + t) / (a - t)) / (2 * a)

    for t in (1.0, 5.0, 12.0):
        d = 1e-4
        expected = (w0(t + d) - w0(t - d)) / (2 * d) - t / (1 + t * t)
        got = poisson_eval(t, (0.0, 0.0), data, QuadratureSpec(256, 256))
        assert got == pytest.approx(expected, abs=1e-7)


def test_constant_and_linear_data_exact():
    pts = np.array([[0.0, 0.0], [3.0, -1.0], [10.0, 7.0]])
    for t in (0.5, 3.0):
        v = poisson_points(t, pts, constant_data(1.0, 0.0), QUAD)
        assert np.max(np.abs(v - 1.0)) < 1e-12
        v = poisson_points(t, pts, constant_data(0.0, 2.5), QUAD)
        assert np.max(np.abs(v - 2.5 * t)) < 1e-12


def test_affine_data_propagates_unchanged():
    # phi0 = x1 is a static solution
    data = InitialData(phi0=lambda a, b: a, grad_phi0=lambda a, b: (np.ones_like(a), 0 * a))
    assert poisson_eval(2.0, (1.5, -3.0), data, QUAD) == pytest.approx(1.5, abs=1e-12)


def test_rim_substitutions_agree():
    data = gaussian_data(velocity=0.4)
    a = poisson_eval(1.7, (0.6, 0.2), data, QuadratureSpec(128, 128, "cos_sub"))
    b = poisson_eval(1.7, (0.6, 0.2), data, QuadratureSpec(128, 128, "sqrt_sub"))
    assert a == pytest.approx(b, abs=1e-12)


def test_quadrature_error_shrinks_with_nodes():
    t, x = 3.0, (1.0, 0.5)
    exact_pt = poisson_eval(t, x, gaussian_data(), QuadratureSpec(256, 256))
    errs = [abs(poisson_eval(t, x, gaussian_data(), QuadratureSpec(n, n)) - exact_pt) for n in (8, 16)]
    assert errs[1] <= errs[0] / 2


def test_finite_difference_gradient_matches_analytic():
    g = gaussian_data()
    fd = InitialData(g.phi0, g.phi1)
    assert poisson_eval(1.2, (0.3, 0.1), fd, QUAD) == pytest.approx(
        poisson_eval(1.2, (0.3, 0.1), g, QUAD), abs=1e-8)


def test_poisson_matches_spectral_oracle():
    data = gaussian_data()
    spec = TorusOracleSpec(period_L=10.0, modes_per_axis=128)
    rng = np.random.default_rng(1)
    for t in (0.5, 2.0, 4.0):
        state = spectral_solve_periodic(data, spec, t)[0]
        idx = rng.integers(30, 98, size=(3, 2))
        pts = state.grid.axis1[idx]
        ref = state.u.values[idx[:, 0], idx[:, 1]]
        assert np.max(np.abs(poisson_points(t, pts, data, QUAD) - ref)) < 1e-10


def test_oracle_single_mode_exact():
    spec = TorusOracleSpec(period_L=4.0, modes_per_axis=32)
    k = 2 * math.pi / 8.0 * 3
    data = InitialData(lambda a, b: np.cos(k * a))
    s = spectral_solve_periodic(data, spec, 5.0, periodic_data=True)[0]
    x1, _ = s.grid.coords()
    assert np.max(np.abs(s.u.values - math.cos(5 * k) * np.cos(k * x1))) < 1e-12
    assert np.max(np.abs(s.p.values + k * math.sin(5 * k) * np.cos(k * x1))) < 1e-12


def test_oracle_constant_source():
    spec = TorusOracleSpec(period_L=4.0, modes_per_axis=16)
    s = spectral_solve_periodic(constant_data(0, 0), spec, 3.0, source=lambda t, a, b: np.ones_like(a),
                                periodic_data=True)[0]
    assert np.allclose(s.u.values, 4.5, atol=1e-12)
    assert np.allclose(s.p.values, 3.0, atol=1e-12)


def test_oracle_horizon_guard():
    spec = TorusOracleSpec(period_L=10.0, modes_per_axis=128)
    T = horizon(gaussian_data(), spec)
    assert 4.0 < T < 5.0
    with pytest.raises(ValueError, match="oracle horizon exceeded"):
        spectral_solve_periodic(gaussian_data(), spec, T + 0.1)


def test_duhamel_matches_oracle():
    src = lambda tau, a, b: math.cos(tau) * np.exp(-a * a - b * b)  # noqa: E731
    spec = TorusOracleSpec(period_L=10.0, modes_per_axis=128, dt=0.1)
    t = 2.0
    s = spectral_solve_periodic(constant_data(0, 0), spec, t, source=src, source_support=5.3)[0]
    i = j = 64 + 4
    ref = s.u.values[i, j]
    x = (s.grid.axis1[i], s.grid.axis2[j])
    got = duhamel_eval(t, x, src, np.linspace(0, t, 81), QuadratureSpec(64, 64))
    assert got == pytest.approx(ref, abs=2e-4)


def test_linear_solution_at_zero_time_is_data():
    g = Grid.square(2.0, 9)
    f = linear_solution(0.0, g, gaussian_data(), QUAD)
    assert np.allclose(f.values, np.exp(-g.radius() ** 2))


def test_invalid_time_and_bad_data():
    with pytest.raises(ValueError, match="invalid time"):
        poisson_eval(0.0, (0, 0), gaussian_data())
    bad = InitialData(lambda a, b: np.where(a > 0.2, np.nan, 0.0))
    with pytest.raises(ValueError, match="not evaluable"):
        poisson_eval(1.0, (0, 0), bad, QUAD)


def test_class_h_check():
    assert rational_class_constant(2.0) == pytest.approx(2**1.5)
    rational_data(1.0, 2.0)  # passes at its own constant
    with pytest.raises(ValueError, match="data outside class"):
        InitialData(lambda a, b: np.ones_like(a), decay=DecayParams(1.0, 2.0))


def test_rational_closed_form_value():
    assert rational_data().phi0(np.array(1.0), np.array(0.0)) == pytest.approx(0.5)


def test_poisson_field_shape():
    g = Grid.square(1.0, 5)
    f = poisson_field(0.5, g, gaussian_data(), QuadratureSpec(16, 16))
    assert f.values.shape == (5, 5)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0))
def test_linearity_in_data(t, lam):
    x = (0.4, -0.3)
    q = QuadratureSpec(32, 32)
    base = poisson_eval(t, x, gaussian_data(velocity=0.3), q)
    scaled = poisson_eval(t, x, gaussian_data(velocity=0.3).scaled(lam), q)
    assert scaled == pytest.approx(lam * base, abs=1e-12)


# ---- angular kernel --------------------------------------------------------


@pytest.mark.parametrize("t,a,r", [(0.5, 1.0, 1.2), (1.9, 1.0, 1.0), (2.0, 3.0, 4.0)])
def test_h_branch_ii_against_ellipk(t, a, r):
    c = (a * a + r * r - t * t) / (2 * a * r)
    assert h_branch(t, a, r) == "II"
    ref = 2.0 / math.sqrt(a * r) * special.ellipk((1 - c) / 2)
    assert h_integral(t, a, r) == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("t,a,r", [(3.0, 1.0, 1.0), (10.0, 0.5, 2.0), (2.2, 1.0, 1.0)])
def test_h_branch_i_against_direct_trapezoid(t, a, r):
    psi = np.linspace(-math.pi, math.pi, 4001)[:-1]
    direct = np.sum(1.0 / np.sqrt(t * t - a * a - r * r + 2 * a * r * np.cos(psi))) * (2 * math.pi / 4000)
    assert h_branch(t, a, r) == "I"
    assert h_integral(t, a, r) == pytest.approx(direct, rel=1e-9)


def test_h_at_origin():
    assert h_integral(2.0, 0.0, 1.0) == pytest.approx(2 * math.pi / math.sqrt(3.0))


def test_h_outside_cone():
    for args in [(1.0, 3.0, 1.0), (2.0, 1.0, 1.0), (0.5, 0.0, 1.0)]:
        with pytest.raises(ValueError, match="outside light-cone configuration"):
            h_integral(*args)


def test_kernel_sample_prefix_stable():
    a = kernel_sample(50, "I")
    b = kernel_sample(100, "I")
    assert np.array_equal(a, b[:50])
    for t, x, r in kernel_sample(40, "II"):
        assert h_branch(t, x, r) == "II"


def test_kernel_constants_finite_and_stable():
    c100 = kernel_constants(60)
    c200 = kernel_constants(120)
    for key in ("I", "II"):
        assert math.isfinite(c100[key]) and c100[key] > 0
        assert abs(c200[key] / c100[key] - 1) < 0.25
