import math

import numpy as np
import pytest

from hgflow.grid import Grid, GridField, WaveState
from hgflow.vector_fields import (GENERATORS, RESIDUAL_FLOOR, TEST_FUNCTIONS, FieldOp, Jet,
                                  apply_multiindex, apply_op, commutator_residual,
                                  commutator_suite, klainerman_inequality_probe, linear_jet,
                                  multiindices, nonlinear_jet, norm_bundle, state_jet)
from hgflow.wave_kernel import TorusOracleSpec, gaussian_data, spectral_solve_periodic

GRID = Grid.square(3.0, 121)


def poly_jet(t=0.7):
    # phi = t^2 - |x|^2
    return TEST_FUNCTIONS[1].jet(t, GRID)


def test_seven_generators():
    assert len(GENERATORS) == 7
    assert {op.value for op in GENERATORS} == {"dt", "d1", "d2", "L0", "Omega12", "Omega01", "Omega02"}


def test_scaling_field_on_quadratic():
    jet = poly_jet()
    x1, x2 = GRID.coords()
    # L0 (t^2 - |x|^2) = 2 (t^2 - |x|^2)
    assert np.max(np.abs(apply_op(FieldOp.L0, jet).values - 2 * (0.49 - x1**2 - x2**2))) < 1e-9


def test_boosts_and_rotation_annihilate_lorentz_invariant():
    jet = poly_jet()
    for op in (FieldOp.OMEGA01, FieldOp.OMEGA02, FieldOp.OMEGA12):
        assert np.max(np.abs(apply_op(op, jet).values)) < 1e-9


def test_rotation_of_radial_function():
    jet = TEST_FUNCTIONS[0].jet(0.3, GRID)
    assert np.max(np.abs(apply_op(FieldOp.OMEGA12, jet).values)) < 1e-5


def test_time_derivative_channel_required():
    jet = Jet(0.0, GRID, (np.zeros((GRID.n, GRID.n)),))
    with pytest.raises(ValueError, match="missing time-derivative channel"):
        apply_op(FieldOp.L0, jet)
    apply_op(FieldOp.D1, jet)


def test_multiindex_cap():
    jet = poly_jet()
    with pytest.raises(ValueError, match="exceeds cap"):
        apply_multiindex((FieldOp.D1,) * 3, jet)


def test_composed_boost_against_closed_form():
    # Omega01 Omega01 (t x1) = Omega01 (t^2 + x1^2) = 4 t x1
    t = 0.9
    x1, x2 = GRID.coords()
    z = np.zeros_like(x1)
    jet = Jet(t, GRID, (t * x1, x1, z, z))
    out = apply_multiindex((FieldOp.OMEGA01, FieldOp.OMEGA01), jet)
    assert np.max(np.abs(out.values - 4 * t * x1)) < 1e-9


def test_multiindex_count():
    assert len(multiindices(2)) == 1 + 7 + 49


def test_jets_from_equations():
    g = Grid.square(2.0, 41)
    x1, x2 = g.coords()
    u = np.exp(-x1**2 - x2**2)
    p = 0.5 * u
    lin = linear_jet(u, p, 0.0, g)
    assert lin.depth == 4
    non = nonlinear_jet(u, p, 0.0, g)
    assert np.allclose(non.derivs[2], np.exp(-u) * lin.derivs[2] - p * p)
    s = WaveState(0.0, GridField(u, g), GridField(p, g))
    assert np.array_equal(state_jet(s, "linear").derivs[3], lin.derivs[3])
    with pytest.raises(ValueError):
        state_jet(s, "other")


def test_nonlinear_jet_on_spatially_constant_solution():
    # u(t) = ln(1 + t) solves u_tt = -u_t^2 with lap u = 0
    g = Grid.square(1.0, 11)
    one = np.ones((11, 11))
    t = 0.4
    jet = nonlinear_jet(math.log1p(t) * one, one / (1 + t), t, g)
    assert np.allclose(jet.derivs[2], -1 / (1 + t) ** 2)
    assert np.allclose(jet.derivs[3], 2 / (1 + t) ** 3)


@pytest.mark.parametrize("op", list(GENERATORS))
def test_commutators_converge(op):
    res = [commutator_residual(op, TEST_FUNCTIONS[2], h) for h in (0.1, 0.05, 0.025)]
    for a, b in zip(res, res[1:]):
        assert b <= RESIDUAL_FLOOR or math.log2(a / b) >= 3.5


def test_l0_commutator_has_order_four():
    rec = [r for r in commutator_suite(ops=[FieldOp.L0], tests=TEST_FUNCTIONS[:1])]
    assert rec[-1]["order_estimate"] > 3.8


def test_norm_bundle_of_zero_and_constant():
    g = Grid.square(2.0, 21)
    z = np.zeros((21, 21))
    b = norm_bundle(linear_jet(z, z, 0.0, g))
    assert (b.M1, b.M2, b.N1, b.N2) == (0.0, 0.0, 0.0, 0.0)
    b = norm_bundle(linear_jet(z + 2.0, z, 0.0, g), l1=2, l2=1)
    # only the identity index sees the constant
    assert b.N2 == pytest.approx(2.0)
    assert b.M2 == pytest.approx(2.0 * 4.0 * 21 / 20, rel=0.2)
    assert b.N1 == pytest.approx(0.0, abs=1e-9)


def test_norm_bundle_caveat_and_depth():
    g = Grid.square(2.0, 21)
    z = np.zeros((21, 21))
    assert "bootstrap" in norm_bundle(linear_jet(z, z, 0.0, g)).caveat
    with pytest.raises(ValueError):
        norm_bundle(linear_jet(z, z, 0.0, g, depth=3), l1=2)


def test_klainerman_probe_zero_is_vacuous_pass():
    g = Grid.square(2.0, 21)
    z = np.zeros((21, 21))
    rep = klainerman_inequality_probe([linear_jet(z, z, t, g) for t in (1.0, 2.0)])
    assert rep.c_est == 0.0 and rep.passed


def test_klainerman_probe_on_free_wave():
    spec = TorusOracleSpec(period_L=16.0, modes_per_axis=128)
    times = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    states = spectral_solve_periodic(gaussian_data(), spec, 6.0, times=times)
    jets = [state_jet(s, "linear", depth=3) for s in states]
    rep = klainerman_inequality_probe(jets)
    assert rep.passed and 0 < rep.c_est < 10
