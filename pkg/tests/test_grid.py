import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hgflow.grid import (DecayParams, Grid, GridField, WaveState, diff1, diff2, interior_mask,
                         l2_norm, laplacian, linf_norm)


def test_square_grid_endpoints():
    g = Grid.square(2.0, 41)
    assert g.h == pytest.approx(0.1)
    assert g.axis1[0] == -2.0 and g.axis1[-1] == pytest.approx(2.0)


def test_periodic_grid_excludes_right_end():
    g = Grid.periodic(4.0, 16)
    assert g.h == 0.5
    assert g.axis1[-1] == pytest.approx(3.5)


def test_refine_keeps_square():
    g = Grid.square(1.0, 11).refine()
    assert g.n == 21 and g.h == pytest.approx(0.1)
    assert g.axis1[-1] == pytest.approx(1.0)


def test_field_shape_checked():
    with pytest.raises(ValueError):
        GridField(np.zeros((3, 4)), Grid.square(1.0, 3))


@pytest.mark.parametrize("deg", range(5))
def test_diff1_exact_on_polynomials(deg):
    g = Grid.square(1.0, 21)
    x1, _ = g.coords()
    d = diff1(x1**deg, g.h, 0)
    exact = deg * x1 ** max(deg - 1, 0) if deg else 0 * x1
    assert np.max(np.abs(d - exact)) < 1e-10


@pytest.mark.parametrize("deg", range(6))
def test_diff2_exact_on_polynomials(deg):
    g = Grid.square(1.0, 21)
    _, x2 = g.coords()
    d = diff2(x2**deg, g.h, 1)
    exact = deg * (deg - 1) * x2 ** max(deg - 2, 0) if deg >= 2 else 0 * x2
    assert np.max(np.abs(d - exact)) < 1e-8


def test_stencils_fourth_order_including_edges():
    errs1, errs2 = [], []
    for n in (41, 81, 161):
        g = Grid.square(1.0, n)
        x1, x2 = g.coords()
        f = np.sin(2 * x1) * np.cos(x2)
        errs1.append(np.max(np.abs(diff1(f, g.h, 0) - 2 * np.cos(2 * x1) * np.cos(x2))))
        errs2.append(np.max(np.abs(laplacian(f, g.h) + 5 * f)))
    for e in (errs1, errs2):
        assert math.log2(e[0] / e[1]) > 3.5
        assert math.log2(e[1] / e[2]) > 3.5


@settings(max_examples=25, deadline=None)
@given(st.floats(-1e3, 1e3, allow_nan=False), st.integers(6, 30))
def test_laplacian_of_constant_is_exact_zero(c, n):
    f = np.full((n, n), c)
    assert np.all(laplacian(f, 0.37) == 0.0)


def test_l2_norm_of_gaussian():
    g = Grid.square(8.0, 321)
    val = l2_norm(np.exp(-g.radius() ** 2), g.h)
    assert val == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)


def test_norms_with_mask():
    g = Grid.square(1.0, 11)
    v = np.arange(121.0).reshape(11, 11)
    m = np.zeros_like(v, bool)
    assert linf_norm(v, m) == 0.0
    m[0, 0] = True
    assert l2_norm(v, 1.0, m) == 0.0
    assert GridField(v, g).linf() == 120.0


def test_interior_mask_fraction():
    g = Grid.square(10.0, 101)
    m = interior_mask(g, 0.8)
    x1, _ = g.coords()
    assert np.abs(x1[m]).max() == pytest.approx(8.0)


def test_decay_params_reject_small_k():
    with pytest.raises(ValueError, match="decay exponent out of range"):
        DecayParams(1.0, 1.0)


def test_state_finiteness():
    g = Grid.square(1.0, 8)
    v = np.zeros((8, 8))
    s = WaveState(0.0, GridField(v, g), GridField(v.copy(), g))
    assert s.is_finite()
    s.p.values[3, 3] = np.nan
    assert not s.is_finite()
