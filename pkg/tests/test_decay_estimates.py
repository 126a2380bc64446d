import math

import numpy as np
import pytest
from scipy import special

from hgflow.decay_estimates import (Envelope, SpaceTimeSource, band_limited_data,
                                    divergence_solution, divergence_source_probe, energy_probe_s,
                                    envelope, fit_log_slope, gaussian_bump, lp_source_probe,
                                    product_source_probe, radial_samples, single_mode_data,
                                    verify_envelope, zero_source)
from hgflow.grid import Grid, GridField
from hgflow.wave_kernel import TorusOracleSpec, constant_data, gaussian_data, spectral_solve_periodic

SMALL = TorusOracleSpec(period_L=20.0, modes_per_axis=128, dt=0.1)
TIMES = np.arange(0.5, 6.01, 0.5)


def test_envelope_values():
    env = Envelope(1.0, 2.0)
    assert env(0.0, 0.0) == pytest.approx(1.0)
    assert env(3.0, 3.0) == pytest.approx(1 / math.sqrt(7))
    assert env(8.0, 0.0) == pytest.approx(1 / 9)  # inside: 1/(3 * 3)
    assert env(0.0, 3.0) == pytest.approx(1 / 16)  # outside: 1/(2 * 4^(3/2))
    assert envelope(2.0, (3.0, 4.0), A=2.0) == pytest.approx(2 / (math.sqrt(8) * 4**1.5))


def test_envelope_continuous_on_cone_and_decreasing_outside():
    env = Envelope(1.0, 3.0)
    for t in (1.0, 5.0, 20.0):
        assert env(t, t - 1e-9) == pytest.approx(env(t, t + 1e-9), rel=1e-8)
        r = np.linspace(t, t + 50, 200)
        assert np.all(np.diff(env(t, r)) < 0)


def test_envelope_rejects_small_k():
    with pytest.raises(ValueError, match="decay exponent out of range"):
        Envelope(1.0, 1.0)
    with pytest.raises(ValueError):
        envelope(-1.0, (0.0, 0.0))


def test_verify_envelope_trivial_cases():
    g = Grid.square(5.0, 21)
    env = Envelope(1.0, 2.0)
    zero = [GridField(np.zeros((21, 21)), g) for _ in range(3)]
    rep = verify_envelope([1.0, 2.0, 3.0], zero, env)
    assert rep.c_est == 0.0 and rep.passed
    own = [GridField(env(t, g.radius()), g) for t in (1.0, 2.0)]
    assert verify_envelope([1.0, 2.0], own, env).c_est == pytest.approx(1.0)
    with pytest.raises(ValueError, match="empty sample"):
        verify_envelope([], [], env)


def test_radial_samples_match_closed_form():
    out = radial_samples(gaussian_data(), [0.0, 2.0], np.array([0.0, 1.0]))
    assert out[0][1] == pytest.approx([1.0, math.exp(-1.0)])
    assert out[1][1][0] == pytest.approx(1 - 4 * special.dawsn(2.0), abs=1e-12)


def test_fit_log_slope_exact():
    t = np.linspace(1, 30, 12)
    assert fit_log_slope(t, 3.0 * (1 + t) ** -1.5) == pytest.approx(-1.5)


def test_energy_probe_conserves_single_mode():
    rep = energy_probe_s(single_mode_data(2, 1), 0, T=10.0)
    assert rep.c_est == pytest.approx(1.0, abs=1e-10)
    assert rep.passed


@pytest.mark.parametrize("s", [0, 1])
def test_energy_probe_band_limited(s):
    rep = energy_probe_s(band_limited_data(3), s, T=10.0)
    assert 0 < rep.c_est <= 1.0 and rep.passed


def test_energy_probe_homogeneous_in_data():
    a = energy_probe_s(band_limited_data(1), 1, T=6.0)
    b = energy_probe_s(band_limited_data(1).scaled(4.0), 1, T=6.0)
    assert b.c_est == pytest.approx(a.c_est, rel=1e-10)


def test_energy_probe_unsupported_index():
    with pytest.raises(ValueError, match="unsupported"):
        energy_probe_s(band_limited_data(0), 2)


def test_energy_probe_constant_source_grows_linearly():
    src = SpaceTimeSource(lambda t, a, b: np.ones_like(a), lambda t, a, b: 0 * a, name="one")
    rep = energy_probe_s(constant_data(0, 0), 0, T=6.0, source=src)
    # phi = t^2 / 2 so ||phi_t|| equals the forcing integral exactly
    assert rep.c_est == pytest.approx(1.0, rel=1e-6)


def test_lp_probe_small_torus():
    rep = lp_source_probe(gaussian_bump(), T=6.0, spec=SMALL, times=TIMES)
    assert rep.passed and 0 < rep.c_est < 1


def test_lp_probe_homogeneous_and_errors():
    a = lp_source_probe(gaussian_bump(), T=4.0, spec=SMALL, times=TIMES[:8])
    b = lp_source_probe(gaussian_bump(amplitude=3.0), T=4.0, spec=SMALL, times=TIMES[:8])
    assert b.c_est == pytest.approx(a.c_est, rel=1e-9)
    with pytest.raises(ValueError, match=r"outside \(1, 2\]"):
        lp_source_probe(gaussian_bump(), p=1.0, spec=SMALL)
    with pytest.raises(ValueError, match="oracle horizon exceeded"):
        lp_source_probe(gaussian_bump(), T=30.0, spec=SMALL)


def test_lp_probe_refinement_stable():
    coarse = lp_source_probe(gaussian_bump(), T=6.0, spec=SMALL, times=TIMES)
    fine = lp_source_probe(gaussian_bump(), T=6.0, times=TIMES,
                           spec=TorusOracleSpec(period_L=20.0, modes_per_axis=256, dt=0.05))
    assert abs(fine.c_est / coarse.c_est - 1) < 0.1


def test_product_probe_small_torus():
    rep = product_source_probe(gaussian_bump(), gaussian_bump(velocity=(0.3, 0.0)), T=6.0,
                               spec=SMALL, times=TIMES)
    assert rep.passed and len(rep.parts) == 1
    assert rep.c_est > 0 and rep.parts[0].c_est > 0


def test_product_probe_needs_z_derivatives():
    bare = SpaceTimeSource(lambda t, a, b: np.exp(-a * a - b * b), name="bare")
    with pytest.raises(ValueError, match="missing Z-derivatives"):
        product_source_probe(bare, gaussian_bump(), T=4.0, spec=SMALL)


def _oscillating():
    base = gaussian_bump()
    return SpaceTimeSource(lambda t, a, b: math.cos(t) * np.exp(-a * a - b * b),
                           lambda t, a, b: -math.sin(t) * np.exp(-a * a - b * b),
                           base.radius, "oscillating")


def test_time_derivative_term_matches_direct_duhamel():
    f0 = _oscillating()
    times = [1.0, 2.5, 4.0]
    by_parts = divergence_solution([f0, None, None], [1.0, 0.0, 0.0], times, SMALL)
    direct = spectral_solve_periodic(constant_data(0, 0), SMALL, 4.0, source=f0.dtau, times=times,
                                     source_support=f0.radius(4.0), periodic_data=True)
    for a, b in zip(by_parts, direct):
        assert np.max(np.abs(a - b.u.values)) < 2e-3 * np.max(np.abs(b.u.values))


def test_spatial_term_is_derivative_of_scalar_solution():
    f1 = gaussian_bump()
    sol = divergence_solution([None, f1, None], [0.0, 1.0, 0.0], [3.0], SMALL)[0]
    scalar = spectral_solve_periodic(constant_data(0, 0), SMALL, 3.0, source=f1.value,
                                     source_support=f1.radius(3.0), periodic_data=True)[0]
    n, h = scalar.grid.n, scalar.grid.h
    k = 2 * np.pi * np.fft.fftfreq(n, h)
    ref = np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(scalar.u.values, axis=0), axis=0))
    assert np.max(np.abs(sol - ref)) < 1e-10


def test_divergence_probe_small_torus():
    rep = divergence_source_probe([_oscillating(), gaussian_bump(), None], [1.0, 1.0, 0.0],
                                  T=6.0, spec=SMALL, times=TIMES)
    assert rep.passed and 0 < rep.c_est < 2
    assert divergence_source_probe([zero_source(), None, None], [1, 0, 0], T=2.0, spec=SMALL,
                                   times=[1.0, 2.0]).c_est == 0.0
    with pytest.raises(ValueError):
        divergence_solution([None, None], [1, 1], [1.0], SMALL)
