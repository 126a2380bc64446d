"""Pointwise decay envelope and fitted-constant probes for linear wave estimates.

Every probe evaluates both sides of an inequality on a deterministic sample of
times, takes ``C_est = sup(left / right)`` and reports how that sup evolves as
the time horizon doubles.  Solutions with sources come from the periodic
spectral oracle, so left sides are exact up to quadrature in time.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .grid import Grid, GridField, l2_norm, linf_norm
from .probe import ProbeReport, horizon_trend, safe_ratio
from .vector_fields import GENERATORS, Jet, apply_op
from .wave_kernel import (InitialData, QuadratureSpec, Torus, TorusOracleSpec, _accumulate,
                          _duhamel_modes, _Forcing, constant_data, poisson_points,
                          spectral_solve_periodic)

# torus used by the source probes: wide enough for horizon 20 with moving bumps
PROBE_TORUS = TorusOracleSpec(period_L=40.0, modes_per_axis=320, dt=0.2)


# ---------------------------------------------------------------------------
# envelope


@dataclass(frozen=True)
class Envelope:
    """``A / (sqrt(1+t+r) (1+|t-r|)^q)`` with ``q = 1/2`` inside the cone and ``k - 1/2`` outside."""

    A: float = 1.0
    k: float = 2.0

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError("decay exponent out of range: need k > 1")
        if not self.A > 0:
            raise ValueError("envelope amplitude must be positive")

    def __call__(self, t, r):
        t = np.asarray(t, float)
        r = np.asarray(r, float)
        gap = 1.0 + np.abs(t - r)
        q = np.where(r >= t, self.k - 0.5, 0.5)
        out = self.A / (np.sqrt(1.0 + t + r) * gap**q)
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def interior(t, r):
        return np.asarray(r) <= np.asarray(t)


def envelope(t: float, x, A: float = 1.0, k: float = 2.0):
    """Envelope value at time ``t`` and position ``x`` (a point or an array of points)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, float)
    r = np.abs(x) if x.ndim == 0 else np.linalg.norm(x, axis=-1)
    return Envelope(A, k)(t, r)


def _points_and_values(item) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(item, GridField):
        x1, x2 = item.grid.coords()
        return np.hypot(x1, x2).ravel(), item.values.ravel()
    pts, vals = item
    pts = np.asarray(pts, float).reshape(-1, 2)
    return np.hypot(pts[:, 0], pts[:, 1]), np.asarray(vals, float).ravel()


def verify_envelope(times: Sequence[float], fields: Sequence, env: Envelope,
                    horizons: Sequence[float] | None = None, slack: float = 2.0) -> ProbeReport:
    """Sup of ``|phi| / envelope`` over every sampled node and time.

    ``fields[i]`` is a :class:`GridField` or a ``(points, values)`` pair sampled at
    ``times[i]``.  ``details["rows"]`` holds ``(t, max interior ratio, max exterior ratio)``.
    """
    if len(times) == 0 or len(times) != len(fields):
        raise ValueError("empty sample" if len(times) == 0 else "times and fields differ in length")
    rows, sups = [], []
    for t, item in zip(times, fields):
        r, v = _points_and_values(item)
        if v.size == 0:
            raise ValueError("empty sample")
        ratio = np.abs(v) / env(t, r)
        inner = Envelope.interior(t, r)
        ri = float(ratio[inner].max()) if inner.any() else 0.0
        ro = float(ratio[~inner].max()) if (~inner).any() else 0.0
        rows.append((float(t), ri, ro))
        sups.append(max(ri, ro))
    if horizons is None:
        horizons = [max(times) / 2, max(times)]
    trend = horizon_trend(times, sups, horizons)
    return ProbeReport("decay_envelope", f"{len(times)} snapshots, A={env.A:g}, k={env.k:g}",
                       trend[-1][1], trend, slack, {"rows": rows})


def quadrature_for(t: float, base: int = 256, per_unit_time: float = 16.0) -> QuadratureSpec:
    """Node counts growing with ``t`` so the rim and far circles stay resolved."""
    n = max(base, int(32 * math.ceil(per_unit_time * t / 32)))
    return QuadratureSpec(radial_nodes=n, angular_nodes=n)


def radial_samples(data: InitialData, times: Sequence[float], radii: Sequence[float] | Callable,
                   workers: int = 1) -> list[tuple[np.ndarray, np.ndarray]]:
    """Solution of radially symmetric data along the ray ``x2 = 0``.

    ``radii`` is a fixed array or ``radii(t) -> array``.
    """
    out = []
    for t in times:
        rr = np.asarray(radii(t) if callable(radii) else radii, float)
        pts = np.column_stack([rr, np.zeros_like(rr)])
        if t == 0:
            vals = np.asarray(data.phi0(pts[:, 0], pts[:, 1]), float) * np.ones(len(rr))
        else:
            vals = poisson_points(t, pts, data, quadrature_for(t), workers=workers)
        out.append((pts, vals))
    return out


def fit_log_slope(t: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of ``ln|values|`` against ``ln(1+t)``."""
    t = np.asarray(t, float)
    v = np.abs(np.asarray(values, float))
    return float(np.polyfit(np.log1p(t), np.log(v), 1)[0])


# ---------------------------------------------------------------------------
# space-time sources


@dataclass(frozen=True)
class SpaceTimeSource:
    """``value(tau, x1, x2)`` with optional ``dtau`` for vector-field derivatives.

    ``radius(T)`` bounds the region holding the source on ``[0, T]``.
    """

    value: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    dtau: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    radius: Callable[[float], float] = lambda T: 0.0
    name: str = "source"

    def sample(self, tau: float, grid: Grid) -> np.ndarray:
        x1, x2 = grid.coords()
        return np.asarray(self.value(tau, x1, x2), float) * np.ones_like(x1)

    def jet(self, tau: float, grid: Grid) -> Jet:
        if self.dtau is None:
            raise ValueError(f"missing Z-derivatives: source {self.name!r} has no time derivative")
        x1, x2 = grid.coords()
        d1 = np.asarray(self.dtau(tau, x1, x2), float) * np.ones_like(x1)
        return Jet(tau, grid, (self.sample(tau, grid), d1))

    def scaled(self, factor: float) -> "SpaceTimeSource":
        v, d = self.value, self.dtau
        return SpaceTimeSource(lambda s, a, b: factor * v(s, a, b),
                               None if d is None else (lambda s, a, b: factor * d(s, a, b)),
                               self.radius, self.name)


def gaussian_bump(amplitude: float = 1.0, width: float = 1.0, velocity=(0.0, 0.0),
                  center=(0.0, 0.0), tol: float = 1e-12) -> SpaceTimeSource:
    """``a exp(-|x - c - v tau|^2 / w^2)``."""
    c1, c2 = center
    v1, v2 = velocity

    def value(tau, x1, x2):
        return amplitude * np.exp(-((x1 - c1 - v1 * tau) ** 2 + (x2 - c2 - v2 * tau) ** 2) / width**2)

    def dtau(tau, x1, x2):
        y1, y2 = x1 - c1 - v1 * tau, x2 - c2 - v2 * tau
        return value(tau, x1, x2) * 2.0 * (y1 * v1 + y2 * v2) / width**2

    reach = width * math.sqrt(math.log(max(abs(amplitude), tol) / tol + 1.0))
    speed = math.hypot(v1, v2)
    return SpaceTimeSource(value, dtau, lambda T: math.hypot(c1, c2) + speed * T + reach,
                           f"gaussian_bump(v={speed:g})")


def zero_source() -> SpaceTimeSource:
    return SpaceTimeSource(lambda s, a, b: np.zeros_like(a), lambda s, a, b: np.zeros_like(a),
                           lambda T: 0.0, "zero")


def default_times(T: float, step: float = 0.5) -> np.ndarray:
    return np.arange(step, T + 1e-9, step)


def _cumulative(fn: Callable[[float], float], times: Sequence[float], step: float) -> np.ndarray:
    """``int_0^t fn`` at each of ``times`` by the trapezoid rule on a grid containing them."""
    times = np.asarray(times, float)
    grid = np.union1d(np.arange(0.0, times.max() + step, step), np.append(times, 0.0))
    grid = grid[grid <= times.max() + 1e-12]
    vals = np.array([fn(float(s)) for s in grid])
    cum = integrate.cumulative_trapezoid(vals, grid, initial=0.0)
    return np.interp(times, grid, cum)


def _check_horizon(spec: TorusOracleSpec, T: float, *radii: float) -> None:
    reach = max(radii, default=0.0) + T
    if reach >= spec.period_L:
        raise ValueError(f"oracle horizon exceeded: support plus T = {reach:g} >= L = {spec.period_L:g}")


def _report(name, sample, times, ratios, T, slack, horizons, details) -> ProbeReport:
    hz = [T / 2, T] if horizons is None else list(horizons)
    trend = horizon_trend(times, ratios, hz)
    details = dict(details, times=list(map(float, times)), ratios=list(map(float, ratios)))
    return ProbeReport(name, sample, trend[-1][1], trend, slack, details)


# ---------------------------------------------------------------------------
# energy estimate in H^s


def band_limited_data(seed: int = 0, modes: int = 12, kmax: int = 4,
                      spec: TorusOracleSpec = TorusOracleSpec(period_L=8.0, modes_per_axis=64)) -> InitialData:
    """Random trigonometric data periodic on the torus of ``spec`` (wavenumbers ``<= kmax``)."""
    rng = np.random.default_rng(seed)
    base = math.pi / spec.period_L
    m = rng.integers(-kmax, kmax + 1, size=(modes, 2))
    a0, b0, a1, b1 = rng.standard_normal((4, modes))
    k1, k2 = base * m[:, 0], base * m[:, 1]

    def _sum(a, b):
        def f(x1, x2):
            x1 = np.asarray(x1, float)[..., None]
            x2 = np.asarray(x2, float)[..., None]
            ph = k1 * x1 + k2 * x2
            return np.sum(a * np.cos(ph) + b * np.sin(ph), axis=-1)
        return f

    return InitialData(_sum(a0, b0), _sum(a1, b1), name=f"band_limited(seed={seed})")


def single_mode_data(m1: int = 1, m2: int = 0,
                     spec: TorusOracleSpec = TorusOracleSpec(period_L=8.0, modes_per_axis=64)) -> InitialData:
    base = math.pi / spec.period_L
    return InitialData(lambda x1, x2: np.cos(base * (m1 * x1 + m2 * x2)), name=f"mode({m1},{m2})")


def energy_probe_s(data: InitialData, s: int, T: float = 20.0,
                   source: SpaceTimeSource | None = None,
                   spec: TorusOracleSpec = TorusOracleSpec(period_L=8.0, modes_per_axis=64),
                   times: Sequence[float] | None = None, periodic: bool = True,
                   horizons: Sequence[float] | None = None, slack: float = 2.0) -> ProbeReport:
    """``||d phi(t)||_{H^s}`` against ``||grad phi0||_{H^s} + ||phi1||_{H^s} + int ||f||_{H^s}``.

    ``H^s`` uses the weight ``(1+|xi|)^(s/2)``.  With ``periodic`` the data are taken
    as genuinely periodic on the torus; otherwise the wrap-around horizon applies.
    """
    if s not in (0, 1):
        raise ValueError(f"unsupported Sobolev index s = {s}; only 0 and 1 are implemented")
    times = default_times(T) if times is None else np.asarray(times, float)
    torus = Torus(spec)
    if not periodic and source is not None:
        _check_horizon(spec, T, source.radius(T))
    states = spectral_solve_periodic(
        data, spec, T, source=None if source is None else source.value, times=times,
        source_support=0.0 if source is None else source.radius(T), periodic_data=periodic)

    def grad_norm(values):
        hat = torus.fft(values)
        g1 = torus.sobolev_norm(1j * torus.k1 * hat, s)
        g2 = torus.sobolev_norm(1j * torus.k2 * hat, s)
        return hat, g1, g2

    f0, f1 = data.sample(torus.grid)
    _, a1, a2 = grad_norm(f0)
    rhs0 = math.sqrt(a1 * a1 + a2 * a2) + torus.sobolev_norm(torus.fft(f1), s)
    if source is None:
        forcing = np.zeros(len(times))
    else:
        forcing = _cumulative(lambda tau: torus.sobolev_norm(torus.fft(source.sample(tau, torus.grid)), s),
                              times, spec.dt)
    ratios, lhs_all = [], []
    for st, fint in zip(states, forcing):
        _, g1, g2 = grad_norm(st.u.values)
        pt = torus.sobolev_norm(torus.fft(st.p.values), s)
        lhs = math.sqrt(g1 * g1 + g2 * g2 + pt * pt)
        lhs_all.append(lhs)
        ratios.append(safe_ratio(lhs, rhs0 + fint))
    return _report(f"energy_H{s}", f"{data.name}, {len(times)} times", times, ratios, T, slack,
                   horizons, {"lhs": lhs_all, "rhs": list(rhs0 + forcing)})


# ---------------------------------------------------------------------------
# L^p estimate with an L^1 source


def _lp_norm(values: np.ndarray, h: float, p: float) -> float:
    return float((h * h * np.sum(np.abs(values) ** p)) ** (1.0 / p))


def _zero_data() -> InitialData:
    return constant_data(0.0, 0.0)


def lp_source_probe(source: SpaceTimeSource, p: float = 2.0, T: float = 20.0,
                    spec: TorusOracleSpec = PROBE_TORUS, times: Sequence[float] | None = None,
                    horizons: Sequence[float] | None = None, slack: float = 2.0) -> ProbeReport:
    """``||phi(t)||_{L^p}`` against ``(1+t)^(2/p-1) int_0^t ||g||_{L^1}`` for zero data."""
    if not 1.0 < p <= 2.0:
        raise ValueError(f"p = {p} outside (1, 2]")
    times = default_times(T) if times is None else np.asarray(times, float)
    _check_horizon(spec, T, source.radius(T))
    torus = Torus(spec)
    h = torus.grid.h
    states = spectral_solve_periodic(_zero_data(), spec, T, source=source.value, times=times,
                                     source_support=source.radius(T), periodic_data=True)
    l1 = _cumulative(lambda tau: h * h * float(np.sum(np.abs(source.sample(tau, torus.grid)))),
                     times, spec.dt)
    lhs = [_lp_norm(st.u.values, h, p) for st in states]
    rhs = (1.0 + times) ** (2.0 / p - 1.0) * l1
    ratios = [safe_ratio(a, b) for a, b in zip(lhs, rhs)]
    return _report("lp_source", f"{source.name}, p={p:g}, {len(times)} times", times, ratios, T,
                   slack, horizons, {"lhs": lhs, "rhs": rhs.tolist()})


# ---------------------------------------------------------------------------
# product source


def _z_l2_sq(src: SpaceTimeSource, tau: float, grid: Grid) -> float:
    """``sum_{|I|<=1} ||Z^I g(tau)||_L2^2``."""
    jet = src.jet(tau, grid)
    total = l2_norm(jet.derivs[0], grid.h) ** 2
    for op in GENERATORS:
        total += apply_op(op, jet).l2() ** 2
    return total


def product_source_probe(g1: SpaceTimeSource, g2: SpaceTimeSource, T: float = 20.0,
                         spec: TorusOracleSpec = PROBE_TORUS, times: Sequence[float] | None = None,
                         horizons: Sequence[float] | None = None, slack: float = 2.0) -> ProbeReport:
    """Solution of ``box phi = |g1 g2|`` against the L2 and weighted sup bounds.

    The main report covers
    ``||phi||_L2 <= C (1+t)^(1/4) (int (1+tau)^(-1/2) sum ||Z^I g1||^2)^(1/2) (int ||g2||^2)^(1/2)``;
    ``details["linf"]`` holds the report for
    ``(1+t)^(1/2) ||phi||_inf <= C (int sum ||Z^I g1||^2 / sqrt(1+tau))^(1/2) (same for g2)^(1/2)``
    and both must pass.
    """
    times = default_times(T) if times is None else np.asarray(times, float)
    radius = min(g1.radius(T), g2.radius(T))
    _check_horizon(spec, T, radius)
    torus = Torus(spec)
    grid = torus.grid
    # the Z-derivatives are requested up front so a missing one fails before any solve
    g1.jet(0.0, grid), g2.jet(0.0, grid)

    def source(tau, x1, x2):
        return np.abs(g1.value(tau, x1, x2) * g2.value(tau, x1, x2))

    states = spectral_solve_periodic(_zero_data(), spec, T, source=source, times=times,
                                     source_support=radius, periodic_data=True)
    z1 = _cumulative(lambda tau: _z_l2_sq(g1, tau, grid) / math.sqrt(1 + tau), times, spec.dt)
    z2 = _cumulative(lambda tau: _z_l2_sq(g2, tau, grid) / math.sqrt(1 + tau), times, spec.dt)
    n2 = _cumulative(lambda tau: l2_norm(g2.sample(tau, grid), grid.h) ** 2, times, spec.dt)
    lhs_l2 = [st.u.l2() for st in states]
    lhs_inf = [math.sqrt(1 + t) * st.u.linf() for t, st in zip(times, states)]
    rhs_l2 = (1 + times) ** 0.25 * np.sqrt(z1) * np.sqrt(n2)
    rhs_inf = np.sqrt(z1) * np.sqrt(z2)
    r_l2 = [safe_ratio(a, b) for a, b in zip(lhs_l2, rhs_l2)]
    r_inf = [safe_ratio(a, b) for a, b in zip(lhs_inf, rhs_inf)]
    sample = f"{g1.name} x {g2.name}, {len(times)} times"
    linf = _report("product_source_linf", sample, times, r_inf, T, slack, horizons,
                   {"lhs": lhs_inf, "rhs": rhs_inf.tolist()})
    rep = _report("product_source_l2", sample, times, r_l2, T, slack, horizons,
                  {"lhs": lhs_l2, "rhs": rhs_l2.tolist(), "linf": linf.to_dict()})
    rep.parts = [linf]
    return rep


# ---------------------------------------------------------------------------
# divergence-form source


def divergence_solution(fields: Sequence[SpaceTimeSource | None], coeffs: Sequence[float],
                        times: Sequence[float], spec: TorusOracleSpec) -> list[np.ndarray]:
    """Solution of ``box phi = a0 d_t f0 + a1 d_1 f1 + a2 d_2 f2`` with zero data.

    Spatial terms enter as ``i xi_j f_j_hat``.  The time-derivative term is
    integrated by parts mode by mode:
    ``-sin(t|xi|)/|xi| f0_hat(0) + int_0^t cos((t-tau)|xi|) f0_hat(tau) dtau``.
    """
    if len(fields) != 3 or len(coeffs) != 3:
        raise ValueError("need three fields and three coefficients (f0, f1, f2)")
    torus = Torus(spec)
    grid = torus.grid
    f0, f1, f2 = fields
    a0, a1, a2 = coeffs
    wave = (torus.k1, torus.k2)
    spatial = [(a, f, k) for a, f, k in ((a1, f1, wave[0]), (a2, f2, wave[1])) if f is not None and a != 0]

    def spatial_hat(tau):
        out = np.zeros((grid.n, grid.n), complex)
        for a, f, k in spatial:
            out += a * 1j * k * torus.fft(f.sample(tau, grid))
        return out

    def f0_hat(tau):
        return torus.fft(f0.sample(tau, grid))

    zero = np.zeros((grid.n, grid.n), complex)
    fs = _Forcing(c=zero.copy(), s=zero.copy()) if spatial else None
    ft = _Forcing(c=zero.copy(), s=zero.copy()) if (f0 is not None and a0 != 0) else None
    init = f0_hat(0.0) if ft is not None else None
    out: list[np.ndarray | None] = [None] * len(times)
    for idx in np.argsort(times, kind="stable"):
        t = float(times[idx])
        pos = zero.copy()
        if fs is not None:
            _accumulate(torus, fs, spatial_hat, t)
            pos += _duhamel_modes(torus, fs, t)[0]
        if ft is not None:
            _accumulate(torus, ft, f0_hat, t)
            pos += a0 * (_duhamel_modes(torus, ft, t)[1] - torus.sin_over_k(t) * init)
        out[idx] = torus.ifft(pos)
    return out  # type: ignore[return-value]


def divergence_source_probe(fields: Sequence[SpaceTimeSource | None], coeffs: Sequence[float],
                            T: float = 20.0, spec: TorusOracleSpec = PROBE_TORUS,
                            times: Sequence[float] | None = None,
                            horizons: Sequence[float] | None = None, slack: float = 2.0) -> ProbeReport:
    """``||phi(t)||_L2`` against ``sum_j int_0^t ||f_j||_L2 + ||f0(0)||_L2``."""
    times = default_times(T) if times is None else np.asarray(times, float)
    present = [f for f in fields if f is not None]
    _check_horizon(spec, T, *(f.radius(T) for f in present))
    grid = Torus(spec).grid
    sols = divergence_solution(fields, coeffs, times, spec)
    total = np.zeros(len(times))
    for f in present:
        total += _cumulative(lambda tau, f=f: l2_norm(f.sample(tau, grid), grid.h), times, spec.dt)
    if fields[0] is not None:
        total += l2_norm(fields[0].sample(0.0, grid), grid.h)
    lhs = [l2_norm(s, grid.h) for s in sols]
    ratios = [safe_ratio(a, b) for a, b in zip(lhs, total)]
    names = ",".join(f.name for f in present) or "zero"
    return _report("divergence_source", f"{names}, {len(times)} times", times, ratios, T, slack,
                   horizons, {"lhs": lhs, "rhs": total.tolist()})
