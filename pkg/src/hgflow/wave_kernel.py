"""Exact and oracle solvers for the linear wave equation on the plane.

Three independent routes to the same solution:

* :func:`poisson_eval` / :func:`poisson_field` evaluate the Poisson
  representation formula as a disk integral around each evaluation point,
* :func:`duhamel_eval` adds sources through the same propagator,
* :func:`spectral_solve_periodic` evolves every Fourier mode exactly on a torus
  large enough that nothing wraps around before the requested time.

:func:`h_integral` is the angular kernel ``H(t, |x|, r)`` obtained by writing
the disk integral in polar coordinates about the origin.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from .grid import DecayParams, Grid, GridField, WaveState

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
GradFn = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]
SourceFn = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

# points per chunk in the batched disk quadrature
_CHUNK = 1 << 21


def _evaluate(fn: ScalarFn, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(x1, x2), dtype=float), np.broadcast(x1, x2).shape)


def zero_fn(x1, x2):
    return np.zeros(np.broadcast(x1, x2).shape)


@dataclass
class InitialData:
    """Cauchy data ``phi(0) = phi0``, ``phi_t(0) = phi1``.

    When ``decay`` is given the slow-decay bounds
    ``|phi0| <= A (1+|x|)^-k`` and ``|phi1| <= A (1+|x|)^-(k+1)`` are checked on
    a fixed polar sample out to radius 1e3.
    """

    phi0: ScalarFn
    phi1: ScalarFn = zero_fn
    grad_phi0: GradFn | None = None
    decay: DecayParams | None = None
    name: str = "custom"
    fd_step: float = 1e-3

    def __post_init__(self):
        if self.decay is not None:
            self.check_decay(self.decay)

    def check_decay(self, decay: DecayParams) -> None:
        r = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 241)])
        ang = np.linspace(0.0, 2 * np.pi, 16, endpoint=False)
        rr, aa = np.meshgrid(r, ang, indexing="ij")
        x1, x2 = rr * np.cos(aa), rr * np.sin(aa)
        w = 1.0 + rr
        slack = 1.0 + 1e-12
        b0 = np.abs(_evaluate(self.phi0, x1, x2)) * w**decay.k
        b1 = np.abs(_evaluate(self.phi1, x1, x2)) * w ** (decay.k + 1)
        if np.max(b0) > decay.A * slack or np.max(b1) > decay.A * slack:
            raise ValueError(
                f"data outside class (H): sup |phi0|(1+|x|)^k = {np.max(b0):.6g}, "
                f"sup |phi1|(1+|x|)^(k+1) = {np.max(b1):.6g}, A = {decay.A:.6g}"
            )

    def gradient(self, x1: np.ndarray, x2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.grad_phi0 is not None:
            g1, g2 = self.grad_phi0(x1, x2)
            shape = np.broadcast(x1, x2).shape
            return np.broadcast_to(g1, shape), np.broadcast_to(g2, shape)
        d = self.fd_step
        f = self.phi0

        def d_along(e1, e2):
            return (
                (_evaluate(f, x1 - 2 * d * e1, x2 - 2 * d * e2) - _evaluate(f, x1 + 2 * d * e1, x2 + 2 * d * e2))
                + 8.0 * (_evaluate(f, x1 + d * e1, x2 + d * e2) - _evaluate(f, x1 - d * e1, x2 - d * e2))
            ) / (12.0 * d)

        return d_along(1.0, 0.0), d_along(0.0, 1.0)

    def sample(self, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = grid.coords()
        return np.array(_evaluate(self.phi0, x1, x2)), np.array(_evaluate(self.phi1, x1, x2))

    def scaled(self, factor: float) -> "InitialData":
        """Data multiplied by ``factor`` (decay check dropped)."""
        g = self.grad_phi0
        return InitialData(
            phi0=lambda x1, x2: factor * _evaluate(self.phi0, x1, x2),
            phi1=lambda x1, x2: factor * _evaluate(self.phi1, x1, x2),
            grad_phi0=None if g is None else (lambda x1, x2: tuple(factor * c for c in g(x1, x2))),
            name=f"{factor:g}*{self.name}",
            fd_step=self.fd_step,
        )


# ---------------------------------------------------------------------------
# built-in data


def gaussian_data(amplitude: float = 1.0, width: float = 1.0, velocity: float = 0.0,
                  center: tuple[float, float] = (0.0, 0.0)) -> InitialData:
    """``phi0 = a exp(-|x-c|^2/w^2)``, ``phi1 = velocity * exp(-|x-c|^2/w^2)``."""
    c1, c2 = center

    def g(x1, x2):
        return np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / width**2)

    def grad(x1, x2):
        e = amplitude * g(x1, x2)
        return -2.0 * (x1 - c1) / width**2 * e, -2.0 * (x2 - c2) / width**2 * e

    return InitialData(
        phi0=lambda x1, x2: amplitude * g(x1, x2),
        phi1=lambda x1, x2: velocity * g(x1, x2),
        grad_phi0=grad,
        name="gaussian",
    )


def rational_class_constant(k: float) -> float:
    """Smallest ``A_H`` with ``(1+r^2)^(-k/2) <= A_H (1+r)^-k`` and the velocity analogue.

    ``(1+r)^2 / (1+r^2)`` peaks at 2 (``r = 1``), so ``A_H = 2^((k+1)/2)``.
    """
    return 2.0 ** ((k + 1.0) / 2.0)


def rational_profiles(A: float, k: float, velocity_sign: float = -1.0):
    """Profiles ``u0 = A(1+|x|^2)^(-k/2)``, ``u1 = sign*A(1+|x|^2)^(-(k+1)/2)`` and grad u0."""

    def u0(x1, x2):
        return A * (1.0 + x1 * x1 + x2 * x2) ** (-k / 2.0)

    def u1(x1, x2):
        return velocity_sign * A * (1.0 + x1 * x1 + x2 * x2) ** (-(k + 1.0) / 2.0)

    def grad(x1, x2):
        q = -k * A * (1.0 + x1 * x1 + x2 * x2) ** (-k / 2.0 - 1.0)
        return q * x1, q * x2

    return u0, u1, grad


def rational_data(A: float = 1.0, k: float = 2.0, velocity_sign: float = -1.0) -> InitialData:
    """Slow-decay rational data; ``velocity_sign = 0`` gives zero initial velocity."""
    u0, u1, grad = rational_profiles(A, k, velocity_sign)
    return InitialData(
        phi0=u0,
        phi1=u1,
        grad_phi0=grad,
        decay=DecayParams(A=rational_class_constant(k) * A, k=k),
        name="rational" if velocity_sign else "rational_static",
    )


def constant_data(c0: float = 1.0, c1: float = 0.0) -> InitialData:
    return InitialData(
        phi0=lambda x1, x2: np.full(np.broadcast(x1, x2).shape, float(c0)),
        phi1=lambda x1, x2: np.full(np.broadcast(x1, x2).shape, float(c1)),
        grad_phi0=lambda x1, x2: (zero_fn(x1, x2), zero_fn(x1, x2)),
        name=f"constant({c0:g},{c1:g})",
    )


# ---------------------------------------------------------------------------
# Poisson formula


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor rule for the disk integral: Gauss-Legendre across the radius,
    trapezoid (spectrally accurate for periodic integrands) around it.

    ``cos_sub`` maps ``rho = t sin(theta)`` so the rim factor becomes ``t cos(theta)``;
    ``sqrt_sub`` maps ``rho = t sqrt(1 - s^2)``.  Both make the weight bounded.
    """

    radial_nodes: int = 256
    angular_nodes: int = 256
    rim_substitution: str = "cos_sub"
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.radial_nodes < 8 or self.angular_nodes < 8:
            raise ValueError("need at least 8 radial and 8 angular nodes")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.rim_substitution not in ("cos_sub", "sqrt_sub"):
            raise ValueError(f"unknown rim substitution {self.rim_substitution!r}")

    def radial_rule(self) -> tuple[np.ndarray, np.ndarray]:
        """Unit-radius nodes ``rho/t`` and weights absorbing ``rho drho / sqrt(t^2-rho^2)``."""
        x, w = np.polynomial.legendre.leggauss(self.radial_nodes)
        if self.rim_substitution == "cos_sub":
            theta = 0.25 * np.pi * (x + 1.0)
            return np.sin(theta), 0.25 * np.pi * w * np.sin(theta)
        s = 0.5 * (x + 1.0)
        return np.sqrt(1.0 - s * s), 0.5 * w

    def angular_rule(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.angular_nodes
        a = 2.0 * np.pi * np.arange(n) / n
        return np.cos(a), np.sin(a)


DEFAULT_QUAD = QuadratureSpec()


def _poisson_batch(t: float, points: np.ndarray, data: InitialData, quad: QuadratureSpec) -> np.ndarray:
    rho_unit, w_rad = quad.radial_rule()
    ca, sa = quad.angular_rule()
    rho = t * rho_unit
    # (B, radial, angular)
    d1 = rho[:, None] * ca[None, :]
    d2 = rho[:, None] * sa[None, :]
    y1 = points[:, 0, None, None] + d1
    y2 = points[:, 1, None, None] + d2
    f0 = _evaluate(data.phi0, y1, y2)
    f1 = _evaluate(data.phi1, y1, y2)
    g1, g2 = data.gradient(y1, y2)
    integrand = f0 + t * f1 + (g1 * d1 + g2 * d2)
    if not np.all(np.isfinite(integrand)):
        raise ValueError("data not evaluable: non-finite integrand sample")
    ring = np.sum(integrand, axis=-1) / quad.angular_nodes
    return np.sum(ring * w_rad, axis=-1)


def _check_time(t: float) -> float:
    t = float(t)
    if not t > 0 or not math.isfinite(t):
        raise ValueError(f"invalid time t={t!r}: need t > 0")
    return t


def poisson_eval(t: float, x: Sequence[float], data: InitialData,
                 quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Solution of the free wave equation at ``(t, x)`` from the disk integral.

    Polar coordinates about ``x`` with the rim substitution reduce the formula to
    ``(1/2pi) int int [phi0 + t phi1 + rho d_rho phi0] w(rho) drho dalpha``
    with a bounded weight.
    """
    t = _check_time(t)
    pts = np.asarray(x, dtype=float).reshape(1, 2)
    return float(_poisson_batch(t, pts, data, quad)[0])


def poisson_points(t: float, points: np.ndarray, data: InitialData,
                   quad: QuadratureSpec = DEFAULT_QUAD, workers: int = 1) -> np.ndarray:
    """:func:`poisson_eval` at each row of ``points`` (shape ``(m, 2)``)."""
    t = _check_time(t)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    per_node = quad.radial_nodes * quad.angular_nodes
    batch = max(1, _CHUNK // per_node)
    chunks = [pts[i:i + batch] for i in range(0, len(pts), batch)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _poisson_batch(t, c, data, quad), chunks))
    else:
        parts = [_poisson_batch(t, c, data, quad) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0)


def poisson_field(t: float, grid: Grid, data: InitialData,
                  quad: QuadratureSpec = DEFAULT_QUAD, workers: int = 1) -> GridField:
    """:func:`poisson_eval` at every node of ``grid``."""
    x1, x2 = grid.coords()
    pts = np.stack([x1.ravel(), x2.ravel()], axis=1)
    vals = poisson_points(t, pts, data, quad, workers=workers)
    return GridField(vals.reshape(grid.n, grid.n), grid)


def linear_solution(t: float, grid: Grid, data: InitialData,
                    quad: QuadratureSpec = DEFAULT_QUAD, workers: int = 1) -> GridField:
    """Like :func:`poisson_field` but returns the data itself at ``t == 0``."""
    if t == 0:
        return GridField(data.sample(grid)[0], grid)
    return poisson_field(t, grid, data, quad, workers)


def duhamel_eval(t: float, x: Sequence[float], source: SourceFn, taus: Sequence[float],
                 quad: QuadratureSpec = DEFAULT_QUAD) -> float:
    """Zero-data solution of ``phi_tt - lap phi = g`` at ``(t, x)``.

    ``int_0^t W(t - tau)[g(tau)](x) dtau`` with ``W(s)`` the propagator of initial
    velocity, by the composite trapezoid rule on the nodes of ``taus`` inside
    ``[0, t]`` (both ends always included).
    """
    t = _check_time(t)
    taus = np.asarray(taus, dtype=float)
    tol = 1e-12 * max(1.0, t)
    if taus.size == 0 or taus.min() > tol or taus.max() < t - tol:
        raise ValueError("time grid does not cover [0, t]")
    nodes = taus[(taus > tol) & (taus < t - tol)]
    nodes = np.concatenate([[0.0], np.sort(nodes), [t]])
    pts = np.asarray(x, dtype=float).reshape(1, 2)
    vals = np.zeros_like(nodes)
    for i, tau in enumerate(nodes[:-1]):
        g = InitialData(phi0=zero_fn, phi1=(lambda a, b, tau=tau: source(tau, a, b)),
                        grad_phi0=lambda a, b: (zero_fn(a, b), zero_fn(a, b)))
        vals[i] = _poisson_batch(t - tau, pts, g, quad)[0]
    return float(integrate.trapezoid(vals, nodes))


# ---------------------------------------------------------------------------
# torus oracle


@dataclass(frozen=True)
class TorusOracleSpec:
    """Periodic box ``[-period_L, period_L)^2`` with ``modes_per_axis`` modes per axis.

    ``dt`` is the panel width of the Gauss-Legendre rule used for source terms.
    """

    period_L: float = 16.0
    modes_per_axis: int = 128
    dt: float = 0.1
    support_tol: float = 1e-12

    def __post_init__(self):
        if not self.period_L > 0 or not self.dt > 0:
            raise ValueError("period_L and dt must be positive")
        if self.modes_per_axis <= 0 or self.modes_per_axis % 2:
            raise ValueError("modes_per_axis must be a positive even integer")


class Torus:
    """FFT helpers for a :class:`TorusOracleSpec`."""

    def __init__(self, spec: TorusOracleSpec):
        self.spec = spec
        self.grid = Grid.periodic(spec.period_L, spec.modes_per_axis)
        k = 2.0 * np.pi * np.fft.fftfreq(spec.modes_per_axis, d=self.grid.h)
        self.k1, self.k2 = np.meshgrid(k, k, indexing="ij")
        self.kmag = np.hypot(self.k1, self.k2)
        self._zero = self.kmag == 0.0
        self._ksafe = np.where(self._zero, 1.0, self.kmag)

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fft2(values)

    def ifft(self, values_hat: np.ndarray) -> np.ndarray:
        return np.fft.ifft2(values_hat).real

    def sin_over_k(self, t: float) -> np.ndarray:
        return np.where(self._zero, t, np.sin(t * self.kmag) / self._ksafe)

    def support_radius(self, *fields: np.ndarray) -> float:
        """Radius beyond which every field is below ``support_tol`` of the joint peak."""
        r = self.grid.radius()
        stack = np.abs(np.stack(fields))
        peak = stack.max()
        if peak == 0:
            return 0.0
        big = np.any(stack > self.spec.support_tol * peak, axis=0)
        x1, x2 = self.grid.coords()
        L = self.spec.period_L
        edge = (np.abs(x1) >= L - 1.5 * self.grid.h) | (np.abs(x2) >= L - 1.5 * self.grid.h)
        if np.any(big & edge):
            raise ValueError("data not effectively supported inside the torus")
        return float(r[big].max())

    def sobolev_norm(self, values_hat: np.ndarray, s: float) -> float:
        """``||(1+|xi|)^(s/2) f_hat||_L2`` via Parseval on the torus."""
        n = self.spec.modes_per_axis
        area = (2.0 * self.spec.period_L) ** 2
        w = (1.0 + self.kmag) ** (s / 2.0)
        return float(np.sqrt(area * np.sum(np.abs(w * values_hat) ** 2)) / n**2)

    def sample(self, values_hat: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Trigonometric interpolant at arbitrary ``points`` (rows ``(x1, x2)``)."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        o1, o2 = self.grid.origin
        n = self.spec.modes_per_axis
        out = np.empty(len(pts))
        k1 = self.k1[:, 0]
        k2 = self.k2[0, :]
        for i, (a, b) in enumerate(pts):
            e1 = np.exp(1j * k1 * (a - o1))
            e2 = np.exp(1j * k2 * (b - o2))
            out[i] = (e1 @ values_hat @ e2).real / n**2
        return out


@dataclass
class _Forcing:
    """Running moments ``int cos(tau k) g_hat``, ``int sin(tau k) g_hat`` and the mean-mode ones."""

    c: np.ndarray
    s: np.ndarray
    f0: complex = 0.0
    f1: complex = 0.0
    tau: float = 0.0
    extra: dict = field(default_factory=dict)


def _gl_panels(a: float, b: float, width: float, order: int = 6):
    x, w = np.polynomial.legendre.leggauss(order)
    n = max(1, int(math.ceil((b - a) / width - 1e-12)))
    edges = np.linspace(a, b, n + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        yield lo + half * (x + 1.0), half * w


def _accumulate(torus: Torus, forcing: _Forcing, source_hat: Callable[[float], np.ndarray],
                t_to: float) -> None:
    if t_to <= forcing.tau:
        return
    k = torus.kmag
    for taus, ws in _gl_panels(forcing.tau, t_to, torus.spec.dt):
        for tau, w in zip(taus, ws):
            g = source_hat(float(tau))
            forcing.c += w * np.cos(tau * k) * g
            forcing.s += w * np.sin(tau * k) * g
            forcing.f0 += w * g[0, 0]
            forcing.f1 += w * tau * g[0, 0]
    forcing.tau = t_to


def _duhamel_modes(torus: Torus, forcing: _Forcing, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Mode-wise ``int_0^t sin((t-tau)|k|)/|k| g_hat`` and its time derivative."""
    k = torus.kmag
    sin_t, cos_t = np.sin(t * k), np.cos(t * k)
    pos = (sin_t * forcing.c - cos_t * forcing.s) / torus._ksafe
    pos[0, 0] = t * forcing.f0 - forcing.f1
    vel = cos_t * forcing.c + sin_t * forcing.s
    return pos, vel


def horizon(data: InitialData, spec: TorusOracleSpec) -> float:
    """Validity horizon ``T_valid = L - R0`` of the torus oracle for ``data``."""
    torus = Torus(spec)
    f0, f1 = data.sample(torus.grid)
    return spec.period_L - torus.support_radius(f0, f1)


def spectral_solve_periodic(data: InitialData, spec: TorusOracleSpec, T: float,
                            source: SourceFn | None = None,
                            times: Sequence[float] | None = None,
                            source_support: float = 0.0,
                            source_hat: Callable[[float], np.ndarray] | None = None,
                            periodic_data: bool = False,
                            ) -> list[WaveState]:
    """Exact mode-by-mode evolution on the torus at ``times`` (default ``[T]``).

    Every mode obeys ``cos(t|k|) phi0_hat + sin(t|k|)/|k| phi1_hat`` plus the
    Duhamel term of ``source(tau, x1, x2)``; the mean mode uses the limit
    ``phi0_hat + t phi1_hat``.  ``source_support`` is the radius containing the
    source (it enters the wrap-around horizon).  ``source_hat`` may supply the
    source directly in Fourier space.  With ``periodic_data`` the data and source
    are taken to be genuinely periodic and no horizon applies.
    """
    torus = Torus(spec)
    grid = torus.grid
    f0, f1 = data.sample(grid)
    if periodic_data:
        t_valid = math.inf
    else:
        radius = torus.support_radius(f0, f1) if (np.any(f0) or np.any(f1)) else 0.0
        radius = max(radius, source_support)
        t_valid = spec.period_L - radius
    times = [float(T)] if times is None else [float(s) for s in times]
    if T >= t_valid or max(times) > T:
        raise ValueError(
            f"oracle horizon exceeded: T={T:g} >= T_valid={t_valid:g} (L={spec.period_L:g})"
        )
    if min(times) < 0:
        raise ValueError("negative time requested")
    h0, h1 = torus.fft(f0), torus.fft(f1)
    k = torus.kmag
    if source_hat is None and source is not None:
        x1, x2 = grid.coords()

        def source_hat(tau):
            return torus.fft(_evaluate(lambda a, b: source(tau, a, b), x1, x2))

    forcing = None
    if source_hat is not None:
        forcing = _Forcing(c=np.zeros_like(h0), s=np.zeros_like(h0))
    order = np.argsort(times, kind="stable")
    states: list[WaveState | None] = [None] * len(times)
    for idx in order:
        t = times[idx]
        pos = np.cos(t * k) * h0 + torus.sin_over_k(t) * h1
        vel = -k * np.sin(t * k) * h0 + np.cos(t * k) * h1
        if forcing is not None:
            _accumulate(torus, forcing, source_hat, t)
            dp, dv = _duhamel_modes(torus, forcing, t)
            pos = pos + dp
            vel = vel + dv
        states[idx] = WaveState(t, GridField(torus.ifft(pos), grid), GridField(torus.ifft(vel), grid))
    return states  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# angular kernel H(t, |x|, r)


def _unit_elliptic(m: float, rel_tol: float) -> float:
    # int_0^{pi/2} (1 - m sin^2)^(-1/2); the log peak at pi/2 for m -> 1 is left to adaptivity
    val, _ = integrate.quad(lambda th: 1.0 / math.sqrt(1.0 - m * math.sin(th) ** 2),
                            0.0, 0.5 * math.pi, epsabs=0.0, epsrel=rel_tol, limit=200)
    return val


def h_branch(t: float, absx: float, r: float) -> str:
    """``"I"`` (full circle, ``t > |x| + r``) or ``"II"`` (arc, ``||x| - r| < t < |x| + r``)."""
    if absx == 0.0:
        if t > r:
            return "I"
        raise ValueError("outside light-cone configuration")
    c = (absx * absx + r * r - t * t) / (2.0 * absx * r)
    if c < -1.0:
        return "I"
    if -1.0 < c < 1.0:
        return "II"
    raise ValueError("outside light-cone configuration")


def h_integral(t: float, absx: float, r: float, rel_tol: float = 1e-10) -> float:
    """``H(t, |x|, r) = int dpsi / sqrt(t^2 - |x|^2 - r^2 + 2|x| r cos psi)`` over the admissible arc.

    Branch II has inverse-square-root endpoint singularities at ``psi = +-phi``;
    ``sin(psi/2) = sin(phi/2) sin(theta)`` removes them.  Branch I is rewritten
    with the half angle.  Both reduce to the same bounded ``theta``-integral.
    """
    if not (t > 0 and absx >= 0 and r > 0):
        raise ValueError("need t > 0, |x| >= 0, r > 0")
    branch = h_branch(t, absx, r)
    if absx == 0.0:
        return 2.0 * math.pi / math.sqrt(t * t - r * r)
    if branch == "II":
        c = (absx * absx + r * r - t * t) / (2.0 * absx * r)
        m = 0.5 * (1.0 - c)
        return 2.0 / math.sqrt(absx * r) * _unit_elliptic(m, rel_tol)
    q = t * t - absx * absx - r * r + 2.0 * absx * r
    m = 4.0 * absx * r / q
    return 4.0 / math.sqrt(q) * _unit_elliptic(m, rel_tol)


def kernel_bound_I(t: float, absx: float, r: float) -> float:
    """Shape of the full-circle bound: ``ln(2 + r|x|/(t^2-(r+|x|)^2)) / sqrt(t^2-|x|^2-r^2)``."""
    return math.log(2.0 + r * absx / (t * t - (r + absx) ** 2)) / math.sqrt(t * t - absx * absx - r * r)


def kernel_bound_II(t: float, absx: float, r: float) -> float:
    """Shape of the arc bound: ``ln(2 + r|x| chi(t-|x|)/((r+|x|)^2-t^2)) / sqrt(r|x|)``."""
    chi = 1.0 if t > absx else 0.0
    return math.log(2.0 + r * absx * chi / ((r + absx) ** 2 - t * t)) / math.sqrt(r * absx)


def kernel_sample(n: int, branch: str) -> np.ndarray:
    """Deterministic admissible ``(t, |x|, r)`` rows; the first ``n`` rows of a larger request agree."""
    pts = qmc.Halton(d=3, scramble=False)
    pts.fast_forward(1)
    u = pts.random(n)
    a = 10.0 ** (2.0 * u[:, 0] - 1.0)
    r = 10.0 ** (2.0 * u[:, 1] - 1.0)
    if branch == "I":
        gap = 10.0 ** (4.0 * u[:, 2] - 3.0)
        t = (a + r) * (1.0 + gap)
    elif branch == "II":
        c = np.cos(np.pi * (1.0 - u[:, 2]))
        t = np.sqrt(a * a + r * r - 2.0 * a * r * c)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return np.stack([t, a, r], axis=1)


def kernel_constants(n: int = 100, rel_tol: float = 1e-10) -> dict[str, float]:
    """Fitted constants ``sup H / bound`` for both branches over :func:`kernel_sample`."""
    out = {}
    for branch, bound in (("I", kernel_bound_I), ("II", kernel_bound_II)):
        ratios = [h_integral(t, a, r, rel_tol) / bound(t, a, r) for t, a, r in kernel_sample(n, branch)]
        out[branch] = float(np.max(ratios))
    return out
