"""Method-of-lines integrator for ``u_tt = exp(-u) lap u - u_t^2``.

The first-order system ``u_t = p``, ``p_t = exp(-u) lap u - p^2 - sigma p`` is
advanced with classical RK4.  ``sigma`` is a sponge that damps ``p`` in the outer
square annulus, and the two outermost node layers are held fixed.  Diagnostics
(norms, curvature) are read only from the trusted region inside the sponge.
"""

from __future__ import annotations

import json
import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum

import numpy as np
from scipy import integrate

from .grid import DecayParams, Grid, GridField, WaveState, diff1, l2_norm, laplacian
from .probe import ProbeReport
from .vector_fields import NormBundle, nonlinear_jet, norm_bundle
from .wave_kernel import InitialData, rational_class_constant, rational_profiles

FAMILIES = ("rational", "gaussian_tail")
FROZEN_LAYERS = 2


@dataclass(frozen=True)
class Thresholds:
    u_max: float = 10.0
    curvature_cap: float = 1e3
    dt_min: float = 1e-7
    norm_multiple: float = 20.0


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``cfl_safety`` must lie in (0, 1) unless ``allow_unstable`` is set, which exists
    only to demonstrate what an over-large step does.  ``fixed_dt`` replaces the
    adaptive step (used by convergence studies); it is still capped at ``t_max``.
    """

    half_width: float = 20.0
    nodes: int = 161
    family: str = "rational"
    A: float = 1.0
    k: float = 2.0
    eps: float = 0.1
    velocity_sign: float = -1.0
    cfl_safety: float = 0.5
    snapshot_stride: int = 10
    t_max: float = 10.0
    thresholds: Thresholds = field(default_factory=Thresholds)
    l1: int = 2
    l2: int = 1
    sponge: bool = True
    sponge_fraction: float = 0.1
    sponge_strength: float = 5.0
    fixed_dt: float | None = None
    monitor_norms: bool = True
    allow_unstable: bool = False

    def __post_init__(self):
        if isinstance(self.thresholds, dict):
            self.thresholds = Thresholds(**self.thresholds)

    @property
    def params(self) -> DecayParams:
        return DecayParams(self.A, self.k, self.eps)

    @property
    def grid(self) -> Grid:
        return Grid.square(self.half_width, self.nodes)

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown data family {self.family!r}")
        self.params  # range checks on A, k, eps
        if self.nodes < 12:
            raise ValueError("need at least 12 nodes per axis")
        if not self.cfl_safety > 0:
            raise ValueError("CFL safety must be positive")
        if self.cfl_safety >= 1 and not self.allow_unstable:
            raise ValueError("CFL safety must lie in (0, 1)")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot stride must be at least 1")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ValueError("fixed_dt must be positive")
        if not 0 < self.sponge_fraction < 0.5:
            raise ValueError("sponge fraction must lie in (0, 0.5)")
        if min(self.l1, self.l2) < 0 or max(self.l1, self.l2) > 2:
            raise ValueError("monitor orders must lie in 0..2")
        if not self.sponge:
            if self.family == "rational" and self.eps > 0:
                raise ValueError("slowly decaying data needs the sponge layer")
            reach = self.t_max * math.exp(self.eps * self.A / 2)
            if gaussian_support(self.A, self.eps) + reach >= self.half_width:
                raise ValueError("domain too small for t_max without the sponge layer")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown run config keys: {sorted(extra)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class Reason(str, Enum):
    NONFINITE = "nonfinite"
    AMPLITUDE = "amplitude_cap"
    NORM = "norm_monitor_violation"
    CURVATURE = "curvature_cap"
    CFL = "cfl_collapse"
    NONE = "none"


@dataclass
class BreakdownInfo:
    time: float
    reason: Reason
    detail: str = ""

    @property
    def censored(self) -> bool:
        return self.reason is Reason.NONE

    def to_dict(self) -> dict:
        return {"time": self.time, "reason": self.reason.value, "censored": self.censored,
                "detail": self.detail}


@dataclass
class RunResult:
    config: RunConfig
    snapshots: list[WaveState]
    norms: list[NormBundle]
    max_curvature: list[float]
    breakdown: BreakdownInfo
    steps: int

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.snapshots]

    def peak_weighted_n2(self) -> float:
        """``max (1+t)^(1/2) N2 / eps`` over the recorded norms (0 when ``eps = 0``)."""
        eps = self.config.eps
        if eps == 0 or not self.norms:
            return 0.0
        return max(math.sqrt(1 + b.t) * b.N2 / eps for b in self.norms)


# ---------------------------------------------------------------------------
# data


def gaussian_support(A: float, eps: float = 1.0, tol: float = 1e-12) -> float:
    """Radius beyond which ``eps A exp(-r^2)`` drops under ``tol``."""
    amp = abs(eps * A)
    return math.sqrt(math.log(amp / tol)) if amp > tol else 0.0


def _gaussian_tail_constant(k: float) -> float:
    r = np.linspace(0.0, 50.0, 200001)
    return float(np.max((1 + r) ** (k + 1) * np.exp(-r * r)))


def make_initial_data(family, params: DecayParams, grid: Grid,
                      velocity_sign: float = -1.0) -> tuple[GridField, GridField]:
    """``(eps u0, eps u1)`` on ``grid``.

    ``family`` is ``"rational"``, ``"gaussian_tail"`` or an :class:`InitialData`,
    whose own decay parameters (or else ``params.A``, ``params.k``) give the bound.
    The weighted bounds are checked at every node.
    """
    x1, x2 = grid.coords()
    r = np.hypot(x1, x2)
    if isinstance(family, InitialData):
        u0 = np.asarray(family.phi0(x1, x2), float) * np.ones_like(r)
        u1 = np.asarray(family.phi1(x1, x2), float) * np.ones_like(r)
        decay = family.decay or params
        bound, k = decay.A, decay.k
    elif family == "rational":
        f0, f1, _ = rational_profiles(params.A, params.k, velocity_sign)
        u0, u1 = f0(x1, x2), f1(x1, x2)
        bound, k = rational_class_constant(params.k) * params.A, params.k
    elif family == "gaussian_tail":
        g = params.A * np.exp(-r * r)
        u0, u1 = g, velocity_sign * g
        bound, k = _gaussian_tail_constant(params.k) * params.A, params.k
    else:
        raise ValueError(f"unknown data family {family!r}")
    tol = 1e-12 * bound
    if (np.any(np.abs(u0) * (1 + r) ** k > bound + tol)
            or np.any(np.abs(u1) * (1 + r) ** (k + 1) > bound + tol)):
        raise ValueError("data outside class (H)")
    eps = params.eps
    return GridField(eps * u0, grid), GridField(eps * u1, grid)


# ---------------------------------------------------------------------------
# stepping


def cfl_dt(state: WaveState, safety: float = 0.5) -> float:
    u = state.u.values
    if not np.all(np.isfinite(u)):
        raise ValueError("non-finite u")
    return safety * state.grid.h / float(np.max(np.exp(-0.5 * u)))


def sponge_profile(grid: Grid, fraction: float = 0.1, strength: float = 5.0) -> np.ndarray:
    """``strength * s^2`` where ``s`` runs from 0 to 1 across the outer square annulus."""
    x1, x2 = grid.coords()
    half = 0.5 * grid.h * (grid.n - 1)
    dist = np.maximum(np.abs(x1 - (grid.origin[0] + half)), np.abs(x2 - (grid.origin[1] + half)))
    inner = (1 - fraction) * half
    s = np.clip((dist - inner) / (half - inner), 0.0, 1.0)
    return strength * s * s


def trusted_mask(grid: Grid, fraction: float = 0.1) -> np.ndarray:
    """Nodes not touched by the sponge."""
    return sponge_profile(grid, fraction, 1.0) == 0.0


def _frozen(grid: Grid) -> np.ndarray:
    m = np.zeros((grid.n, grid.n), bool)
    m[:FROZEN_LAYERS] = m[-FROZEN_LAYERS:] = True
    m[:, :FROZEN_LAYERS] = m[:, -FROZEN_LAYERS:] = True
    return m


def _rhs(u, p, h, sigma, frozen, linear=False):
    du = p.copy()
    dp = laplacian(u, h) if linear else np.exp(-u) * laplacian(u, h) - p * p
    if sigma is not None:
        dp -= sigma * p
    if frozen is not None:
        du[frozen] = 0.0
        dp[frozen] = 0.0
    return du, dp


def step(state: WaveState, dt: float, damping: np.ndarray | None = None,
         frozen: np.ndarray | None = None, linear: bool = False) -> WaveState:
    """One RK4 step.  Non-finite values are passed through for the detector to see.

    ``linear`` replaces the right side by ``lap u`` (coefficient frozen to 1, no
    quadratic term); a negative ``dt`` integrates backwards.
    """
    h = state.grid.h
    u, p = state.u.values, state.p.values
    with np.errstate(all="ignore"):
        k1u, k1p = _rhs(u, p, h, damping, frozen, linear)
        k2u, k2p = _rhs(u + 0.5 * dt * k1u, p + 0.5 * dt * k1p, h, damping, frozen, linear)
        k3u, k3p = _rhs(u + 0.5 * dt * k2u, p + 0.5 * dt * k2p, h, damping, frozen, linear)
        k4u, k4p = _rhs(u + dt * k3u, p + dt * k3p, h, damping, frozen, linear)
        un = u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
        pn = p + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    g = state.grid
    return WaveState(state.t + dt, GridField(un, g), GridField(pn, g))


def curvature_of(u: np.ndarray, h: float) -> np.ndarray:
    """``R = -exp(-u) lap u`` for the metric ``exp(u) delta``."""
    with np.errstate(all="ignore"):
        return -np.exp(-u) * laplacian(u, h)


def detect_breakdown(state: WaveState, norms: NormBundle | None = None,
                     thresholds: Thresholds = Thresholds(), *,
                     initial_norms: NormBundle | None = None, dt: float | None = None,
                     mask: np.ndarray | None = None) -> BreakdownInfo | None:
    """First firing signal, checked in the order nonfinite, cfl, amplitude, curvature, norms.

    The norm monitor compares ``(1+t)^(1/2) N_i(t)`` with ``norm_multiple * N_i(0)``;
    both sides carry the same factor of ``eps``, so it cancels.
    """
    t = state.t
    if not state.is_finite():
        return BreakdownInfo(t, Reason.NONFINITE, "non-finite node")
    if dt is not None and dt < thresholds.dt_min:
        return BreakdownInfo(t, Reason.CFL, f"dt = {dt:.3e}")
    u = state.u.values
    umax = float(np.max(np.abs(u)))
    if umax > thresholds.u_max:
        return BreakdownInfo(t, Reason.AMPLITUDE, f"max|u| = {umax:.4g}")
    r = curvature_of(u, state.grid.h)
    rmax = float(np.max(np.abs(r if mask is None else r[mask])))
    if not math.isfinite(rmax) or rmax > thresholds.curvature_cap:
        return BreakdownInfo(t, Reason.CURVATURE, f"max|R| = {rmax:.4g}")
    if norms is not None and initial_norms is not None:
        w = math.sqrt(1 + t)
        for name in ("N1", "N2"):
            ref = getattr(initial_norms, name)
            val = getattr(norms, name)
            if ref > 0 and w * val > thresholds.norm_multiple * ref:
                return BreakdownInfo(t, Reason.NORM, f"(1+t)^(1/2) {name} = {w * val:.4g}")
    return None


def _bundle(state: WaveState, cfg: RunConfig, mask: np.ndarray) -> NormBundle:
    jet = nonlinear_jet(state.u.values, state.p.values, state.t, state.grid,
                        depth=max(cfg.l1, cfg.l2) + 2)
    return norm_bundle(jet, cfg.l1, cfg.l2, mask)


def run(config: RunConfig) -> RunResult:
    """Integrate to ``t_max`` or the first breakdown signal."""
    config.validate()
    cfg = config
    grid = cfg.grid
    u0, u1 = make_initial_data(cfg.family, cfg.params, grid, cfg.velocity_sign)
    state = WaveState(0.0, u0, u1)
    sigma = sponge_profile(grid, cfg.sponge_fraction, cfg.sponge_strength) if cfg.sponge else None
    frozen = _frozen(grid)
    mask = trusted_mask(grid, cfg.sponge_fraction) if cfg.sponge else ~frozen
    th = cfg.thresholds

    snapshots, norms, curv = [], [], []

    def record(s: WaveState):
        snapshots.append(s)
        r = curvature_of(s.u.values, grid.h)[mask]
        curv.append(float(np.max(np.abs(r))) if r.size else 0.0)
        if cfg.monitor_norms:
            norms.append(_bundle(s, cfg, mask))
            return norms[-1]
        return None

    b0 = record(state)
    n = 0
    info = None
    t_end = cfg.t_max
    while state.t < t_end * (1 - 1e-12):
        dt = cfg.fixed_dt if cfg.fixed_dt is not None else cfl_dt(state, cfg.cfl_safety)
        last = state.t + dt >= t_end * (1 - 1e-12)
        if last:
            dt = t_end - state.t
        elif dt < th.dt_min:
            info = BreakdownInfo(state.t, Reason.CFL, f"dt = {dt:.3e}")
            break
        state = step(state, dt, sigma, frozen)
        n += 1
        if last:
            state.t = float(t_end)
        info = detect_breakdown(state, None, th, mask=mask)
        if info is not None:
            record(state) if state.is_finite() else snapshots.append(state)
            break
        if n % cfg.snapshot_stride == 0 or last:
            bundle = record(state)
            info = detect_breakdown(state, bundle, th, initial_norms=b0, mask=mask)
            if info is not None:
                break
    if info is None:
        info = BreakdownInfo(state.t, Reason.NONE, "reached t_max")
    return RunResult(cfg, snapshots, norms, curv, info, n)


# ---------------------------------------------------------------------------
# perturbed energy inequality


def energy_inequality_diagnostic(trajectory: Sequence[WaveState], mask: np.ndarray | None = None,
                              source_scale: float = 1.0) -> ProbeReport:
    """Two-sided check of the energy inequality for ``box u + gamma lap u = F``.

    With ``gamma = 1 - exp(-u)`` and ``F = -u_t^2`` the right side is
    ``2 exp(int_0^t 2 g) E(0) + 2 int_0^t exp(int_s^t 2 g) ||F(s)|| ds`` with
    ``E = ||(u_t, grad u)||_L2`` and ``g = sup |d gamma|``.  Time integrals use the
    trapezoid rule over the supplied snapshots.  ``c_est`` is ``max E / RHS`` and the
    inequality holds when it is at most 1.  ``source_scale`` multiplies ``F``.
    """
    if len(trajectory) < 2:
        raise ValueError("need at least two snapshots")
    ts, energy, fnorm, gdot = [], [], [], []
    for s in trajectory:
        u, p = s.u.values, s.p.values
        h = s.grid.h
        gamma = 1.0 - np.exp(-u)
        gsel = gamma if mask is None else gamma[mask]
        if gsel.size and float(np.max(np.abs(gsel))) > 0.5:
            return ProbeReport("energy_inequality", "trajectory", math.nan, [(s.t, math.nan)],
                               details={"error": f"hypothesis |gamma| <= 1/2 violated at t = {s.t:.6g}"})
        ux, uy = diff1(u, h, 0), diff1(u, h, 1)
        e = np.exp(-u)
        dg = np.maximum(np.maximum(np.abs(e * p), np.abs(e * ux)), np.abs(e * uy))
        ts.append(s.t)
        energy.append(math.sqrt(l2_norm(p, h, mask) ** 2 + l2_norm(ux, h, mask) ** 2
                                + l2_norm(uy, h, mask) ** 2))
        fnorm.append(source_scale * l2_norm(p * p, h, mask))
        gdot.append(float(np.max(dg if mask is None else dg[mask])) if dg.size else 0.0)
    ts = np.asarray(ts)
    G = integrate.cumulative_trapezoid(2.0 * np.asarray(gdot), ts, initial=0.0)
    fn = np.asarray(fnorm)
    rhs = np.empty_like(ts)
    for i in range(ts.size):
        w = np.exp(G[i] - G[: i + 1])
        duh = integrate.trapezoid(w * fn[: i + 1], ts[: i + 1]) if i else 0.0
        rhs[i] = 2.0 * math.exp(G[i]) * energy[0] + 2.0 * duh
    ratios = [0.0 if e == 0 else (e / r if r > 0 else math.inf) for e, r in zip(energy, rhs)]
    trend = [(float(t), float(max(ratios[: i + 1]))) for i, t in enumerate(ts)]
    rep = ProbeReport("energy_inequality", f"{len(ts)} snapshots", float(max(ratios)),
                      [trend[len(trend) // 2], trend[-1]],
                      details={"times": ts.tolist(), "lhs": list(energy), "rhs": rhs.tolist(),
                               "holds": bool(all(e <= r * (1 + 1e-12) for e, r in zip(energy, rhs)))})
    return rep
