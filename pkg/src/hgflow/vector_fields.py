"""Klainerman vector fields on sampled space-time data.

A space-time function is carried at a fixed time as a :class:`Jet`: its value
and its first few time derivatives on a grid.  Generators that contain a time
derivative (``dt``, ``L0``, ``Omega0i``) consume one level of the jet, so a jet
built to depth ``m`` supports compositions of length ``m - 2`` followed by a
full space-time gradient.  Time derivatives of order two and three are
reconstructed from the governing equation instead of being stored.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grid import Grid, GridField, WaveState, diff1, l2_norm, laplacian, linf_norm
from .probe import ProbeReport, horizon_trend

DEFAULT_CAP = 2


class FieldOp(str, Enum):
    DT = "dt"
    D1 = "d1"
    D2 = "d2"
    L0 = "L0"
    OMEGA12 = "Omega12"
    OMEGA01 = "Omega01"
    OMEGA02 = "Omega02"

    @property
    def uses_time(self) -> bool:
        return self in (FieldOp.DT, FieldOp.L0, FieldOp.OMEGA01, FieldOp.OMEGA02)


GENERATORS: tuple[FieldOp, ...] = tuple(FieldOp)

MultiIndex = tuple[FieldOp, ...]


@dataclass
class Jet:
    """``derivs[k]`` is the k-th time derivative at time ``t``."""

    t: float
    grid: Grid
    derivs: tuple[np.ndarray, ...]

    @property
    def depth(self) -> int:
        return len(self.derivs)

    @property
    def value(self) -> GridField:
        return GridField(self.derivs[0], self.grid)

    def scaled(self, factor: float) -> "Jet":
        return Jet(self.t, self.grid, tuple(factor * d for d in self.derivs))


def linear_jet(u: np.ndarray, p: np.ndarray, t: float, grid: Grid, depth: int = 4,
               source: np.ndarray | None = None, source_t: np.ndarray | None = None) -> Jet:
    """Jet of a solution of ``phi_tt = lap phi + f`` from ``(phi, phi_t)``."""
    if not 1 <= depth <= 4:
        raise ValueError("jet depth must be between 1 and 4")
    h = grid.h
    derivs = [np.asarray(u, float), np.asarray(p, float)][:depth]
    if depth > 2:
        utt = laplacian(u, h) + (0.0 if source is None else source)
        derivs.append(utt)
    if depth > 3:
        derivs.append(laplacian(p, h) + (0.0 if source_t is None else source_t))
    return Jet(t, grid, tuple(derivs))


def nonlinear_jet(u: np.ndarray, p: np.ndarray, t: float, grid: Grid, depth: int = 4) -> Jet:
    """Jet of a solution of ``u_tt = exp(-u) lap u - u_t^2``."""
    if not 1 <= depth <= 4:
        raise ValueError("jet depth must be between 1 and 4")
    h = grid.h
    derivs = [np.asarray(u, float), np.asarray(p, float)][:depth]
    if depth > 2:
        lu = laplacian(u, h)
        e = np.exp(-u)
        utt = e * lu - p * p
        derivs.append(utt)
        if depth > 3:
            derivs.append(e * (laplacian(p, h) - p * lu) - 2.0 * p * utt)
    return Jet(t, grid, tuple(derivs))


def state_jet(state: WaveState, equation: str = "linear", depth: int = 4) -> Jet:
    if equation == "linear":
        return linear_jet(state.u.values, state.p.values, state.t, state.grid, depth)
    if equation == "nonlinear":
        return nonlinear_jet(state.u.values, state.p.values, state.t, state.grid, depth)
    raise ValueError(f"unknown equation {equation!r}")


def _apply(op: FieldOp, jet: Jet) -> Jet:
    op = FieldOp(op)
    d = jet.derivs
    h = jet.grid.h
    if op.uses_time and jet.depth < 2:
        raise ValueError(f"missing time-derivative channel for {op.value}")
    if op is FieldOp.DT:
        return Jet(jet.t, jet.grid, d[1:])
    if op is FieldOp.D1:
        return Jet(jet.t, jet.grid, tuple(diff1(f, h, 0) for f in d))
    if op is FieldOp.D2:
        return Jet(jet.t, jet.grid, tuple(diff1(f, h, 1) for f in d))
    x1, x2 = jet.grid.coords()
    t = jet.t
    if op is FieldOp.OMEGA12:
        return Jet(t, jet.grid, tuple(x1 * diff1(f, h, 1) - x2 * diff1(f, h, 0) for f in d))
    out = []
    for k in range(jet.depth - 1):
        if op is FieldOp.L0:
            val = t * d[k + 1] + x1 * diff1(d[k], h, 0) + x2 * diff1(d[k], h, 1)
            if k:
                val = val + k * d[k]
        else:
            axis, xi = (0, x1) if op is FieldOp.OMEGA01 else (1, x2)
            val = t * diff1(d[k], h, axis) + xi * d[k + 1]
            if k:
                val = val + k * diff1(d[k - 1], h, axis)
        out.append(val)
    return Jet(t, jet.grid, tuple(out))


def apply_op(op: FieldOp, jet: Jet) -> GridField:
    """One generator applied pointwise; see :func:`apply_op_jet` for the full jet."""
    return _apply(op, jet).value


def apply_op_jet(op: FieldOp, jet: Jet) -> Jet:
    return _apply(op, jet)


def apply_multiindex_jet(index: Sequence[FieldOp], jet: Jet, cap: int = DEFAULT_CAP) -> Jet:
    """``Z^I`` on a jet.  The index is applied left to right: ``(A, B)`` means ``B(A(phi))``."""
    if len(index) > cap:
        raise ValueError(f"multi-index length {len(index)} exceeds cap {cap}")
    for op in index:
        jet = _apply(op, jet)
    return jet


def apply_multiindex(index: Sequence[FieldOp], jet: Jet, cap: int = DEFAULT_CAP) -> GridField:
    return apply_multiindex_jet(index, jet, cap).value


def multiindices(order: int) -> list[MultiIndex]:
    """All ordered generator sequences of length ``<= order``, shortest first."""
    out: list[MultiIndex] = []
    for n in range(order + 1):
        out.extend(itertools.product(GENERATORS, repeat=n))
    return out


def _walk(jet: Jet, order: int, prefix: MultiIndex = ()) -> Iterable[tuple[MultiIndex, Jet]]:
    # depth-first so Z^(a, b) reuses Z^a
    yield prefix, jet
    if len(prefix) == order:
        return
    for op in GENERATORS:
        yield from _walk(_apply(op, jet), order, prefix + (op,))


# ---------------------------------------------------------------------------
# norms


@dataclass
class NormBundle:
    """Weighted norms of ``u`` at one instant: sums over ``|I| <= l1`` (L2) and ``|I| <= l2`` (sup)."""

    t: float
    M1: float
    M2: float
    N1: float
    N2: float
    l1: int
    l2: int

    @property
    def caveat(self) -> str:
        if self.l1 - 3 >= self.l2 >= self.l1 // 2 + 1:
            return ""
        return f"orders (l1, l2) = ({self.l1}, {self.l2}) are below the bootstrap requirement l1 - 3 >= l2 >= [l1]/2 + 1"

    def as_dict(self) -> dict:
        return {"t": self.t, "M1": self.M1, "M2": self.M2, "N1": self.N1, "N2": self.N2,
                "l1": self.l1, "l2": self.l2, "caveat": self.caveat}


def gradient_magnitude(jet: Jet) -> np.ndarray:
    """Pointwise ``|(d_t, d_1, d_2) phi|`` of a jet of depth at least 2."""
    h = jet.grid.h
    f = jet.derivs[0]
    return np.sqrt(jet.derivs[1] ** 2 + diff1(f, h, 0) ** 2 + diff1(f, h, 1) ** 2)


def norm_bundle(jet: Jet, l1: int = 2, l2: int = 1, mask: np.ndarray | None = None,
                cap: int = DEFAULT_CAP) -> NormBundle:
    """``M1, M2, N1, N2`` with L2 norms by the midpoint rule and sup norms by grid max.

    ``jet`` needs depth ``max(l1, l2) + 2``.
    """
    order = max(l1, l2)
    if order > cap:
        raise ValueError(f"order {order} exceeds cap {cap}")
    if jet.depth < order + 2:
        raise ValueError(f"jet depth {jet.depth} too small for order {order}")
    h = jet.grid.h
    m1 = m2 = n1 = n2 = 0.0
    for index, zj in _walk(jet, order):
        grad = gradient_magnitude(zj)
        val = zj.derivs[0]
        if len(index) <= l1:
            m1 += l2_norm(grad, h, mask)
            m2 += l2_norm(val, h, mask)
        if len(index) <= l2:
            n1 += linf_norm(grad, mask)
            n2 += linf_norm(val, mask)
    return NormBundle(jet.t, m1, m2, n1, n2, l1, l2)


def z_l2_sum(jet: Jet, order: int, mask: np.ndarray | None = None) -> float:
    """``sum_{|I| <= order} ||Z^I phi||_L2`` (jet depth ``order + 1`` suffices)."""
    total = 0.0
    for _, zj in _walk(jet, order):
        total += l2_norm(zj.derivs[0], jet.grid.h, mask)
    return total


# ---------------------------------------------------------------------------
# commutators


@dataclass(frozen=True)
class AnalyticFunction:
    """Test function with closed-form time derivatives up to third order."""

    name: str
    jet_fn: Callable[[float, np.ndarray, np.ndarray], tuple[np.ndarray, ...]]

    def jet(self, t: float, grid: Grid) -> Jet:
        x1, x2 = grid.coords()
        return Jet(t, grid, tuple(np.asarray(a, float) * np.ones_like(x1) for a in self.jet_fn(t, x1, x2)))


def _gaussian(t, x1, x2):
    f = np.exp(-(x1 * x1 + x2 * x2) - t * t)
    return f, -2 * t * f, (4 * t * t - 2) * f, (12 * t - 8 * t**3) * f


def _polynomial(t, x1, x2):
    z = np.zeros_like(x1)
    return t * t - x1 * x1 - x2 * x2, 2 * t + z, 2 + z, z


def _wave_packet(t, x1, x2):
    env = np.exp(-0.2 * (x1 * x1 + x2 * x2))
    ph = x1 + 2 * x2 - t
    return np.sin(ph) * env, -np.cos(ph) * env, -np.sin(ph) * env, np.cos(ph) * env


TEST_FUNCTIONS: tuple[AnalyticFunction, ...] = (
    AnalyticFunction("gaussian", _gaussian),
    AnalyticFunction("polynomial", _polynomial),
    AnalyticFunction("wave_packet", _wave_packet),
)


def _box_jet(jet: Jet) -> Jet:
    h = jet.grid.h
    d = jet.derivs
    return Jet(jet.t, jet.grid, (d[2] - laplacian(d[0], h), d[3] - laplacian(d[1], h)))


def commutator_residual(op: FieldOp, test: AnalyticFunction, h: float, half_width: float = 3.0,
                        t: float = 0.7, inner_fraction: float = 0.5) -> float:
    """Max over the inner box of ``|box(Z phi) - Z(box phi) - expected|``.

    ``expected`` is ``2 box phi`` for ``L0`` and zero for every other generator.
    """
    op = FieldOp(op)
    n = int(round(2 * half_width / h)) + 1
    grid = Grid.square(half_width, n)
    jet = test.jet(t, grid)
    zj = _apply(op, jet)
    box_z = zj.derivs[2] - laplacian(zj.derivs[0], grid.h)
    bj = _box_jet(jet)
    z_box = _apply(op, bj).derivs[0]
    resid = box_z - z_box
    if op is FieldOp.L0:
        resid = resid - 2.0 * bj.derivs[0]
    x1, x2 = grid.coords()
    inner = (np.abs(x1) <= inner_fraction * half_width + 1e-12) & (np.abs(x2) <= inner_fraction * half_width + 1e-12)
    return float(np.max(np.abs(resid[inner])))


RESIDUAL_FLOOR = 1e-9


def commutator_suite(hs: Sequence[float] = (0.1, 0.05, 0.025),
                     tests: Sequence[AnalyticFunction] = TEST_FUNCTIONS,
                     ops: Sequence[FieldOp] = GENERATORS) -> list[dict]:
    """Residuals of every first-order identity on every test function and spacing.

    ``order_estimate`` is ``log2`` of consecutive residual ratios; residuals under
    ``RESIDUAL_FLOOR`` count as exact and report ``inf``.
    """
    records = []
    for op in ops:
        for test in tests:
            prev = None
            for h in hs:
                res = commutator_residual(op, test, h)
                if prev is None:
                    order = None
                elif res <= RESIDUAL_FLOOR:
                    order = math.inf
                else:
                    order = math.log2(prev / res)
                records.append({"op": op.value, "test_fn": test.name, "h": h,
                                "residual": res, "order_estimate": order})
                prev = res
    return records


# ---------------------------------------------------------------------------
# global Sobolev probe


def klainerman_inequality_probe(jets: Sequence[Jet], N: int = 2, p: float = 2.0,
                                horizons: Sequence[float] | None = None, slack: float = 2.0,
                                mask: np.ndarray | None = None) -> ProbeReport:
    """Sup of ``|phi| (1+t+|x|)^(1/2) (1+|t-|x||)^(1/2) / sum_{|I|<=N} ||Z^I phi||_L2``.

    Only the ``n = 2, p = 2`` instance is implemented.
    """
    if p != 2.0 or N < 2:
        raise ValueError("only p = 2 with N >= 2 is implemented")
    if not jets:
        raise ValueError("empty sample")
    times, ratios = [], []
    for jet in jets:
        if jet.depth < N + 1:
            raise ValueError(f"jet depth {jet.depth} too small for N = {N}")
        r = jet.grid.radius()
        s = z_l2_sum(jet, N, mask)
        weight = np.sqrt((1.0 + jet.t + r) * (1.0 + np.abs(jet.t - r)))
        lhs = np.abs(jet.derivs[0]) * weight
        if mask is not None:
            lhs = lhs[mask]
        top = float(lhs.max()) if lhs.size else 0.0
        times.append(jet.t)
        ratios.append(0.0 if top == 0.0 else (top / s if s > 0 else math.inf))
    if horizons is None:
        horizons = [max(times) / 2, max(times)]
    trend = horizon_trend(times, ratios, horizons)
    return ProbeReport("klainerman_sobolev", f"{len(jets)} snapshots, N={N}, p=2",
                       trend[-1][1], trend, slack, {"times": list(times), "ratios": list(ratios)})
