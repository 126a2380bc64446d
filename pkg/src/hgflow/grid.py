"""Uniform square grids, grid fields and fourth-order finite-difference stencils.

Arrays are indexed ``values[i, j]`` with ``i`` along ``x1`` and ``j`` along
``x2`` (``numpy.meshgrid(..., indexing="ij")``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Node-centred square grid: ``x = origin + index * h`` on each axis."""

    n: int
    h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("grid needs at least one node per axis")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")

    @classmethod
    def square(cls, half_width: float, n: int) -> "Grid":
        """Grid on ``[-half_width, half_width]^2`` including both end nodes."""
        if n < 2:
            raise ValueError("need n >= 2 for a closed square")
        h = 2.0 * half_width / (n - 1)
        return cls(n=n, h=h, origin=(-half_width, -half_width))

    @classmethod
    def periodic(cls, half_width: float, n: int) -> "Grid":
        """Grid on the torus ``[-half_width, half_width)^2`` (right end excluded)."""
        return cls(n=n, h=2.0 * half_width / n, origin=(-half_width, -half_width))

    @property
    def axis1(self) -> np.ndarray:
        return self.origin[0] + self.h * np.arange(self.n)

    @property
    def axis2(self) -> np.ndarray:
        return self.origin[1] + self.h * np.arange(self.n)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis1, self.axis2, indexing="ij")

    def radius(self) -> np.ndarray:
        x1, x2 = self.coords()
        return np.hypot(x1, x2)

    def refine(self) -> "Grid":
        """Same square with the spacing halved."""
        return Grid(n=2 * self.n - 1, h=self.h / 2, origin=self.origin)


@dataclass
class GridField:
    """Scalar samples on a :class:`Grid`."""

    values: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"values shape {self.values.shape} does not match grid n={self.grid.n}"
            )

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def origin(self) -> tuple[float, float]:
        return self.grid.origin

    def l2(self, mask: np.ndarray | None = None) -> float:
        return l2_norm(self.values, self.grid.h, mask)

    def linf(self, mask: np.ndarray | None = None) -> float:
        return linf_norm(self.values, mask)


def l2_norm(values: np.ndarray, h: float, mask: np.ndarray | None = None) -> float:
    """Midpoint-rule L2 norm, cell area ``h**2``."""
    v = values if mask is None else values[mask]
    return float(np.sqrt(h * h * np.sum(v * v)))


def linf_norm(values: np.ndarray, mask: np.ndarray | None = None) -> float:
    v = values if mask is None else values[mask]
    if v.size == 0:
        return 0.0
    return float(np.max(np.abs(v)))


# one-sided closures (rows: node 0 and node 1 from the edge)
_D1_EDGE = np.array(
    [
        [-25.0, 48.0, -36.0, 16.0, -3.0, 0.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0, 0.0],
    ]
) / 12.0
_D2_EDGE = np.array(
    [
        [45.0, -154.0, 214.0, -156.0, 61.0, -10.0],
        [10.0, -15.0, -4.0, 14.0, -6.0, 1.0],
    ]
) / 12.0


def _along(a: np.ndarray, axis: int) -> np.ndarray:
    return np.moveaxis(a, axis, 0)


def _edge(c: np.ndarray, g6: np.ndarray) -> np.ndarray:
    # the weights sum to zero, so differencing against g6[0] keeps constants exact
    return np.tensordot(c[1:], g6[1:] - g6[0], axes=(0, 0))


def diff1(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order first derivative along ``axis`` with one-sided edge closures."""
    g = _along(np.asarray(f, dtype=float), axis)
    n = g.shape[0]
    if n < 6:
        raise ValueError("need at least 6 nodes along the differentiated axis")
    out = np.empty_like(g)
    out[2:-2] = ((g[:-4] - g[4:]) + 8.0 * (g[3:-1] - g[1:-3])) / (12.0 * h)
    for row in range(2):
        c = _D1_EDGE[row]
        out[row] = _edge(c, g[:6]) / h
        out[n - 1 - row] = -_edge(c, g[::-1][:6]) / h
    return np.moveaxis(out, 0, axis)


def diff2(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Fourth-order second derivative along ``axis`` with one-sided edge closures."""
    g = _along(np.asarray(f, dtype=float), axis)
    n = g.shape[0]
    if n < 6:
        raise ValueError("need at least 6 nodes along the differentiated axis")
    out = np.empty_like(g)
    mid = g[2:-2]
    out[2:-2] = (
        16.0 * ((g[1:-3] - mid) + (g[3:-1] - mid)) - ((g[:-4] - mid) + (g[4:] - mid))
    ) / (12.0 * h * h)
    for row in range(2):
        c = _D2_EDGE[row]
        out[row] = _edge(c, g[:6]) / (h * h)
        out[n - 1 - row] = _edge(c, g[::-1][:6]) / (h * h)
    return np.moveaxis(out, 0, axis)


def laplacian(f: np.ndarray, h: float) -> np.ndarray:
    return diff2(f, h, 0) + diff2(f, h, 1)


def gradient(f: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    return diff1(f, h, 0), diff1(f, h, 1)


def interior_mask(grid: Grid, fraction: float) -> np.ndarray:
    """Nodes inside the centred square holding ``fraction`` of the side length."""
    x1, x2 = grid.coords()
    c1 = grid.origin[0] + 0.5 * grid.h * (grid.n - 1)
    c2 = grid.origin[1] + 0.5 * grid.h * (grid.n - 1)
    half = 0.5 * fraction * grid.h * (grid.n - 1)
    tol = 1e-9 * grid.h
    return (np.abs(x1 - c1) <= half + tol) & (np.abs(x2 - c2) <= half + tol)


@dataclass(frozen=True)
class DecayParams:
    """Amplitude ``A``, decay exponent ``k`` and data size ``eps`` of slow-decay data."""

    A: float = 1.0
    k: float = 2.0
    eps: float = 1.0

    def __post_init__(self):
        if not self.k > 1:
            raise ValueError("decay exponent out of range: need k > 1")
        if not self.A > 0:
            raise ValueError("amplitude A must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclass
class WaveState:
    """Time ``t`` with position ``u`` and velocity ``p = u_t`` on a common grid."""

    t: float
    u: GridField
    p: GridField

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u.values)) and np.all(np.isfinite(self.p.values)))
