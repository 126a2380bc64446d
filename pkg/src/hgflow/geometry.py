"""Conformal surface metrics ``g = v (dx1^2 + dx2^2)`` and their curvature."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridField, laplacian


@dataclass
class ConformalMetric:
    """Metric ``v * delta_ij`` stored through its positive factor ``v``."""

    v: GridField

    @property
    def grid(self) -> Grid:
        return self.v.grid

    def log_factor(self) -> np.ndarray:
        vals = self.v.values
        if not np.all(vals > 0):
            raise ValueError("degenerate metric: v must be positive at every node")
        return np.log(vals)

    @classmethod
    def from_log(cls, u: GridField) -> "ConformalMetric":
        return conformal_factor(u)


def conformal_factor(u: GridField) -> ConformalMetric:
    return ConformalMetric(GridField(np.exp(u.values), u.grid))


def scalar_curvature(m: ConformalMetric) -> GridField:
    """``R = -lap(ln v) / v``, taking the Laplacian of ``ln v`` directly."""
    w = m.log_factor()
    return GridField(-laplacian(w, m.grid.h) / m.v.values, m.grid)


def ricci(m: ConformalMetric) -> tuple[GridField, GridField]:
    """``(R_11, R_12)`` of ``R_ij = R g_ij / 2``; ``R_22 = R_11``."""
    r = scalar_curvature(m)
    return GridField(0.5 * r.values * m.v.values, m.grid), GridField(np.zeros_like(r.values), m.grid)


_SECOND_DIFF = {3: np.array([1.0, -2.0, 1.0]),
                5: np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0}


def flow_residual(snapshots: Sequence[ConformalMetric], dt: float) -> GridField:
    """``v_tt - lap(ln v)`` at the middle of equally spaced snapshots.

    Five snapshots give a fourth-order time difference, three a second-order one.
    Longer sequences are centred on the middle snapshot.
    """
    if len(snapshots) < 3:
        raise ValueError("need at least 3 snapshots")
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = snapshots[0].grid
    for s in snapshots:
        if s.grid != grid:
            raise ValueError("snapshots live on mismatched grids")
    width = 5 if len(snapshots) >= 5 else 3
    mid = len(snapshots) // 2
    window = snapshots[mid - width // 2: mid + width // 2 + 1]
    coef = _SECOND_DIFF[width]
    vtt = sum(c * s.v.values for c, s in zip(coef, window)) / (dt * dt)
    centre = snapshots[mid]
    return GridField(vtt - laplacian(centre.log_factor(), grid.h), grid)


def sphere_factor(grid: Grid, radius: float = 1.0) -> ConformalMetric:
    """Stereographic round sphere ``v = 4 a^2 / (1 + |x|^2)^2`` (curvature ``2 / a^2``)."""
    r2 = grid.radius() ** 2
    return ConformalMetric(GridField(4.0 * radius**2 / (1.0 + r2) ** 2, grid))
