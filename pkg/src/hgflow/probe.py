"""Fitted-constant reports shared by the inequality probes."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from collections.abc import Sequence

import numpy as np


@dataclass
class ProbeReport:
    """``c_est`` is the sup of left side over right side on the sample.

    ``trend`` holds ``(horizon, c_est restricted to times <= horizon)``; the probe
    passes when the last entry is at most ``slack`` times the first and every
    report in ``parts`` passes too.
    """

    name: str
    sample: str
    c_est: float
    trend: list[tuple[float, float]]
    slack: float = 2.0
    details: dict = field(default_factory=dict)
    parts: list["ProbeReport"] = field(default_factory=list)

    @property
    def growth(self) -> float:
        first, last = self.trend[0][1], self.trend[-1][1]
        if first == 0.0:
            return 1.0 if last == 0.0 else math.inf
        return last / first

    @property
    def passed(self) -> bool:
        vals = [c for _, c in self.trend]
        if not all(math.isfinite(c) and c >= 0 for c in vals):
            return False
        return self.growth <= self.slack and all(p.passed for p in self.parts)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["parts"] = [p.to_dict() for p in self.parts]
        out["passed"] = self.passed
        out["growth"] = self.growth
        return out


def safe_ratio(lhs: float, rhs: float, floor: float = 1e-300) -> float:
    """``lhs / rhs`` with ``0/0 = 0``; a positive left side over a null right side is infinite."""
    if rhs > floor:
        return lhs / rhs
    return 0.0 if lhs <= floor else math.inf


def horizon_trend(times: Sequence[float], ratios: Sequence[float],
                  horizons: Sequence[float]) -> list[tuple[float, float]]:
    """Running sup of ``ratios`` over ``times <= H`` for each horizon ``H``."""
    times = np.asarray(times, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    if times.size == 0:
        raise ValueError("empty sample")
    out = []
    for hz in horizons:
        sel = ratios[times <= hz + 1e-12]
        out.append((float(hz), float(sel.max()) if sel.size else 0.0))
    return out
