"""Epsilon sweeps of the nonlinear solver and fits against ``T = delta eps^(-4/3)``."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .nonlinear_solver import Reason, RunConfig, run

LIFESPAN_EXPONENT = -4.0 / 3.0


@dataclass
class SweepConfig:
    """Runs share ``template`` and differ only in ``eps``; each runs up to ``budget``.

    ``epsilons`` are stored in descending order.
    """

    epsilons: list[float]
    template: RunConfig = field(default_factory=RunConfig)
    budget: float = 30.0
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.template, dict):
            self.template = RunConfig.from_dict(self.template)
        eps = [float(e) for e in self.epsilons]
        if not eps:
            raise ValueError("need at least one epsilon")
        if any(e < 0 or not math.isfinite(e) for e in eps):
            raise ValueError("epsilon values must be finite and nonnegative")
        if len(set(eps)) != len(eps):
            raise ValueError("epsilon values must be distinct")
        if not self.budget > 0:
            raise ValueError("budget must be positive")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        self.epsilons = sorted(eps, reverse=True)

    def run_configs(self) -> list[RunConfig]:
        return [replace(self.template, eps=e, t_max=self.budget) for e in self.epsilons]

    def to_dict(self) -> dict:
        return {"epsilons": self.epsilons, "budget": self.budget, "workers": self.workers,
                "template": self.template.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        data = dict(data)
        template = data.pop("template", {})
        return cls(template=RunConfig.from_dict(template), **data)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class LifespanRecord:
    epsilon: float
    T_star: float
    censored: bool
    reason: str
    peak_weighted_N2: float
    max_small_param: float = 0.0  # max of eps (1+t)^(3/4) over the run

    def __post_init__(self):
        if not self.T_star > 0:
            raise ValueError("T_star must be positive")
        if self.censored != (self.reason == Reason.NONE.value):
            raise ValueError("censored records carry reason 'none' and only they do")


class SweepAborted(RuntimeError):
    def __init__(self, message: str, completed: list[LifespanRecord]):
        super().__init__(message)
        self.completed = completed


def _one(cfg: RunConfig) -> LifespanRecord:
    res = run(cfg)
    info = res.breakdown
    return LifespanRecord(cfg.eps, float(info.time), info.censored, info.reason.value,
                          res.peak_weighted_n2(), cfg.eps * (1 + float(info.time)) ** 0.75)


def sweep(cfg: SweepConfig, workers: int | None = None) -> list[LifespanRecord]:
    """One solver run per epsilon, in the order of ``cfg.epsilons``.

    Configs are validated in order first; the first invalid one aborts the sweep
    after the runs before it have completed, and :class:`SweepAborted` carries them.
    """
    configs = cfg.run_configs()
    bad, error = len(configs), None
    for i, c in enumerate(configs):
        try:
            c.validate()
        except ValueError as exc:
            bad, error = i, exc
            break
    todo = configs[:bad]
    n = cfg.workers if workers is None else workers
    if n > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=min(n, len(todo))) as pool:
            records = list(pool.map(_one, todo))
    else:
        records = [_one(c) for c in todo]
    if error is not None:
        raise SweepAborted(f"run for eps = {configs[bad].eps:g} rejected: {error}", records)
    return records


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    delta_cal: float
    n_censored: int
    n_used: int
    status: str  # "ok" or "insufficient"

    def to_dict(self) -> dict:
        return asdict(self)


def fit_exponent(records: Sequence[LifespanRecord]) -> FitResult:
    """Least squares of ``ln T_star`` on ``ln eps`` over uncensored records.

    ``delta_cal`` is ``min T_star eps^(4/3)`` over uncensored records, or over the
    censored ones (a lower estimate) when nothing broke down.  Records with
    ``eps = 0`` carry no information about ``delta``.
    """
    if not records:
        raise ValueError("no records")
    used = [r for r in records if not r.censored and r.epsilon > 0]
    cens = [r for r in records if r.censored]
    pool = used if used else [r for r in cens if r.epsilon > 0]
    delta = min((r.T_star * r.epsilon ** (4.0 / 3.0) for r in pool), default=math.nan)
    if len(used) < 3:
        return FitResult(math.nan, math.nan, delta, len(cens), len(used), "insufficient")
    x = np.log([r.epsilon for r in used])
    y = np.log([r.T_star for r in used])
    slope, intercept = np.polyfit(x, y, 1)
    return FitResult(float(slope), float(intercept), delta, len(cens), len(used), "ok")


def lower_bound(epsilon: float, delta: float) -> float:
    """``delta eps^(-4/3) - 1``."""
    return delta * epsilon ** LIFESPAN_EXPONENT - 1.0


def check_lower_bound(records: Sequence[LifespanRecord], delta: float) -> list[dict]:
    """Per-record ``pass``, ``fail`` or ``indeterminate`` against ``T >= delta eps^(-4/3) - 1``.

    A censored record passes when its horizon already clears the bound and is
    indeterminate otherwise; it never fails.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    out = []
    for r in records:
        bound = math.inf if r.epsilon == 0 else lower_bound(r.epsilon, delta)
        if r.T_star >= bound:
            status = "pass"
        else:
            status = "indeterminate" if r.censored else "fail"
        out.append({"epsilon": r.epsilon, "T_star": r.T_star, "bound": bound, "status": status})
    return out


def monotonicity_flags(records: Sequence[LifespanRecord], slack: float) -> list[tuple[float, float]]:
    """Pairs ``(eps_small, eps_large)`` where the larger epsilon lived longer by more than ``slack``."""
    recs = sorted(records, key=lambda r: r.epsilon)
    flags = []
    for a, b in zip(recs, recs[1:]):
        if b.T_star > a.T_star + slack:
            flags.append((a.epsilon, b.epsilon))
    return flags


RECORD_COLUMNS = ("epsilon", "T_star", "censored", "reason", "peak_weighted_N2")


def write_records(records: Sequence[LifespanRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([repr(r.epsilon), repr(r.T_star), str(r.censored).lower(), r.reason,
                        repr(r.peak_weighted_N2)])


def read_records(path) -> list[LifespanRecord]:
    with open(path, newline="") as fh:
        return [LifespanRecord(float(row["epsilon"]), float(row["T_star"]), row["censored"] == "true",
                               row["reason"], float(row["peak_weighted_N2"]))
                for row in csv.DictReader(fh)]
