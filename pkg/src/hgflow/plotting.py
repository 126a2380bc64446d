"""Figures written to files (Agg backend) and the gnuplot script for sweeps."""

from __future__ import annotations

import math
from collections.abc import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .grid import GridField  # noqa: E402


def _save(fig, path) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def field_png(field: GridField, path, title: str = "", label: str = "value") -> None:
    g = field.grid
    lo = g.origin[0], g.origin[0] + g.h * (g.n - 1)
    fig, ax = plt.subplots(figsize=(5, 4.2))
    im = ax.imshow(field.values.T, origin="lower", extent=(lo[0], lo[1], g.origin[1],
                                                           g.origin[1] + g.h * (g.n - 1)),
                   cmap="viridis")
    fig.colorbar(im, ax=ax, label=label)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    if title:
        ax.set_title(title)
    _save(fig, path)


def envelope_png(rows: Sequence[tuple[float, float, float]], path) -> None:
    t, ri, ro = np.asarray(rows, float).T
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(t, ri, "o-", label="|x| <= t")
    ax.plot(t, ro, "s-", label="|x| > t")
    ax.set_xlabel("t")
    ax.set_ylabel("max |phi| / envelope")
    ax.set_ylim(bottom=0)
    ax.legend()
    _save(fig, path)


def norms_png(times: Sequence[float], rows: Sequence[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for key in ("M1", "M2", "N1", "N2"):
        vals = [r[key] for r in rows]
        if any(v > 0 for v in vals):
            ax.semilogy(times, vals, label=key)
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.legend()
    _save(fig, path)


def lifespan_png(records, fit, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.8))
    for cens, marker, label in ((False, "o", "breakdown"), (True, "^", "censored")):
        sel = [r for r in records if r.censored == cens and r.epsilon > 0]
        if sel:
            ax.loglog([r.epsilon for r in sel], [r.T_star for r in sel], marker, label=label)
    eps = [r.epsilon for r in records if r.epsilon > 0]
    if eps and math.isfinite(fit.delta_cal):
        e = np.geomspace(min(eps), max(eps), 50)
        ax.loglog(e, fit.delta_cal * e ** (-4.0 / 3.0), "k--", label="delta_cal eps^(-4/3)")
    ax.set_xlabel("eps")
    ax.set_ylabel("T_star")
    ax.legend()
    _save(fig, path)


def lifespan_gnuplot(fit, records_csv: str = "records.csv", png: str = "lifespan_gp.png") -> str:
    """Self-contained gnuplot script: log-log ``T_star`` against ``eps`` with the reference line."""
    delta = fit.delta_cal if math.isfinite(fit.delta_cal) else 0.0
    return "\n".join([
        "set terminal pngcairo size 640,480",
        f"set output '{png}'",
        "set datafile separator ','",
        "set logscale xy",
        "set key top right",
        "set xlabel 'eps'",
        "set ylabel 'T_star'",
        f"delta = {delta!r}",
        "f(x) = delta * x**(-4.0/3.0)",
        f"plot '{records_csv}' using 1:(strcol(3) eq \"false\" ? $2 : 1/0) skip 1 with points pt 7 title 'breakdown', \\",
        f"     '{records_csv}' using 1:(strcol(3) eq \"true\" ? $2 : 1/0) skip 1 with points pt 9 title 'censored', \\",
        "     f(x) with lines dt 2 title 'delta_cal eps^(-4/3)'",
        "",
    ])
