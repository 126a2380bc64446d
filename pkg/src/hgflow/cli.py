"""Command-line entry point ``hgflow``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import plotting
from .decay_estimates import Envelope, fit_log_slope, radial_samples, verify_envelope
from .geometry import ConformalMetric, conformal_factor, scalar_curvature
from .grid import Grid, GridField
from .harness import SweepAborted, SweepConfig, fit_exponent, sweep, write_records
from .nonlinear_solver import RunConfig, run
from .vector_fields import RESIDUAL_FLOOR, commutator_suite
from .wave_kernel import (InitialData, QuadratureSpec, constant_data, gaussian_data,
                          linear_solution, poisson_eval, rational_class_constant, rational_data)

WORKERS_ENV = "HGFLOW_WORKERS"

_BUILDERS = {
    "gaussian": lambda p: gaussian_data(p.get("amplitude", 1.0), p.get("width", 1.0),
                                        p.get("velocity", 0.0), tuple(p.get("center", (0.0, 0.0)))),
    "rational": lambda p: rational_data(p.get("A", 1.0), p.get("k", 2.0), p.get("velocity_sign", -1.0)),
    "rational_static": lambda p: rational_data(p.get("A", 1.0), p.get("k", 2.0), 0.0),
    "constant": lambda p: constant_data(p.get("c0", 1.0), p.get("c1", 0.0)),
}


def load_data(spec: str, **overrides) -> InitialData:
    """A built-in family name or a JSON file ``{"name": family, ...parameters}``."""
    params: dict = {}
    name = spec
    if spec not in _BUILDERS:
        path = Path(spec)
        if not path.is_file():
            raise SystemExit(f"unknown data {spec!r}: choose {sorted(_BUILDERS)} or a JSON file")
        params = json.loads(path.read_text())
        name = params.pop("name", None)
        if name not in _BUILDERS:
            raise SystemExit(f"data file names unknown family {name!r}")
    params.update({k: v for k, v in overrides.items() if v is not None})
    return _BUILDERS[name](params)


def _dump(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2, default=float)
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


def _outdir(path: str) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _field_rows(grid: Grid, *arrays):
    x1, x2 = grid.coords()
    cols = [x1.ravel(), x2.ravel()] + [a.ravel() for a in arrays]
    return (list(map(repr, map(float, row))) for row in zip(*cols))


def read_field_csv(path, column: str) -> GridField:
    """Rebuild a square-grid field from a CSV with ``x1, x2`` and ``column``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or column not in rows[0]:
        raise SystemExit(f"{path}: missing column {column!r}")
    x1 = np.array([float(r["x1"]) for r in rows])
    x2 = np.array([float(r["x2"]) for r in rows])
    vals = np.array([float(r[column]) for r in rows])
    a1, a2 = np.unique(x1), np.unique(x2)
    n = a1.size
    if a2.size != n or n * n != vals.size:
        raise SystemExit(f"{path}: nodes do not form a square grid")
    h = float(np.mean(np.diff(a1)))
    grid = Grid(n=n, h=h, origin=(float(a1[0]), float(a2[0])))
    i = np.rint((x1 - a1[0]) / h).astype(int)
    j = np.rint((x2 - a2[0]) / h).astype(int)
    out = np.empty((n, n))
    out[i, j] = vals
    return GridField(out, grid)


# ---------------------------------------------------------------------------
# subcommands


def cmd_linear_eval(a) -> int:
    data = load_data(a.data)
    quad = QuadratureSpec(radial_nodes=a.radial_nodes, angular_nodes=a.angular_nodes,
                          rim_substitution=a.rim)
    value = poisson_eval(a.t, a.x, data, quad)
    _dump({"t": a.t, "x": list(a.x), "value": value, "data": data.name,
           "quad_spec": asdict(quad)}, None)
    return 0


def cmd_linear_field(a) -> int:
    data = load_data(a.data)
    grid = Grid.square(a.half_width, a.nodes)
    quad = QuadratureSpec(radial_nodes=a.radial_nodes, angular_nodes=a.angular_nodes)
    field = linear_solution(a.t, grid, data, quad, workers=a.workers)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ("x1", "x2", "value"), _field_rows(grid, field.values))
    if a.png:
        plotting.field_png(field, a.png, title=f"{data.name}, t = {a.t:g}")
    return 0


def cmd_envelope_check(a) -> int:
    data = load_data(a.data, A=a.A, k=a.k)
    times = np.arange(a.horizon / a.snapshots, a.horizon + 1e-9, a.horizon / a.snapshots)
    samples = radial_samples(data, times, lambda t: np.arange(0.0, t + a.reach + 1e-9, a.grid),
                             workers=a.workers)
    A_env = rational_class_constant(a.k) * a.A if data.name.startswith("rational") else a.A
    rep = verify_envelope(times, samples, Envelope(A_env, a.k))
    centre = [vals[0] for _, vals in samples]
    late = times >= a.horizon / 10
    rep.details["centerline_slope"] = fit_log_slope(times[late], np.asarray(centre)[late])
    out = _outdir(a.out)
    _dump(rep.to_dict(), out / "report.json")
    _write_csv(out / "envelope.csv", ("t", "max_ratio_interior", "max_ratio_exterior"),
               ([repr(t), repr(i), repr(e)] for t, i, e in rep.details["rows"]))
    plotting.envelope_png(rep.details["rows"], out / "envelope.png")
    print(json.dumps({"c_est": rep.c_est, "trend": rep.trend, "passed": rep.passed,
                      "centerline_slope": rep.details["centerline_slope"]}))
    return 0 if rep.passed else 1


def cmd_vf_check(a) -> int:
    recs = commutator_suite(hs=a.h)
    ok = all(r["order_estimate"] is None or r["order_estimate"] >= a.min_order
             or r["residual"] <= RESIDUAL_FLOOR for r in recs)
    clean = [{**r, "order_estimate": (None if r["order_estimate"] is None else
                                      ("inf" if math.isinf(r["order_estimate"]) else r["order_estimate"]))}
             for r in recs]
    _dump({"records": clean, "passed": ok}, Path(a.out) if a.out else None)
    return 0 if ok else 1


def cmd_simulate(a) -> int:
    cfg = RunConfig.from_json(a.config)
    res = run(cfg)
    out = _outdir(a.out)
    snapdir = out / "snapshots"
    snapdir.mkdir(exist_ok=True)
    for i, s in enumerate(res.snapshots):
        _write_csv(snapdir / f"snap_{i:04d}_t{s.t:.4f}.csv", ("x1", "x2", "u", "p"),
                   _field_rows(s.grid, s.u.values, s.p.values))
    rows = [b.as_dict() for b in res.norms]
    ts = [b.t for b in res.norms]
    curv = dict(zip([s.t for s in res.snapshots], res.max_curvature))
    _write_csv(out / "norms.csv", ("t", "M1", "M2", "N1", "N2", "maxR"),
               ([repr(r["t"]), repr(r["M1"]), repr(r["M2"]), repr(r["N1"]), repr(r["N2"]),
                 repr(curv.get(r["t"], math.nan))] for r in rows))
    info = res.breakdown.to_dict()
    info["steps"] = res.steps
    info["norm_caveat"] = res.norms[0].caveat if res.norms else ""
    _dump(info, out / "breakdown.json")
    if rows:
        plotting.norms_png(ts, rows, out / "norms.png")
    last = res.snapshots[-1]
    if last.is_finite():
        plotting.field_png(last.u, out / "u_final.png", title=f"u at t = {last.t:.3g}", label="u")
    print(json.dumps(info))
    return 0


def cmd_curvature(a) -> int:
    field = read_field_csv(a.input, a.source)
    metric = conformal_factor(field) if a.source == "u" else ConformalMetric(field)
    R = scalar_curvature(metric)
    out = Path(a.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ("x1", "x2", "R"), _field_rows(R.grid, R.values))
    if a.png:
        plotting.field_png(R, a.png, title="scalar curvature", label="R")
    return 0


def cmd_lifespan_sweep(a) -> int:
    cfg = SweepConfig.from_json(a.config)
    if a.workers is not None:
        workers = a.workers
    elif os.environ.get(WORKERS_ENV):
        workers = int(os.environ[WORKERS_ENV])
    else:
        workers = cfg.workers
    out = _outdir(a.out)
    aborted = None
    try:
        records = sweep(cfg, workers=workers)
    except SweepAborted as exc:
        records, aborted = exc.completed, str(exc)
    write_records(records, out / "records.csv")
    _dump([{"epsilon": r.epsilon, "max_eps_weight": r.max_small_param} for r in records],
          out / "regime.json")
    if records:
        fit = fit_exponent(records)
        _dump(fit.to_dict(), out / "fit.json")
        (out / "plot.gp").write_text(plotting.lifespan_gnuplot(fit))
        plotting.lifespan_png(records, fit, out / "lifespan.png")
    if aborted:
        print(f"sweep aborted: {aborted}", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hgflow", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("linear-eval", help="solution of the free wave equation at one point")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", type=float, nargs=2, required=True, metavar=("X1", "X2"))
    p.add_argument("--data", default="gaussian")
    p.add_argument("--radial-nodes", type=int, default=256)
    p.add_argument("--angular-nodes", type=int, default=256)
    p.add_argument("--rim", choices=("cos_sub", "sqrt_sub"), default="cos_sub")
    p.set_defaults(func=cmd_linear_eval)

    p = sub.add_parser("linear-field", help="solution on a square grid, as CSV")
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--data", default="gaussian")
    p.add_argument("--half-width", type=float, default=5.0)
    p.add_argument("--nodes", type=int, default=41)
    p.add_argument("--radial-nodes", type=int, default=128)
    p.add_argument("--angular-nodes", type=int, default=128)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--png", default=None)
    p.set_defaults(func=cmd_linear_field)

    p = sub.add_parser("envelope-check", help="sup ratio of the solution to the decay envelope")
    p.add_argument("--data", default="rational")
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--A", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=40.0)
    p.add_argument("--grid", type=float, default=0.5, help="radial sample spacing")
    p.add_argument("--snapshots", type=int, default=20)
    p.add_argument("--reach", type=float, default=40.0, help="sample radii up to t + reach")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_envelope_check)

    p = sub.add_parser("vf-check", help="commutator residuals of the vector fields")
    p.add_argument("--h", type=float, nargs="+", default=[0.1, 0.05, 0.025])
    p.add_argument("--min-order", type=float, default=2.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_vf_check)

    p = sub.add_parser("simulate", help="run the nonlinear solver")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("curvature", help="scalar curvature of a snapshot")
    p.add_argument("--input", required=True)
    p.add_argument("--from", dest="source", choices=("u", "v"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--png", default=None)
    p.set_defaults(func=cmd_curvature)

    p = sub.add_parser("lifespan-sweep", help="breakdown times over a list of eps")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lifespan_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
