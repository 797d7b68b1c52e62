"""Command-line driver: load a config, run analytic or simulated sweeps, write CSV."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import tomli

from . import analytic, simulator
from .curves import CdfCurve, curves_to_csv, write_atomic
from .model import (ConfigError, ExperimentConfig, InterfererModel, SchedulingPolicy,
                    config_from_dict, list_presets, resolve_config_path)
from .specfun import QuadratureError, SeriesConvergenceError

log = logging.getLogger("hetdelay")

COMMANDS = ("analytic-success", "analytic-delay", "analytic-outage", "simulate", "validate")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

# containment slack for `validate`: base + k standard errors
SLACK_BASE = 0.02
SLACK_SE = 2.0

OUTAGE_HEADER = ["sweep", "value", "policy", "lower", "upper", "q_dominant", "q_modified"]
SUMMARY_HEADER = ["sweep", "value", "policy", "model", "n_users", "stable_fraction", "outage",
                  "seed"]
VALIDATE_HEADER = ["sweep", "value", "policy", "x", "empirical", "se", "lower", "upper",
                   "violation", "slack"]

# short names accepted by --sweep, mapped onto the TOML layout
_SWEEP_ALIASES = {
    "alpha": ("network", "alpha"), "theta": ("network", "theta"), "p": ("network", "p"),
    "lambda_u": ("traffic", "lambda_u"), "xi_min": ("traffic", "xi_min"),
    "xi_max": ("traffic", "xi_max"), "beta_min": ("traffic", "beta_min"),
    "beta_max": ("traffic", "beta_max"),
}
# range fields take values written lo:hi
_RANGE_FIELDS = {"xi": ("xi_min", "xi_max"), "beta": ("beta_min", "beta_max")}


@dataclass(frozen=True)
class Sweep:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    config: Path
    out: Path
    policies: tuple[SchedulingPolicy, ...]
    sweep: Optional[Sweep] = None
    seed: Optional[int] = None
    model: InterfererModel = InterfererModel.ORIGINAL


def parse_sweep(text: str) -> Sweep:
    name, sep, values = text.partition("=")
    name = name.strip()
    vals = tuple(v.strip() for v in values.split(",") if v.strip())
    if not sep or not name or not vals:
        raise ConfigError(f"--sweep expects field=v1,v2,..., got {text!r}")
    return Sweep(name, vals)


def _number(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"sweep value {text!r} for {name} is not a number") from None


def apply_sweep(raw: dict, name: str, value: str) -> dict:
    """Copy of the raw config with one sweep value substituted.

    ``name`` is a dotted TOML path (``tier.2.bias``, ``network.p``), a short
    alias (``p``, ``lambda_u``, ``B2``) or a range field (``xi``, ``beta``)
    taking ``lo:hi``. Unknown fields are rejected rather than added.
    """
    out = copy.deepcopy(raw)
    if name in _RANGE_FIELDS:
        lo, sep, hi = value.partition(":")
        if not sep:
            raise ConfigError(f"sweep over {name} needs lo:hi values, got {value!r}")
        traffic = out.setdefault("traffic", {})
        k_lo, k_hi = _RANGE_FIELDS[name]
        traffic[k_lo], traffic[k_hi] = _number(lo, name), _number(hi, name)
        return out
    if name[:1] == "B" and name[1:].isdigit():
        path = ("tier", name[1:], "bias")
    elif name in _SWEEP_ALIASES:
        path = _SWEEP_ALIASES[name]
    else:
        path = tuple(name.split("."))
    node = out
    for key in path[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"sweep field {name!r} does not name a config field")
        node = node[key]
    leaf = path[-1]
    if not isinstance(node, dict) or (leaf not in node and not _optional_leaf(path)):
        raise ConfigError(f"sweep field {name!r} does not name a config field")
    node[leaf] = _number(value, name)
    return out


def _optional_leaf(path: tuple[str, ...]) -> bool:
    # fields with defaults may be absent from the file yet still be swept
    return (len(path) == 3 and path[0] == "tier" and path[2] == "bias") or \
        path in {("network", "ref_loss")}


def load_raw(path: Path) -> dict:
    try:
        return tomli.loads(path.read_text())
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: malformed config: {exc}") from exc


def sweep_points(spec: ExperimentSpec) -> list[tuple[str, ExperimentConfig]]:
    """(value label, config) per sweep point; a single unlabeled point without a sweep."""
    raw = load_raw(spec.config)
    points = [("", raw)] if spec.sweep is None else [
        (v, apply_sweep(raw, spec.sweep.name, v)) for v in spec.sweep.values]
    out = []
    for label, r in points:
        cfg = config_from_dict(r)
        if spec.seed is not None:
            cfg = replace(cfg, simulation=replace(cfg.simulation, seed=spec.seed))
        out.append((label, cfg))
    return out


def _suffix(spec: ExperimentSpec, label: str) -> str:
    return "" if spec.sweep is None else f"_{spec.sweep.name}={label}"


def _rows_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _f(v: float) -> str:
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


# one task per (sweep point, policy); module-level so worker processes can run it
def _analytic_task(args):
    command, cfg, policy = args
    net, quad, grid = cfg.network, cfg.quadrature, cfg.grid
    if command == "analytic-success":
        return analytic.success_bound_curve(net, policy, grid.u_grid(), quad)
    if command == "analytic-delay":
        return analytic.delay_bound_curve(net, policy, grid.t_grid(), quad, cfg.cell_law)
    b = analytic.delay_outage(net, policy, quad, cell_law=cfg.cell_law)
    return b, net.p, analytic.modified_activity(net, policy)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_analytic(spec: ExperimentSpec) -> int:
    points = sweep_points(spec)
    jobs = [(spec.command, cfg, pol) for _, cfg in points for pol in spec.policies]
    results = _map(_analytic_task, jobs, simulator.worker_count())
    if spec.command == "analytic-outage":
        rows = []
        it = iter(results)
        for label, _ in points:
            for pol in spec.policies:
                b, qd, qm = next(it)
                rows.append([spec.sweep.name if spec.sweep else "", label, pol.value,
                             _f(b.lower), _f(b.upper), _f(qd), _f(qm)])
        path = spec.out / "outage.csv"
        write_atomic(path, _rows_csv(OUTAGE_HEADER, rows))
        log.info("wrote %s", path)
        return EXIT_OK
    kind = "success" if spec.command == "analytic-success" else "delay"
    n = len(spec.policies)
    for i, (label, _) in enumerate(points):
        curves = results[i * n:(i + 1) * n]
        for c in curves:
            c.check(tol=10 * points[i][1].quadrature.abs_tol)
        path = spec.out / f"analytic_{kind}{_suffix(spec, label)}.csv"
        write_atomic(path, curves_to_csv(curves))
        log.info("wrote %s", path)
    return EXIT_OK


def _simulate_point(spec: ExperimentSpec, label: str, cfg: ExperimentConfig):
    """Run every policy at one sweep point; write per-user stats and curves."""
    summaries = {}
    rows = []
    curves: list[CdfCurve] = []
    grid = cfg.grid.t_grid()
    for pol in spec.policies:
        stats = simulator.simulate(cfg.network, pol, spec.model, cfg.simulation)
        s = simulator.aggregate(stats, delay_grid=grid, success_grid=cfg.grid.u_grid())
        summaries[pol] = s
        tag = f"{pol.value}{_suffix(spec, label)}"
        simulator.write_user_stats(stats, spec.out / f"users_{tag}.csv")
        curves += [s.delay_curve(pol.value), s.success_curve(pol.value)]
        n_stable = sum(1 for u in stats if u.stable and not math.isnan(u.mean_delay))
        rows.append([spec.sweep.name if spec.sweep else "", label, pol.value, spec.model.value,
                     s.n_users, _f(n_stable / s.n_users if s.n_users else math.nan),
                     _f(s.outage), cfg.simulation.seed])
        if s.n_users and n_stable == 0:
            log.warning("%s: no stable users (every finite delay CDF value is 0)", tag)
    write_atomic(spec.out / f"empirical{_suffix(spec, label)}.csv", curves_to_csv(curves))
    return summaries, rows


def run_simulate(spec: ExperimentSpec) -> int:
    rows = []
    for label, cfg in sweep_points(spec):
        _, r = _simulate_point(spec, label, cfg)
        rows += r
    write_atomic(spec.out / "simulate_summary.csv", _rows_csv(SUMMARY_HEADER, rows))
    return EXIT_OK


def containment(emp: CdfCurve, bound: CdfCurve) -> tuple[np.ndarray, np.ndarray]:
    """(violation, slack) per grid point after joining the two curves on x."""
    if not np.array_equal(emp.grid, bound.grid):
        raise ValueError("empirical and analytic curves are on different grids")
    se = 0.5 * (emp.upper - emp.lower)
    violation = np.maximum.reduce([bound.lower - emp.values, emp.values - bound.upper,
                                   np.zeros_like(emp.values)])
    return violation, SLACK_BASE + SLACK_SE * se


def run_validate(spec: ExperimentSpec) -> int:
    rows = []
    worst = 0.0
    ok = True
    for label, cfg in sweep_points(spec):
        summaries, _ = _simulate_point(spec, label, cfg)
        bounds = []
        for pol in spec.policies:
            b = analytic.delay_bound_curve(cfg.network, pol, cfg.grid.t_grid(), cfg.quadrature,
                                           cfg.cell_law)
            bounds.append(b)
            emp = summaries[pol].delay_curve(pol.value)
            viol, slack = containment(emp, b)
            excess = viol - slack
            ok &= bool(np.all(excess <= 0))
            worst = max(worst, float(viol.max()))
            i = int(np.argmax(excess))
            log.info("%s%s: max violation %.4f (slack %.4f at T=%g)%s", pol.value,
                     _suffix(spec, label), viol.max(), slack[i], emp.grid[i],
                     "" if excess[i] <= 0 else "  FAIL")
            se = 0.5 * (emp.upper - emp.lower)
            for j, x in enumerate(emp.grid):
                rows.append([spec.sweep.name if spec.sweep else "", label, pol.value, _f(x),
                             _f(emp.values[j]), _f(se[j]), _f(b.lower[j]), _f(b.upper[j]),
                             _f(viol[j]), _f(slack[j])])
        write_atomic(spec.out / f"analytic_delay{_suffix(spec, label)}.csv", curves_to_csv(bounds))
    write_atomic(spec.out / "validate.csv", _rows_csv(VALIDATE_HEADER, rows))
    print(f"containment: max violation {worst:.4f}; {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hetdelay",
        description="Delay and success-probability analysis of K-tier cellular networks.")
    ap.add_argument("command", choices=COMMANDS + ("presets",))
    ap.add_argument("--config", help="TOML file or preset name (see `hetdelay presets`)")
    ap.add_argument("--policy", action="append", metavar="{random,fifo,rr}",
                    help="scheduling policy; repeat for several (default: all three)")
    ap.add_argument("--sweep", metavar="FIELD=V1,V2,...",
                    help="e.g. tier.2.bias=1,2,4  p=0.2,0.6  xi=0.01:0.05,0.2:0.3")
    ap.add_argument("--seed", type=int, help="master simulation seed (overrides the config)")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--model", default="original", choices=[m.value for m in InterfererModel],
                    help="interferer model for simulate (default: original)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def make_spec(args: argparse.Namespace) -> ExperimentSpec:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        raise ConfigError("--seed must fit in an unsigned 64-bit integer")
    pols = tuple(dict.fromkeys(SchedulingPolicy.parse(p) for p in args.policy)) \
        if args.policy else tuple(SchedulingPolicy)
    return ExperimentSpec(
        command=args.command, config=resolve_config_path(args.config), out=Path(args.out),
        policies=pols, sweep=parse_sweep(args.sweep) if args.sweep else None, seed=args.seed,
        model=InterfererModel(args.model))


def run(spec: ExperimentSpec) -> int:
    if spec.command.startswith("analytic-"):
        return run_analytic(spec)
    if spec.command == "simulate":
        return run_simulate(spec)
    return run_validate(spec)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "presets":
        print("\n".join(list_presets()))
        return EXIT_OK
    try:
        return run(make_spec(args))
    except ConfigError as exc:
        print(f"hetdelay: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, SeriesConvergenceError) as exc:
        print(f"hetdelay: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
