"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 infeasible deployment, 4 I/O failure.
Every output directory receives a ``manifest.json`` describing the run that
last wrote to it.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annealing import AnnealSchedule, PRESETS, anneal, run_log_to_csv
from .evaluation import (
    DEFAULT_CAPACITY_GBPS, PathRouter, THREADS_ENV, flows_per_link, maxmin_throughput,
    random_traffic_matrix, shortest_path_metrics,
)
from .incremental import (
    DEFAULT_INCREMENTAL_ITERATIONS, DayTransition, run_series, update_lsl, update_sa,
)
from .io import (
    TurnoverScenario, generate_turnover_series, load_series, load_snapshot, read_tle_file,
    save_series, save_snapshot, snapshot_from_tles,
)
from .lsl import LslParams, build_lsl
from .shell import ShellConfig, generate_synthetic_shell
from .stable import build_stable_link_set
from .topology import (
    InfeasibleDeployment, Topology, build_plus_grid, build_theoretical_floor, build_three_isl_grid,
)
from .validation import parse_range, parse_weights

log = logging.getLogger("leotopo")

EXIT_OK, EXIT_VALIDATION, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
METHODS = ("plus-grid", "three-isl-grid", "lsl", "sa", "floor")


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------
def _config_hash(args: argparse.Namespace) -> str:
    items = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "argv")}
    blob = json.dumps(items, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def write_manifest(out_dir: Path, args: argparse.Namespace, outputs: list, seeds: dict | None = None) -> Path:
    import numba
    import scipy

    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": ["leotopo"] + list(getattr(args, "argv", sys.argv[1:])),
        "subcommand": args.command,
        "arguments": {k: v for k, v in vars(args).items() if k not in ("func", "argv")},
        "config_hash": _config_hash(args),
        "seeds": seeds or {},
        "versions": {
            "leotopo": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
        "outputs": [str(p) for p in outputs],
        "written_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return path


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------
def _schedule(args, iterations: int) -> AnnealSchedule:
    return AnnealSchedule(args.t_initial, args.rho, args.t_min, iterations, args.seed)


def _weights(args):
    if args.preset:
        return PRESETS[args.preset]
    return parse_weights(args.weights)


def _builder(args):
    method = args.method
    if method == "plus-grid":
        return lambda s, c: build_plus_grid(s, c, args.isl_limit)
    if method == "three-isl-grid":
        return lambda s, c: build_three_isl_grid(s, c)
    if method == "floor":
        return lambda s, c: build_theoretical_floor(s, c)
    if method == "lsl":
        params = LslParams(args.lsl_d, args.isl_limit)
        return lambda s, c: build_lsl(s, c, params)
    if method == "sa":
        w, sched = _weights(args), _schedule(args, args.iters)
        return lambda s, c: anneal(s, c, args.isl_limit, w, sched).topology
    raise ValueError(f"unknown method {method}")


def _updater(args):
    if args.method == "lsl":
        params = LslParams(args.lsl_d, args.isl_limit)
        return lambda tr: update_lsl(tr, params)
    if args.method == "sa":
        w, sched = _weights(args), _schedule(args, args.incremental_iters)
        return lambda tr: update_sa(tr, w, sched)
    raise ValueError(f"--incremental is available for lsl and sa, not {args.method}")


def _write_rows(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _fmt(x) -> str:
    return f"{x:.6f}" if isinstance(x, float) else str(x)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def cmd_gen_shell(args) -> int:
    cfg = ShellConfig(args.planes, args.per_plane, args.altitude_km, args.inclination_deg,
                      phasing_offset_deg=args.phasing_deg)
    snap = generate_synthetic_shell(cfg, args.label)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_snapshot(snap, out)
    write_manifest(out.parent, args, [out])
    print(f"wrote {len(snap)} satellites to {out}")
    return EXIT_OK


def cmd_gen_series(args) -> int:
    base = load_snapshot(args.snapshot)
    sc = TurnoverScenario(args.mode, args.start_fraction, args.end_fraction, args.daily_pct, args.seed)
    days = sc.days_needed if args.days is None else args.days
    series = generate_turnover_series(base, sc, days, dt.date.fromisoformat(args.start_date))
    paths = save_series(series, args.out_dir)
    write_manifest(Path(args.out_dir), args, paths, {"turnover": args.seed})
    print(f"wrote {len(paths)} daily snapshots to {args.out_dir}")
    return EXIT_OK


def cmd_ingest_tle(args) -> int:
    elements = read_tle_file(args.tle)
    snap = snapshot_from_tles(elements, args.label, args.gap_deg, args.min_plane_size)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_snapshot(snap, out)
    write_manifest(out.parent, args, [out])
    print(f"wrote {len(snap)} satellites in {snap.config.num_planes} planes to {out}")
    return EXIT_OK


def cmd_build(args) -> int:
    snap = load_snapshot(args.snapshot)
    cand = build_stable_link_set(snap)
    out = Path(args.out)
    outputs = [out]
    if args.warm_start:
        prev = Topology.from_csv(args.warm_start)
        tr = DayTransition(snap, prev, snap, cand)
        topo = _updater(args)(tr)
    elif args.method == "sa":
        res = anneal(snap, cand, args.isl_limit, _weights(args), _schedule(args, args.iters),
                     log_stride=args.log_stride if args.run_log else 0)
        topo = res.topology
        if args.run_log:
            run_log_to_csv(res.log, args.run_log)
            outputs.append(Path(args.run_log))
    else:
        topo = _builder(args)(snap, cand)
    out.parent.mkdir(parents=True, exist_ok=True)
    topo.to_csv(out)
    write_manifest(out.parent, args, outputs, {"anneal": args.seed} if args.method == "sa" else {})
    print(f"{args.method}: {topo.num_edges} links over {len(topo.nodes)} satellites -> {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    snap = load_snapshot(args.snapshot)
    topo = Topology.from_csv(args.topology, snap)
    floor_ms = None
    if not args.no_floor:
        floor_ms = shortest_path_metrics(build_theoretical_floor(snap)).avg_delay_ms
    rep = shortest_path_metrics(topo, floor_delay_ms=floor_ms)
    out = Path(args.out_dir)
    method = args.method or topo.provenance.value
    paths = [
        _write_rows(out / "metrics.csv",
                    ["method", "isl_limit", "avg_delay_ms", "avg_hops", "worst_hops", "stretch", "disconnected_pairs"],
                    [[method, topo.degree_budget or "none", _fmt(rep.avg_delay_ms), _fmt(rep.avg_hops),
                      rep.worst_hops, _fmt(rep.delay_stretch), rep.disconnected_pairs]]),
        _write_rows(out / "delay_hist.csv", ["delay_ms_lo", "delay_ms_hi", "pairs"],
                    [[k * rep.delay_bin_ms, (k + 1) * rep.delay_bin_ms, int(c)]
                     for k, c in enumerate(rep.delay_histogram)]),
        _write_rows(out / "hop_hist.csv", ["hops", "pairs"],
                    [[k, int(c)] for k, c in enumerate(rep.hop_histogram)]),
    ]
    write_manifest(out, args, paths)
    print(f"avg delay {rep.avg_delay_ms:.2f} ms, avg hops {rep.avg_hops:.2f}, worst hops {rep.worst_hops}")
    return EXIT_OK


def cmd_throughput(args) -> int:
    snap = load_snapshot(args.snapshot)
    topo = Topology.from_csv(args.topology, snap)
    router = PathRouter(topo)
    rows, fpl = [], None
    pair_counts = parse_range(args.pairs)
    for n_pairs in pair_counts:
        for trial in range(args.trials):
            tm = random_traffic_matrix(topo.nodes, n_pairs, [args.seed, n_pairs, trial])
            alloc = maxmin_throughput(topo, tm, args.capacity_gbps, args.cap_at_demand, router)
            rows.append([n_pairs, trial, _fmt(alloc.aggregate_tbps)])
            if n_pairs == pair_counts[-1] and trial == 0:
                fpl = flows_per_link(topo, tm, router)
    out = Path(args.out_dir)
    paths = [_write_rows(out / "throughput.csv", ["pairs", "trial", "aggregate_tbps"], rows)]
    if fpl is not None:
        paths.append(_write_rows(out / "flows_per_link.csv", ["src", "dst", "flows"],
                                 [[a, b, c] for (a, b), c in sorted(fpl.items())]))
    write_manifest(out, args, paths, {"traffic": args.seed})
    for n_pairs in pair_counts:
        vals = [float(r[2]) for r in rows if r[0] == n_pairs]
        if vals:
            print(f"{n_pairs:4d} pairs: {np.mean(vals):.3f} Tbps")
    return EXIT_OK


def cmd_simulate(args) -> int:
    series = load_series(args.series_dir)
    build = _builder(args)
    update = _updater(args) if args.incremental else None
    out = Path(args.out_dir)
    topo_dir = out / "topologies"
    topo_dir.mkdir(parents=True, exist_ok=True)
    breakage_rows, metric_rows, paths = [], [], []
    for day in run_series(series, build, update, args.realign_every):
        p = topo_dir / f"{day.label}.csv"
        day.topology.to_csv(p)
        paths.append(p)
        if day.breakage is not None:
            b = day.breakage
            breakage_rows.append([day.label, args.method, args.isl_limit, b.selected_prev, b.broken,
                                  _fmt(b.breakage_rate_pct)])
        if not args.no_metrics:
            rep = shortest_path_metrics(day.topology)
            metric_rows.append([day.label, args.method, args.isl_limit, _fmt(rep.avg_delay_ms),
                                _fmt(rep.avg_hops), rep.worst_hops, rep.disconnected_pairs,
                                int(day.recomputed)])
        log.info("%s done", day.label)
    paths.append(_write_rows(out / "breakage.csv",
                             ["date", "method", "isl_limit", "selected", "broken", "rate_pct"], breakage_rows))
    if metric_rows:
        paths.append(_write_rows(out / "metrics.csv",
                                 ["date", "method", "isl_limit", "avg_delay_ms", "avg_hops", "worst_hops",
                                  "disconnected_pairs", "recomputed"], metric_rows))
    write_manifest(out, args, paths, {"anneal": args.seed} if args.method == "sa" else {})
    print(f"simulated {len(series)} days; {len(breakage_rows)} breakage rows in {out / 'breakage.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------
def _add_method_args(p, methods=METHODS):
    p.add_argument("--method", choices=methods, required=True)
    p.add_argument("--isl-limit", type=int, default=4, help="per-satellite ISL budget")
    p.add_argument("--lsl-d", type=int, default=9, help="LSL maximum plane span")
    p.add_argument("--weights", default="1,2,5", help="alpha_L,alpha_U,alpha_M")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named weights; overrides --weights")
    p.add_argument("--iters", type=int, default=200_000)
    p.add_argument("--incremental-iters", type=int, default=DEFAULT_INCREMENTAL_ITERATIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-initial", type=float, default=1.0)
    p.add_argument("--rho", type=float, default=0.9995)
    p.add_argument("--t-min", type=float, default=1e-4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leotopo", description="ISL topology design for LEO shells")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-shell", help="write a fully populated synthetic shell")
    p.add_argument("--planes", type=int, required=True)
    p.add_argument("--per-plane", type=int, required=True)
    p.add_argument("--altitude-km", type=float, default=550.0)
    p.add_argument("--inclination-deg", type=float, default=53.0)
    p.add_argument("--phasing-deg", type=float, default=None,
                   help="anomaly shift between neighbouring planes (default 360/(planes*per_plane))")
    p.add_argument("--label", default="synthetic")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_shell)

    p = sub.add_parser("gen-series", help="synthetic growth/shrinkage series from a full shell")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--mode", choices=["growth", "shrinkage"], required=True)
    p.add_argument("--start-fraction", type=float, required=True)
    p.add_argument("--end-fraction", type=float, required=True)
    p.add_argument("--daily-pct", type=float, default=1.0)
    p.add_argument("--days", type=int, default=None)
    p.add_argument("--start-date", default="2024-10-01")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_series)

    p = sub.add_parser("ingest-tle", help="snapshot from a TLE file (circular-orbit approximation)")
    p.add_argument("--tle", required=True)
    p.add_argument("--label", default="")
    p.add_argument("--gap-deg", type=float, default=2.5)
    p.add_argument("--min-plane-size", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest_tle)

    p = sub.add_parser("build", help="build one topology")
    _add_method_args(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--warm-start", help="previous topology CSV (lsl and sa only)")
    p.add_argument("--run-log", help="annealing run-log CSV")
    p.add_argument("--log-stride", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("evaluate", help="delay/hop metrics and histograms")
    p.add_argument("--topology", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--method", help="label for metrics.csv (default: topology provenance)")
    p.add_argument("--no-floor", action="store_true", help="skip the floor graph (stretch becomes nan)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("throughput", help="max-min fair throughput sweep")
    p.add_argument("--topology", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--pairs", default="10..100")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--capacity-gbps", type=float, default=DEFAULT_CAPACITY_GBPS)
    p.add_argument("--cap-at-demand", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_throughput)

    p = sub.add_parser("simulate", help="day-by-day run over a series directory")
    _add_method_args(p)
    p.add_argument("--series-dir", required=True)
    p.add_argument("--incremental", action="store_true")
    p.add_argument("--realign-every", type=int, default=0)
    p.add_argument("--no-metrics", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    log.debug("threads from %s", THREADS_ENV)
    try:
        return args.func(args)
    except InfeasibleDeployment as exc:
        print(f"infeasible deployment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, TypeError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
