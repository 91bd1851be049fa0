"""Batch experiment front-end.

Subcommands:
  analyze   heatmap of a spatial distribution over the canonical topology
  simulate  replicated network runs for one protocol
  sweep     replicated runs across one swept axis
  validate  quadrature vs Monte Carlo cross-check

Exit codes: 0 ok, 1 validation/configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .analysis import (
    BirthTimeDist,
    GridSpec,
    QuadratureConfig,
    Scenario3,
    ScenarioCoop,
    coop_avail_cs_constrained,
    coop_avail_decode_only,
    heatmap,
    interferer_outage,
    outage_prob,
)
from .analysis.montecarlo import (
    mc_coop_cs_constrained,
    mc_coop_decode_only,
    mc_interferer_outage,
    mc_outage_prob,
)
from .config import ConfigError, load_config, parse_config, render_config
from .report import (
    render_cdf,
    render_heatmap,
    render_sweep,
    write_cdf_csv,
    write_heatmap_csv,
    write_manifest,
    write_reports_csv,
    write_sweep_csv,
)
from .sim import run as run_sim
from .sim import sweep as run_sweep
from .sim.metrics import relay_distance_cdf
from .units import dbm_to_watts

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _load(args):
    if getattr(args, "config", None):
        return load_config(args.config, seed=args.seed, protocol=getattr(args, "protocol", None),
                           replications=args.reps)
    return parse_config("", seed=args.seed, protocol=getattr(args, "protocol", None),
                        replications=args.reps)


def _cmd_analyze(args):
    quad = QuadratureConfig()
    sc = ScenarioCoop(p_s=(0.0, 0.0), p_d=(args.delta_sd, 0.0),
                      p_c=(args.coop_x, args.coop_y))
    grid = GridSpec(-60, 180, -120, 120, args.grid_nx, args.grid_ny)
    t0 = time.time()
    result = heatmap(args.quantity, sc, grid, quad=quad)
    wall = time.time() - t0
    out = args.out
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"heatmap_{args.quantity}.csv")
    write_heatmap_csv(result, csv_path)
    write_manifest(os.path.join(out, f"heatmap_{args.quantity}.manifest"),
                   f"[analyze]\nquantity = {args.quantity}\n"
                   f"delta_sd = {args.delta_sd}\n"
                   f"grid = {args.grid_nx}x{args.grid_ny}\n"
                   f"eta_nodes = {quad.eta_nodes}\nti_nodes = {quad.ti_nodes}\n",
                   seed="-", wall_time_s=wall)
    if args.figures:
        render_heatmap(result, os.path.join(out, f"heatmap_{args.quantity}.png"), sc)
    x, y = result.argmax_position()
    print(f"{args.quantity}: wrote {csv_path} ({result.values.size} cells, "
          f"{wall:.1f}s); argmax at ({x:.1f}, {y:.1f}) m")
    return EXIT_OK


def _cmd_simulate(args):
    cfg = _load(args)
    t0 = time.time()
    result = run_sim(cfg)
    wall = time.time() - t0
    out = args.out
    os.makedirs(out, exist_ok=True)
    csv_path = os.path.join(out, f"metrics_{cfg.protocol}.csv")
    write_reports_csv(result.reports, csv_path)
    write_manifest(os.path.join(out, f"metrics_{cfg.protocol}.manifest"),
                   render_config(cfg), seed=cfg.seed, wall_time_s=wall)
    if result.report.relay_distance_samples:
        write_cdf_csv(result.report, os.path.join(out, "relay_distance_cdf.csv"))
        if args.figures:
            d, f = relay_distance_cdf(result.report)
            render_cdf([(cfg.protocol, d, f)],
                       os.path.join(out, "relay_distance_cdf.png"))
    m = result.report
    print(f"{cfg.protocol}: {cfg.replications} replication(s) in {wall:.1f}s -> {csv_path}")
    print(f"  throughput {m.aggregate_throughput / 1e3:.0f} kb/s, PDR {m.pdr:.3f}, "
          f"shares {({k: round(v, 3) for k, v in m.outcome_shares.items()})}")
    return EXIT_OK


def _cmd_sweep(args):
    cfg = _load(args)
    values = [float(v) for v in args.values.split(",")]
    if args.axis == "relay_cs_threshold":
        values = [dbm_to_watts(v) for v in values]
    t0 = time.time()
    entries = run_sweep(cfg, args.axis, sorted(values))
    wall = time.time() - t0
    out = args.out
    os.makedirs(out, exist_ok=True)
    rows = [(v if args.axis != "relay_cs_threshold" else 10 * np.log10(v / 1e-3),
             res.report) for v, res in entries]
    csv_path = os.path.join(out, f"sweep_{args.axis}.csv")
    write_sweep_csv(args.axis, rows, csv_path)
    write_manifest(os.path.join(out, f"sweep_{args.axis}.manifest"),
                   render_config(cfg), seed=cfg.seed, wall_time_s=wall,
                   extra={"axis": args.axis, "values": args.values})
    if args.figures:
        render_sweep(args.axis, rows, os.path.join(out, f"sweep_{args.axis}.png"))
    print(f"sweep over {args.axis}: {len(entries)} points in {wall:.1f}s -> {csv_path}")
    return EXIT_OK


def _validate_cases(delta_sd=60.0):
    T = 5000 / 2.1e6
    s3 = lambda p_i: Scenario3((0, 0), (delta_sd, 0), p_i)
    sc = lambda p_c: ScenarioCoop((0, 0), (delta_sd, 0), p_c)
    return [
        ("outage t_i=0, I=(80,0)",
         lambda: outage_prob(s3((80, 0)), 0.0),
         lambda n, r: mc_outage_prob(s3((80, 0)), 0.0, n, r)),
        ("outage t_i=T/2, I=(90,20)",
         lambda: outage_prob(s3((90, 20)), T / 2),
         lambda n, r: mc_outage_prob(s3((90, 20)), T / 2, n, r)),
        ("gated outage t_i=0, I=(80,0)",
         lambda: interferer_outage(s3((80, 0)), 0.0),
         lambda n, r: mc_interferer_outage(s3((80, 0)), 0.0, n, r)),
        ("decode-only avail C=(10,0), I=(90,0), t_i=-T/3",
         lambda: coop_avail_decode_only(sc((10, 0)), (90, 0), -T / 3),
         lambda n, r: mc_coop_decode_only(sc((10, 0)), (90, 0), -T / 3, n, r)),
        ("cs-constrained avail C=(10,0), I=(90,0), t_i=T/2",
         lambda: coop_avail_cs_constrained(sc((10, 0)), (90, 0), T / 2),
         lambda n, r: mc_coop_cs_constrained(sc((10, 0)), (90, 0), T / 2, n, r)),
    ]


def _cmd_validate(args):
    rng = np.random.default_rng(args.seed if args.seed is not None else 1)
    n = args.samples
    if n < 10 ** 5:
        print(f"warning: {n} samples is below the confidence floor of 1e5; "
              f"differences may be sampling noise", file=sys.stderr)
    failures = 0
    for name, quad_fn, mc_fn in _validate_cases():
        q = quad_fn()
        m = mc_fn(n, rng)
        diff = abs(q - m)
        ok = diff <= args.tolerance
        failures += (not ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: quadrature={q:.6f} "
              f"monte_carlo={m:.6f} |diff|={diff:.6f}")
    if failures:
        print(f"{failures} case(s) beyond +/-{args.tolerance}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="coopsense",
                                description="carrier-sense cooperation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="spatial distribution heatmaps")
    pa.add_argument("quantity", choices=["interferer", "coop_minus",
                                         "coop_plus", "coop_avg"])
    pa.add_argument("--delta-sd", type=float, default=60.0)
    pa.add_argument("--coop-x", type=float, default=10.0)
    pa.add_argument("--coop-y", type=float, default=0.0)
    pa.add_argument("--grid-nx", type=int, default=60)
    pa.add_argument("--grid-ny", type=int, default=48)
    pa.add_argument("--out", default="results")
    pa.add_argument("--seed", type=int, default=None)
    pa.add_argument("--reps", type=int, default=None)
    pa.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    pa.set_defaults(fn=_cmd_analyze)

    ps = sub.add_parser("simulate", help="network simulation runs")
    ps.add_argument("--config", default=None)
    ps.add_argument("--protocol", choices=["csma", "dharq", "dharq_ideal_bound"],
                    default=None)
    ps.add_argument("--seed", type=int, default=None)
    ps.add_argument("--reps", type=int, default=None)
    ps.add_argument("--out", default="results")
    ps.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    ps.set_defaults(fn=_cmd_simulate)

    pw = sub.add_parser("sweep", help="sweep one axis over simulation runs")
    pw.add_argument("axis", choices=["lambda", "relay_cs_threshold", "delta_sd"])
    pw.add_argument("values", help="comma-separated values "
                                   "(dBm for relay_cs_threshold)")
    pw.add_argument("--config", default=None)
    pw.add_argument("--protocol", choices=["csma", "dharq", "dharq_ideal_bound"],
                    default=None)
    pw.add_argument("--seed", type=int, default=None)
    pw.add_argument("--reps", type=int, default=None)
    pw.add_argument("--out", default="results")
    pw.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    pw.set_defaults(fn=_cmd_sweep)

    pv = sub.add_parser("validate", help="quadrature vs Monte Carlo")
    pv.add_argument("--samples", type=int, default=10 ** 6)
    pv.add_argument("--tolerance", type=float, default=5e-3)
    pv.add_argument("--seed", type=int, default=1)
    pv.set_defaults(fn=_cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
