"""Command-line entry point: ``mpuesim {run,campaign,dump-patterns,plot-data}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .antenna import MpuePanelSet, build_tx_grid, pattern_rows
from .config import APPROACH_NAMES, ConfigError, load_config, make_config, with_overrides
from .engine import run_campaign, simulate, write_run, write_table

log = logging.getLogger("mpuesim")


def _config(args):
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "approach", None):
        over["approaches"] = tuple(args.approach)
    if args.config:
        return load_config(args.config, args.profile, **over)
    return make_config(args.profile, **over)


def _summary_line(name, seed, report):
    return (f"{name:<9} seed={seed:<4} RLF={report.rlf_rate:.3f} HOF={report.hof_rate:.3f} "
            f"HO={report.ho_success_rate:.2f} fastHO={report.fast_ho_rate:.2f} "
            f"outage={report.total_outage_pct:.2f}% SINR50={report.sinr_median_db:.1f}dB")


def cmd_run(args) -> int:
    cfg = _config(args)
    results = simulate(cfg)
    out = Path(args.out)
    for name in cfg.approaches:
        write_run(results[name], out, cfg)
        print(_summary_line(name, cfg.seed, results[name].report))
    return 0


def cmd_campaign(args) -> int:
    cfg = _config(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(range(cfg.seed, cfg.seed + args.n_seeds))
    res = run_campaign(cfg, cfg.approaches, seeds, workers=args.workers)
    out = Path(args.out)
    for r in res.runs:
        write_run(r, out, with_overrides(cfg, seed=r.seed))
        print(_summary_line(r.approach, r.seed, r.report))
    write_table(res.table, out / "comparison.csv")
    (out / "comparison.json").write_text(json.dumps(res.table, indent=2))
    print(f"comparison table written to {out / 'comparison.csv'}")
    return 0


def cmd_dump_patterns(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = pattern_rows(build_tx_grid(), MpuePanelSet(), args.step)
    with open(out / "patterns.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("side", "id", "rx_beam", "theta_deg", "phi_deg", "gain_db"))
        w.writerows(rows)
    print(f"{len(rows)} pattern samples written to {out / 'patterns.csv'}")
    return 0


def cmd_plot_data(args) -> int:
    """Collect SINR CDFs and KPI bars from run directories into plot-ready CSVs."""
    src = Path(args.runs or args.out)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sinr: dict[str, list] = {}
    reports: dict[str, list] = {}
    for d in sorted(p for p in src.iterdir() if (p / "report.json").exists()):
        rep = json.loads((d / "report.json").read_text())
        a = rep["approach"]
        reports.setdefault(a, []).append(rep)
        vals = np.loadtxt(d / "sinr.csv", delimiter=",", skiprows=1, ndmin=1)
        sinr.setdefault(a, []).append(vals)
    if not reports:
        print(f"no run directories found under {src}", file=sys.stderr)
        return 1
    order = [a for a in APPROACH_NAMES if a in reports]
    probs = np.linspace(0.0, 1.0, 201)
    with open(out / "sinr_cdf.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["cdf"] + order)
        q = {a: np.quantile(np.concatenate(sinr[a]), probs) for a in order}
        for i, p in enumerate(probs):
            w.writerow([f"{p:.3f}"] + [f"{q[a][i]:.3f}" for a in order])
    keys = ("rlf_rate", "hof_rate", "ho_success_rate", "fast_ho_rate", "total_outage_pct")
    with open(out / "kpi_bars.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("approach",) + keys + ("outage_sinr_degradation", "outage_successful_ho", "outage_reestablishment"))
        for a in order:
            rs = reports[a]
            row = [np.mean([r[k] for r in rs]) for k in keys]
            row += [np.mean([r["outage_pct"][c] for r in rs]) for c in ("sinr_degradation", "successful_ho", "reestablishment")]
            w.writerow([a] + [f"{v:.6g}" for v in row])
    print(f"plot data written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with RunConfig fields")
    common.add_argument("--profile", choices=("desk", "full"), default="desk")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default="out")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mpuesim", description="FR2 multi-panel UE mobility simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="one seed, one or more approaches")
    r.add_argument("--approach", choices=APPROACH_NAMES, action="append",
                   help="repeatable; default runs all approaches on a shared channel")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("campaign", parents=[common], help="paired multi-seed comparison")
    c.add_argument("--approach", choices=APPROACH_NAMES, action="append")
    c.add_argument("--seeds", help="comma-separated seeds (overrides --n-seeds)")
    c.add_argument("--n-seeds", type=int, default=5)
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=cmd_campaign)

    d = sub.add_parser("dump-patterns", parents=[common], help="Tx/Rx azimuth pattern cuts as CSV")
    d.add_argument("--step", type=float, default=1.0, help="azimuth step in degrees")
    d.set_defaults(func=cmd_dump_patterns)

    g = sub.add_parser("plot-data", parents=[common], help="SINR CDF and KPI bar data from run outputs")
    g.add_argument("--runs", help="directory holding run outputs (default: --out)")
    g.set_defaults(func=cmd_plot_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        for k, m in e.errors:
            print(f"config error: {k}: {m}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
