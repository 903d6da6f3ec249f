"""Command line: single runs, station-count sweeps and plot-data emission.

    hccasim run scenario.ini [--seed N] [--out DIR] [--event-log]
    hccasim sweep scenario.ini --stations 1..20 --schedulers hcca,edd,fpoll [--jobs N]

Exit codes: 0 success, 3 config error, 4 admission rejected, 5 runtime fault.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import metrics
from .config import (AdmissionError, ConfigError, ScenarioConfig, default_output_dir, load_config,
                     run_scenario, with_station_count)
from .engine import ScheduleInfeasible, write_event_log
from .policies import POLICIES

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_ADMISSION = 4
EXIT_RUNTIME = 5

log = logging.getLogger("hccasim")

PLOT_METRICS = ("mean_access_delay_ms", "mean_e2e_delay_ms", "poll_overhead_ratio",
                "poll_overhead_ratio_active", "aggregate_throughput_bps", "polls_sent", "packets_delivered")

SUMMARY_COLUMNS = ("mean_access_delay_ms", "aggregate_throughput_bps", "poll_overhead_ratio",
                   "poll_overhead_ratio_active")


@dataclass
class SweepCell:
    scenario: str
    scheduler: str
    station_count: int
    status: str  # ok | admission | infeasible
    metrics: dict = field(default_factory=dict)
    error: str = ""

    @property
    def cell_dir(self) -> str:
        return f"{self.scheduler}_n{self.station_count:02d}"


def parse_counts(text: str) -> list[int]:
    """``1..20``, ``1,2,6`` or a mix such as ``1..4,8``."""
    counts = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            counts.extend(range(int(lo), int(hi) + 1))
        elif part:
            counts.append(int(part))
    if not counts or min(counts) < 0:
        raise ValueError(f"bad station count list {text!r}")
    return counts


def _run_cell(args) -> tuple[SweepCell, object]:
    config, n, scheduler, out_dir = args
    cfg = dataclasses.replace(with_station_count(config, n), scheduler=scheduler)
    cell = SweepCell(config.name, scheduler, n, "ok")
    try:
        ledger, sim = run_scenario(cfg, event_log=cfg.event_log)
    except AdmissionError as exc:
        cell.status, cell.error = "admission", str(exc)
        return cell, None
    except ScheduleInfeasible as exc:
        cell.status, cell.error = "infeasible", str(exc)
        return cell, None
    cell.metrics = metrics.summary(ledger)
    if out_dir is not None:
        d = os.path.join(out_dir, cell.cell_dir)
        metrics.write_metric_csvs(ledger, d)
        if cfg.event_log:
            write_event_log(sim.events, os.path.join(d, "events.csv"))
    return cell, ledger


def run_sweep(config: ScenarioConfig, station_counts, schedulers, out_dir=None, jobs: int = 1,
              keep_ledgers: bool = False):
    """Run every (station count, scheduler) cell as an independent simulation.

    Admission or schedule failures are recorded on the cell. Cells come back
    in (scheduler, station_count) order whatever the execution order. With
    ``keep_ledgers`` the return value is ``(cells, ledgers)``.
    """
    for s in schedulers:
        if s not in POLICIES:
            raise ConfigError(f"unknown scheduler {s!r}")
    tasks = [(config, n, s, out_dir) for s in schedulers for n in station_counts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, tasks))
    else:
        results = [_run_cell(t) for t in tasks]
    order = sorted(range(len(results)), key=lambda i: (results[i][0].scheduler, results[i][0].station_count))
    cells = [results[i][0] for i in order]
    if out_dir is not None:
        write_sweep_summary(cells, os.path.join(out_dir, "sweep_summary.csv"))
        emit_plot_data(cells, os.path.join(out_dir, "plot_data.csv"))
    if keep_ledgers:
        return cells, {(results[i][0].scheduler, results[i][0].station_count): results[i][1] for i in order}
    return cells


def write_sweep_summary(cells, path) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "scheduler", "station_count", "status", *SUMMARY_COLUMNS))
        for c in cells:
            m = c.metrics
            w.writerow((c.scenario, c.scheduler, c.station_count, c.status,
                        *(metrics.fmt(m[k]) if k in m else "" for k in SUMMARY_COLUMNS)))


def emit_plot_data(cells, path) -> int:
    """Long-format rows ``scenario,scheduler,station_count,metric,value``.

    Rows are sorted by metric, scheduler, then station count. Returns the
    number of data rows written.
    """
    rows = []
    for c in cells:
        if c.status != "ok":
            continue
        for m in PLOT_METRICS:
            rows.append((m, c.scheduler, c.station_count, c.scenario, c.metrics[m]))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "scheduler", "station_count", "metric", "value"))
        for m, sched, n, scen, v in rows:
            w.writerow((scen, sched, n, m, metrics.fmt(v)))
    return len(rows)


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.event_log:
        changes["event_log"] = True
    return dataclasses.replace(config, **changes) if changes else config


def cmd_run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = args.out or config.output_dir or default_output_dir()
    ledger, sim = run_scenario(config)
    metrics.write_metric_csvs(ledger, out)
    if config.event_log:
        write_event_log(sim.events, os.path.join(out, "events.csv"))
    for k, v in metrics.summary(ledger).items():
        print(f"{k:28s} {metrics.fmt(v)}")
    print(f"results written to {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = args.out or config.output_dir or default_output_dir()
    schedulers = [s.strip() for s in args.schedulers.split(",") if s.strip()]
    cells = run_sweep(config, parse_counts(args.stations), schedulers, out_dir=out, jobs=args.jobs)
    print(f"{'scheduler':10s} {'n':>3s} {'status':10s} {'access_ms':>10s} {'thrp_bps':>12s} {'overhead':>9s} "
          f"{'active':>7s}")
    for c in cells:
        m = c.metrics
        if c.status == "ok":
            print(f"{c.scheduler:10s} {c.station_count:3d} {c.status:10s} {m['mean_access_delay_ms']:10.3f} "
                  f"{m['aggregate_throughput_bps']:12.1f} {m['poll_overhead_ratio']:9.4f} "
                  f"{m['poll_overhead_ratio_active']:7.4f}")
        else:
            print(f"{c.scheduler:10s} {c.station_count:3d} {c.status:10s} {c.error}")
    print(f"results written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hccasim", description="HCCA polling scheduler simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="scenario INI file")
        sp.add_argument("--seed", type=int, help="override the scenario seed")
        sp.add_argument("--out", help="output directory (default: $HCCASIM_OUT or ./results)")
        sp.add_argument("--event-log", action="store_true", help="also write events.csv")
        sp.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run one scenario")
    common(run)
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="sweep station counts and schedulers")
    common(sweep)
    sweep.add_argument("--stations", default="1..20", help="counts, e.g. 1..20 or 1,6,12")
    sweep.add_argument("--schedulers", default="hcca,edd,fpoll")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweep.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AdmissionError as exc:
        print(f"admission rejected: {exc}", file=sys.stderr)
        return EXIT_ADMISSION
    except ScheduleInfeasible as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        for line in exc.timeline[-10:]:
            print("  ", line, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
