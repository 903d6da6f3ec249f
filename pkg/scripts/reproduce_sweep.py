"""Sweep 1..12 stations x {HCCA, EDD, F-Poll} for the three video presets.

    python3 scripts/reproduce_sweep.py [--out results/sweep] [--jobs 4] [--stations 1..12]

Writes one directory per preset (per-cell CSVs, sweep_summary.csv,
plot_data.csv) and prints the mean access delay table.
"""

import argparse
import os
import sys
from pathlib import Path

from hccasim import cli
from hccasim.config import load_config

CONFIGS = Path(__file__).resolve().parent / "configs"
SCHEDULERS = ["hcca", "edd", "fpoll"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(os.environ.get("HCCASIM_OUT", "results"), "sweep"))
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    ap.add_argument("--stations", default="1..12")
    ap.add_argument("--presets", default="formula1,soccer,mrbean")
    args = ap.parse_args(argv)
    counts = cli.parse_counts(args.stations)
    for preset in args.presets.split(","):
        cfg = load_config(CONFIGS / f"{preset}.ini")
        cells = cli.run_sweep(cfg, counts, SCHEDULERS, out_dir=os.path.join(args.out, preset), jobs=args.jobs)
        delay = {(c.scheduler, c.station_count): c.metrics.get("mean_access_delay_ms") for c in cells}
        print(f"\n{preset}: mean access delay (ms)")
        print("  n  " + "".join(f"{s:>10}" for s in SCHEDULERS))
        for n in counts:
            row = "".join(f"{delay[s, n]:>10.3f}" if delay[s, n] is not None else f"{'-':>10}"
                          for s in SCHEDULERS)
            print(f"{n:>3}  {row}")
    print(f"\nresults in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
