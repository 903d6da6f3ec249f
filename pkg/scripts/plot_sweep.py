"""Plot a sweep's plot_data.csv: one panel per metric, one line per scheduler.

    python3 scripts/plot_sweep.py results/sweep/formula1/plot_data.csv [-o fig.png]

Needs matplotlib (``pip install -e .[plot]``).
"""

import argparse
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PANELS = ("mean_access_delay_ms", "mean_e2e_delay_ms", "aggregate_throughput_bps", "poll_overhead_ratio_active")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("plot_data")
    ap.add_argument("-o", "--output")
    args = ap.parse_args(argv)
    series = defaultdict(list)
    with open(args.plot_data, newline="") as fh:
        for row in csv.DictReader(fh):
            series[row["metric"], row["scheduler"]].append((int(row["station_count"]), float(row["value"])))
    fig, axes = plt.subplots(1, len(PANELS), figsize=(4 * len(PANELS), 3.4))
    for ax, metric in zip(axes, PANELS):
        for (m, sched), pts in sorted(series.items()):
            if m == metric:
                xs, ys = zip(*sorted(pts))
                ax.plot(xs, ys, marker="o", ms=3, label=sched)
        ax.set_xlabel("stations")
        ax.set_title(metric, fontsize=9)
    axes[0].legend()
    fig.tight_layout()
    out = args.output or args.plot_data.replace(".csv", ".png")
    fig.savefig(out, dpi=120)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
