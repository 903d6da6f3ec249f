"""Evaluation quantities: access delay, end-to-end delay, poll overhead, throughput.

Per-metric CSV files use fixed decimal formatting so that identical runs
produce byte-identical output.
"""

from __future__ import annotations

import csv
import os
import statistics
from dataclasses import dataclass, field

US_PER_S = 1_000_000


class UndefinedMetricError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class PacketRecord:
    stream: int
    msdu: int
    generated: int  # G_i, us
    sent: int  # S_i: start of the QoS Data transmission
    received: int  # R_i: end of the QoS Data transmission at the AP
    size_bits: int


@dataclass(frozen=True, slots=True)
class PollRecord:
    cap_start: int
    time: int
    station: int
    grant: int
    outcome: str  # data | null | none


@dataclass
class StationCounters:
    polls_sent: int = 0
    nulls_received: int = 0
    data_frames_received: int = 0
    no_response: int = 0
    generated: int = 0
    dropped: int = 0
    queued_at_end: int = 0
    delivered_bits: int = 0

    @property
    def delivered(self) -> int:
        return self.data_frames_received


@dataclass
class MetricsLedger:
    duration: int  # us
    stations: dict[int, StationCounters] = field(default_factory=dict)
    packets: list[PacketRecord] = field(default_factory=list)
    polls: list[PollRecord] = field(default_factory=list)
    traffic_start: int | None = None  # earliest stream start, us

    @property
    def polls_sent(self) -> int:
        return sum(c.polls_sent for c in self.stations.values())

    @property
    def nulls_received(self) -> int:
        return sum(c.nulls_received for c in self.stations.values())

    @property
    def delivered_bits(self) -> int:
        return sum(p.size_bits for p in self.packets)

    def conservation_holds(self) -> bool:
        return all(c.generated == c.delivered + c.queued_at_end + c.dropped for c in self.stations.values())


def mean_access_delay(ledger: MetricsLedger) -> float:
    """Mean of S_i - G_i over every delivered packet of every flow, in us."""
    if not ledger.packets:
        raise UndefinedMetricError("no delivered packets")
    return statistics.fmean(p.sent - p.generated for p in ledger.packets)


def mean_e2e_delay(ledger: MetricsLedger) -> float:
    if not ledger.packets:
        raise UndefinedMetricError("no delivered packets")
    return statistics.fmean(p.received - p.generated for p in ledger.packets)


def poll_overhead_ratio(ledger: MetricsLedger, since: int | None = None) -> float:
    """Null frames received over polls sent; ``since`` keeps CAPs starting at or after it."""
    if since is None:
        polls, nulls = ledger.polls_sent, ledger.nulls_received
    else:
        window = [p for p in ledger.polls if p.cap_start >= since]
        polls = len(window)
        nulls = sum(1 for p in window if p.outcome == "null")
    if polls == 0:
        raise UndefinedMetricError("no polls sent")
    return nulls / polls


def aggregate_throughput(ledger: MetricsLedger) -> float:
    """Delivered payload bits per second of simulated time."""
    if ledger.duration <= 0:
        raise UndefinedMetricError("non-positive simulation duration")
    return ledger.delivered_bits * US_PER_S / ledger.duration


def e2e_delay_series(ledger: MetricsLedger, stream: int) -> list[tuple[int, int]]:
    if stream not in ledger.stations:
        raise KeyError(f"unknown stream {stream}")
    pts = [(p.generated, p.received - p.generated) for p in ledger.packets if p.stream == stream]
    pts.sort()
    return pts


def median_e2e_by_stream(ledger: MetricsLedger) -> dict[int, float]:
    out = {}
    for sid in ledger.stations:
        delays = [d for _, d in e2e_delay_series(ledger, sid)]
        if delays:
            out[sid] = statistics.median(delays)
    return out


def summary(ledger: MetricsLedger) -> dict[str, float]:
    def safe(fn):
        try:
            return fn(ledger)
        except UndefinedMetricError:
            return float("nan")

    start = ledger.traffic_start or 0
    return {
        "mean_access_delay_ms": safe(mean_access_delay) / 1000,
        "mean_e2e_delay_ms": safe(mean_e2e_delay) / 1000,
        "poll_overhead_ratio": safe(poll_overhead_ratio),
        # polls from the first stream start on, leaving out pre-traffic polling
        "poll_overhead_ratio_active": safe(lambda led: poll_overhead_ratio(led, since=start)),
        "aggregate_throughput_bps": safe(aggregate_throughput),
        "polls_sent": float(ledger.polls_sent),
        "nulls_received": float(ledger.nulls_received),
        "packets_delivered": float(len(ledger.packets)),
        "delivered_bits": float(ledger.delivered_bits),
    }


def fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.6f}"


def _write(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_metric_csvs(ledger: MetricsLedger, outdir) -> list[str]:
    """Write one CSV per metric into ``outdir``; return the file names.

    access_delay.csv  stream,msdu,generated_us,sent_us,access_delay_us
    e2e_delay.csv     stream,msdu,generated_us,received_us,e2e_delay_us
    poll_overhead.csv station,polls_sent,nulls_received,data_frames,no_response,ratio
    throughput.csv    station,delivered_bits,throughput_bps
    summary.csv       metric,value
    """
    os.makedirs(outdir, exist_ok=True)
    packets = sorted(ledger.packets, key=lambda p: (p.stream, p.msdu))
    _write(os.path.join(outdir, "access_delay.csv"),
           ("stream", "msdu", "generated_us", "sent_us", "access_delay_us"),
           [(p.stream, p.msdu, p.generated, p.sent, p.sent - p.generated) for p in packets])
    _write(os.path.join(outdir, "e2e_delay.csv"),
           ("stream", "msdu", "generated_us", "received_us", "e2e_delay_us"),
           [(p.stream, p.msdu, p.generated, p.received, p.received - p.generated) for p in packets])
    rows = []
    for sid in sorted(ledger.stations):
        c = ledger.stations[sid]
        ratio = c.nulls_received / c.polls_sent if c.polls_sent else float("nan")
        rows.append((sid, c.polls_sent, c.nulls_received, c.data_frames_received, c.no_response, fmt(ratio)))
    _write(os.path.join(outdir, "poll_overhead.csv"),
           ("station", "polls_sent", "nulls_received", "data_frames", "no_response", "ratio"), rows)
    _write(os.path.join(outdir, "throughput.csv"), ("station", "delivered_bits", "throughput_bps"),
           [(sid, ledger.stations[sid].delivered_bits,
             fmt(ledger.stations[sid].delivered_bits * US_PER_S / ledger.duration))
            for sid in sorted(ledger.stations)])
    _write(os.path.join(outdir, "summary.csv"), ("metric", "value"),
           [(k, fmt(v)) for k, v in summary(ledger).items()])
    return ["access_delay.csv", "e2e_delay.csv", "poll_overhead.csv", "throughput.csv", "summary.csv"]
