"""VBR video traces: parsing, serialization, statistics and synthesis.

A trace is an ordered list of encoded video frames. Arrival times are integer
milliseconds from stream start and sizes are in bits, matching the
``<time_ms> <type> <size_bits>`` text format of public H.263 trace libraries.
"""

from __future__ import annotations

import enum
import io
import math
import random
import statistics
from dataclasses import dataclass, field
from typing import TextIO

REFERENCE_FRAME_PERIOD_MS = 40


class TraceParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TraceValidationError(ValueError):
    pass


class FrameType(enum.Enum):
    I = "I"
    P = "P"
    PB = "PB"
    B = "B"
    OTHER = "OTHER"

    @classmethod
    def from_token(cls, token: str) -> FrameType | None:
        try:
            return cls(token.upper())
        except ValueError:
            return None


@dataclass(frozen=True)
class FrameRecord:
    arrival_time: int  # ms since stream start
    frame_type: FrameType
    size_bits: int

    def __post_init__(self):
        if self.arrival_time < 0:
            raise TraceValidationError(f"negative arrival time {self.arrival_time}")
        if self.size_bits <= 0:
            raise TraceValidationError(f"non-positive frame size {self.size_bits}")


@dataclass(frozen=True)
class VideoTrace:
    records: tuple[FrameRecord, ...]
    source_label: str = ""
    unknown_type_count: int = field(default=0, compare=False)

    def __post_init__(self):
        if not self.records:
            raise TraceValidationError("empty trace")
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.arrival_time <= prev.arrival_time:
                raise TraceValidationError(
                    f"arrival times not strictly increasing: {prev.arrival_time} then {cur.arrival_time}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def arrival_times(self) -> list[int]:
        return [r.arrival_time for r in self.records]

    @property
    def sizes(self) -> list[int]:
        return [r.size_bits for r in self.records]


@dataclass(frozen=True)
class TraceStats:
    mean_size_bytes: float
    max_size_bytes: float
    mean_bit_rate: float
    peak_bit_rate: float
    cov_bit_rate: float


def parse_trace(stream: TextIO | str, source_label: str = "") -> VideoTrace:
    """Read a trace from a text stream (or a string holding the file contents).

    Unknown frame-type tokens are accepted as ``FrameType.OTHER``; how many
    were seen is kept in ``VideoTrace.unknown_type_count``.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    records = []
    unknown = 0
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 3:
            raise TraceParseError(lineno, f"expected 3 fields, got {len(parts)}: {text!r}")
        time_tok, type_tok, size_tok = parts
        try:
            arrival = int(time_tok)
            size = int(size_tok)
        except ValueError:
            raise TraceParseError(lineno, f"non-numeric time or size: {text!r}") from None
        ftype = FrameType.from_token(type_tok)
        if ftype is None:
            ftype = FrameType.OTHER
            unknown += 1
        try:
            records.append(FrameRecord(arrival, ftype, size))
        except TraceValidationError as exc:
            raise TraceParseError(lineno, str(exc)) from None
    return VideoTrace(tuple(records), source_label, unknown_type_count=unknown)


def read_trace(path) -> VideoTrace:
    with open(path, encoding="utf-8") as fh:
        return parse_trace(fh, source_label=str(path))


def serialize_trace(trace: VideoTrace) -> str:
    lines = []
    if trace.source_label:
        lines.append(f"# {trace.source_label}")
    lines.extend(f"{r.arrival_time} {r.frame_type.value} {r.size_bits}" for r in trace.records)
    return "\n".join(lines) + "\n"


def write_trace(trace: VideoTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_trace(trace))


def compute_stats(trace: VideoTrace, reference_frame_period: int = REFERENCE_FRAME_PERIOD_MS) -> TraceStats:
    """Frame and bit-rate statistics.

    The trace duration is the last arrival plus the mean inter-arrival gap.
    Peak rate is the largest number of bits falling in one reference frame
    period, divided by that period. CoV is taken over per-second bit totals.
    """
    if reference_frame_period <= 0:
        raise ValueError("reference_frame_period must be positive")
    if len(trace) < 2:
        raise TraceValidationError("need at least two frames to define a trace duration")
    times = trace.arrival_times
    sizes = trace.sizes
    mean_gap = (times[-1] - times[0]) / (len(times) - 1)
    duration_ms = times[-1] + mean_gap
    total_bits = sum(sizes)

    per_period: dict[int, int] = {}
    per_second: dict[int, int] = {}
    for t, s in zip(times, sizes):
        per_period[t // reference_frame_period] = per_period.get(t // reference_frame_period, 0) + s
        per_second[t // 1000] = per_second.get(t // 1000, 0) + s
    n_seconds = max(1, math.ceil(duration_ms / 1000))
    second_totals = [per_second.get(k, 0) for k in range(n_seconds)]
    mean_sec = statistics.fmean(second_totals)
    cov = statistics.pstdev(second_totals) / mean_sec if mean_sec > 0 else 0.0

    return TraceStats(
        mean_size_bytes=statistics.fmean(sizes) / 8,
        max_size_bytes=max(sizes) / 8,
        mean_bit_rate=total_bits * 1000 / duration_ms,
        peak_bit_rate=max(per_period.values()) * 1000 / reference_frame_period,
        cov_bit_rate=cov,
    )


@dataclass(frozen=True)
class Jitter:
    """Distribution spec, written as ``none``, ``geometric``, ``exp`` or ``uniform:<w>``."""

    kind: str = "none"
    width: float = 0.0

    @classmethod
    def parse(cls, text: str) -> Jitter:
        text = text.strip().lower()
        if text in ("none", "geometric", "exp"):
            return cls(text)
        if text.startswith("uniform:"):
            try:
                width = float(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad uniform jitter width in {text!r}") from None
            if not 0 <= width <= 1:
                raise ValueError(f"uniform jitter width must be in [0, 1], got {width}")
            return cls("uniform", width)
        raise ValueError(f"unknown jitter spec {text!r}")

    def __str__(self) -> str:
        return f"uniform:{self.width:g}" if self.kind == "uniform" else self.kind


def _stochastic_round(x: float, rng: random.Random) -> int:
    base = math.floor(x)
    return base + (1 if rng.random() < x - base else 0)


def synthesize_trace(
    seed: int,
    mean_interarrival: int,
    interarrival_jitter: Jitter | str,
    mean_size_bits: int,
    size_jitter: Jitter | str,
    duration: int,
    *,
    max_size_bits: int | None = None,
    reference_frame_period: int = REFERENCE_FRAME_PERIOD_MS,
) -> VideoTrace:
    """Generate a seeded H.263-like trace covering ``[0, duration)`` ms.

    Inter-arrival gaps are whole reference periods, mimicking encoder frame
    skipping. ``geometric`` gaps are drawn as a random composition of the
    period budget so the realized mean gap equals the requested one up to
    rounding; ``uniform:w`` draws gaps in ``mean*(1±w)`` and stochastically
    rounds them to whole periods. ``exp`` sizes are exponential; all sizes
    are clamped to ``[1, max_size_bits]``.
    """
    if isinstance(interarrival_jitter, str):
        interarrival_jitter = Jitter.parse(interarrival_jitter)
    if isinstance(size_jitter, str):
        size_jitter = Jitter.parse(size_jitter)
    if mean_interarrival < reference_frame_period or reference_frame_period <= 0:
        raise TraceValidationError("mean inter-arrival must be at least one reference period")
    if mean_size_bits <= 0 or duration <= 0:
        raise TraceValidationError("mean size and duration must be positive")
    if max_size_bits is not None and max_size_bits < mean_size_bits:
        raise TraceValidationError("max size below mean size")

    rng = random.Random(seed)
    periods_total = duration // reference_frame_period
    if periods_total < 1:
        raise TraceValidationError("duration shorter than one reference period")
    ratio = mean_interarrival / reference_frame_period

    if interarrival_jitter.kind == "none":
        if mean_interarrival % reference_frame_period:
            raise TraceValidationError("periodic trace needs mean inter-arrival a multiple of the reference period")
        step = mean_interarrival // reference_frame_period
        slots = list(range(0, periods_total, step))
    elif interarrival_jitter.kind in ("geometric", "exp"):
        n = max(1, round(periods_total / ratio))
        slots = [0] + sorted(rng.sample(range(1, periods_total), n - 1)) if n > 1 else [0]
    else:
        w = interarrival_jitter.width
        slots = [0]
        while True:
            gap = _stochastic_round(ratio * (1 + w * (2 * rng.random() - 1)), rng)
            nxt = slots[-1] + max(1, gap)
            if nxt >= periods_total:
                break
            slots.append(nxt)

    records = []
    for slot in slots:
        if size_jitter.kind == "none":
            size = mean_size_bits
        elif size_jitter.kind in ("exp", "geometric"):
            size = round(rng.expovariate(1 / mean_size_bits))
        else:
            w = size_jitter.width
            size = round(mean_size_bits * (1 + w * (2 * rng.random() - 1)))
        size = max(1, size)
        if max_size_bits is not None:
            size = min(size, max_size_bits)
        records.append(FrameRecord(slot * reference_frame_period, FrameType.P if slot else FrameType.I, size))
    label = f"synthetic seed={seed} mean={mean_interarrival}ms jitter={interarrival_jitter} size={mean_size_bits}b/{size_jitter}"
    return VideoTrace(tuple(records), label)

