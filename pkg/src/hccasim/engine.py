"""Deterministic discrete-event core for HCCA controlled access.

Time is integer microseconds. The event queue carries beacons, CAP starts and
frame generations; a CAP is then played out synchronously as a transcript of
poll / data / Null / ACK exchanges, advancing frame generations up to each
response instant so stations see exactly the frames that exist when polled.
"""

from __future__ import annotations

import csv
import enum
import heapq
import math
from collections import deque
from dataclasses import dataclass, field

from .metrics import MetricsLedger, PacketRecord, PollRecord, StationCounters
from .qos import US_PER_MS, PhyProfile, ScheduleState, TrafficSpec, caps_per_beacon, cap_budget_fraction
from .traces import VideoTrace

QS_ALL_ONES = 0xFFFF
QS_MAX = 0xFFFE

EVENT_LOG_HEADER = ("timestamp_us", "kind", "station", "frame", "bits", "duration_us", "info")


class ScheduleInfeasible(RuntimeError):
    def __init__(self, message: str, timeline: list | None = None):
        super().__init__(message)
        self.timeline = timeline or []


class EventKind(enum.IntEnum):
    # value is the tie-break rank at equal timestamps: frames generated at a
    # CAP boundary are queued before that CAP polls
    BEACON = 0
    FRAME_GENERATED = 1
    CAP_START = 2


@dataclass(order=True, frozen=True)
class SimEvent:
    timestamp: int
    kind: EventKind
    seq: int
    station: int | None = field(default=None, compare=False)


class FrameKind(enum.Enum):
    QOS_POLL = "QosPoll"
    QOS_DATA = "QosData"
    QOS_NULL = "QosNull"
    ACK = "Ack"


@dataclass
class MacFrame:
    kind: FrameKind
    src: int
    dst: int
    payload_bits: int = 0
    qs: int | None = None
    txop_grant: int | None = None
    msdu: int | None = None  # trace index of the carried video frame
    generated: int | None = None
    queue_bits: int = 0  # backlog left behind this frame

    def __post_init__(self):
        if self.kind is FrameKind.QOS_NULL and self.payload_bits:
            raise ValueError("QosNull carries no payload")
        if self.kind is FrameKind.QOS_DATA and (self.payload_bits <= 0 or self.msdu is None):
            raise ValueError("QosData must carry one MSDU")


AP = 0


def frame_duration(frame: MacFrame, phy: PhyProfile) -> int:
    if frame.kind in (FrameKind.QOS_DATA, FrameKind.QOS_NULL):
        return phy.data_frame_time(frame.payload_bits)
    if frame.kind is FrameKind.ACK:
        return phy.ack_time
    return phy.poll_time


def encode_qs(next_arrival: int | None, now: int) -> int:
    """Milliseconds (rounded up, saturating) from ``now`` to the next frame."""
    if next_arrival is None:
        return QS_ALL_ONES
    return min(max(0, math.ceil((next_arrival - now) / US_PER_MS)), QS_MAX)


def decode_qs(qs: int, sent_at: int) -> int | None:
    """Absolute arrival time announced by a QS value.

    The count is taken from the millisecond tick containing the frame start,
    which recovers the announced arrival exactly for whole-ms arrival times.
    """
    if qs == QS_ALL_ONES:
        return None
    return (sent_at // US_PER_MS + qs) * US_PER_MS


class StationModel:
    """One uplink video source: a trace cursor and a FIFO transmit queue."""

    def __init__(self, sid: int, trace: VideoTrace, spec: TrafficSpec, start: int):
        self.id = sid
        self.trace = trace
        self.spec = spec
        self.start = start
        self.arrivals = [start + t * US_PER_MS for t in trace.arrival_times]
        self.sizes = trace.sizes
        self.cursor = 0
        self.queue: deque[tuple[int, int, int]] = deque()  # (msdu index, generated, bits)

    def next_arrival_time(self) -> int | None:
        return self.arrivals[self.cursor] if self.cursor < len(self.arrivals) else None

    def generate(self) -> tuple[int, int, int]:
        item = (self.cursor, self.arrivals[self.cursor], self.sizes[self.cursor])
        self.queue.append(item)
        self.cursor += 1
        return item

    def successor_arrival(self, msdu: int) -> int | None:
        return self.arrivals[msdu + 1] if msdu + 1 < len(self.arrivals) else None

    def queued_bits(self) -> int:
        return sum(bits for _, _, bits in self.queue)


def serve_poll(station: StationModel, grant: int, now: int, phy: PhyProfile, qs_mode: str | None = "arrival") -> list[MacFrame]:
    """Station's answer to a poll, starting at ``now``.

    MSDUs leave oldest-first while each exchange still fits the grant. Every
    QosData carries, in QS, either the time to the next video frame after
    the one it carries (``arrival``) or the remaining queue in bits
    (``queue``). An empty queue, or a head frame too large for the grant,
    yields a single QosNull.
    """
    if grant <= 0:
        raise ValueError("grant must be positive")
    frames = []
    remaining = grant
    t = now
    backlog = station.queued_bits()
    while station.queue:
        msdu, generated, bits = station.queue[0]
        cost = phy.msdu_exchange_time(bits)
        if cost > remaining:
            break
        station.queue.popleft()
        backlog -= bits
        if qs_mode == "arrival":
            qs = encode_qs(station.successor_arrival(msdu), t)
        elif qs_mode == "queue":
            qs = backlog
        else:
            qs = None
        frames.append(MacFrame(FrameKind.QOS_DATA, station.id, AP, bits, qs=qs, msdu=msdu,
                               generated=generated, queue_bits=backlog))
        remaining -= cost
        t += cost
    if not frames:
        frames.append(MacFrame(FrameKind.QOS_NULL, station.id, AP, queue_bits=backlog,
                               qs=backlog if qs_mode == "queue" else None))
    return frames


@dataclass
class StationSetup:
    trace: VideoTrace
    spec: TrafficSpec
    start: int  # us, absolute time of trace t=0


@dataclass
class PollOutcome:
    station: int
    poll_time: int
    grant: int
    outcome: str  # "data" | "null" | "none"
    frames: list = field(default_factory=list)
    used: int = 0


@dataclass
class CapTranscript:
    start: int
    end: int
    polls: list[PollOutcome]


class Simulation:
    """One scenario instance. Single-threaded; build a new one per run."""

    def __init__(self, phy: PhyProfile, schedule: ScheduleState, stations: dict[int, StationSetup],
                 policy, duration: int, drops=frozenset(), event_log: bool = False):
        self.phy = phy
        self.schedule = schedule
        self.policy = policy
        self.duration = duration
        self.drops = set(drops)
        self.stations = {sid: StationModel(sid, s.trace, s.spec, s.start) for sid, s in stations.items()}
        self.order = schedule.polling_order
        if set(self.order) != set(self.stations):
            raise ValueError("admitted streams and configured stations differ")
        self.ledger = MetricsLedger(duration=duration,
                                    stations={sid: StationCounters() for sid in self.order},
                                    traffic_start=min((st.start for st in self.stations.values()), default=None))
        self.log_enabled = event_log
        self.events: list[tuple] = []
        self.transcripts: list[CapTranscript] = []
        self.keep_transcripts = False
        self._heap: list[SimEvent] = []
        self._seq = 0
        si = schedule.si
        self.caps_per_bi = caps_per_beacon(si, phy) if si else 0
        self.cap_budget = math.floor(si * cap_budget_fraction(phy)) if si else 0
        self._qs_mode = getattr(policy, "qs_semantics", None)

    def _push(self, t: int, kind: EventKind, station: int | None = None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, SimEvent(t, kind, self._seq, station))

    def _log(self, t, kind, station="", frame="", bits="", dur="", info=""):
        if self.log_enabled:
            self.events.append((t, kind, station, frame, bits, dur, info))

    def run(self) -> MetricsLedger:
        self._push(0, EventKind.BEACON)
        for sid in self.order:
            st = self.stations[sid]
            t = st.next_arrival_time()
            if t is not None and t < self.duration:
                self._push(t, EventKind.FRAME_GENERATED, sid)
        while self._heap:
            ev = heapq.heappop(self._heap)
            if ev.timestamp >= self.duration:
                break
            self._dispatch(ev)
        self._finish()
        return self.ledger

    def _dispatch(self, ev: SimEvent) -> None:
        if ev.kind is EventKind.BEACON:
            self._log(ev.timestamp, "BEACON")
            nxt = ev.timestamp + self.phy.beacon_interval
            if nxt < self.duration:
                self._push(nxt, EventKind.BEACON)
            for j in range(self.caps_per_bi):
                self._push(ev.timestamp + j * self.phy.beacon_interval // self.caps_per_bi, EventKind.CAP_START)
        elif ev.kind is EventKind.FRAME_GENERATED:
            st = self.stations[ev.station]
            msdu, t, bits = st.generate()
            self.ledger.stations[st.id].generated += 1
            self._log(t, "FRAME_GEN", st.id, "", bits, "", f"msdu={msdu}")
            nxt = st.next_arrival_time()
            if nxt is not None and nxt < self.duration:
                self._push(nxt, EventKind.FRAME_GENERATED, st.id)
        else:
            transcript = self.cap_cycle(ev.timestamp)
            if self.keep_transcripts:
                self.transcripts.append(transcript)

    def _advance_to(self, t: int) -> None:
        while self._heap and self._heap[0].timestamp <= t:
            if self._heap[0].kind is not EventKind.FRAME_GENERATED:
                if self._heap[0].timestamp == t:
                    break
                raise ScheduleInfeasible(
                    f"CAP overran into the next service interval at {self._heap[0].timestamp} us",
                    self.events[-50:])
            self._dispatch(heapq.heappop(self._heap))

    def _tx(self, t: int, frame: MacFrame, dur: int, info: str = "") -> None:
        station = frame.src if frame.src != AP else frame.dst
        self._log(t, "TX", station, frame.kind.value, frame.payload_bits, dur, info)

    def cap_cycle(self, now: int) -> CapTranscript:
        """Run one controlled access phase starting at SI boundary ``now``."""
        phy = self.phy
        polls = self.policy.on_cap_start(now)
        granted = sum(phy.poll_time + phy.sifs + g for _, g in polls)
        if granted > self.cap_budget:
            raise ScheduleInfeasible(
                f"CAP at {now} us grants {granted} us, budget {self.cap_budget} us",
                self.events[-50:])
        if self.log_enabled:
            self._log(now, "CAP_START", "", "", "", "", " ".join(str(s) for s, _ in polls))
        t = now
        outcomes = []
        ledger = self.ledger
        log = self.log_enabled
        for sid, grant in polls:
            st = self.stations[sid]
            counters = ledger.stations[sid]
            if log:
                self._tx(t, MacFrame(FrameKind.QOS_POLL, AP, sid, txop_grant=grant), phy.poll_time, f"grant={grant}")
            counters.polls_sent += 1
            result = PollOutcome(sid, t, grant, "none")
            t += phy.poll_time + phy.sifs
            self._advance_to(t)
            frames = serve_poll(st, grant, t, phy, self._qs_mode)
            for i, frame in enumerate(frames):
                dur = frame_duration(frame, phy)
                if frame.kind is FrameKind.QOS_NULL:
                    if log:
                        self._tx(t, frame, dur, f"queue={frame.queue_bits}")
                    counters.nulls_received += 1
                    result.outcome = "null"
                    self.policy.on_null_received(sid, frame, t)
                    t += dur + phy.sifs
                    if log:
                        self._tx(t, MacFrame(FrameKind.ACK, AP, sid), phy.ack_time)
                    t += phy.ack_time + phy.sifs
                    continue
                if (sid, frame.msdu) in self.drops:
                    self._tx(t, frame, dur, f"msdu={frame.msdu} qs={frame.qs}")
                    self._log(t + dur, "DROP", sid, frame.kind.value, frame.payload_bits, "", f"msdu={frame.msdu}")
                    counters.dropped += 1
                    t += dur + phy.pifs
                    self._log(t, "POLL_TIMEOUT", sid)
                    # no ACK, no retransmission: unsent MSDUs go back to the queue head
                    for rest in reversed(frames[i + 1:]):
                        st.queue.appendleft((rest.msdu, rest.generated, rest.payload_bits))
                    break
                if log:
                    self._tx(t, frame, dur, f"msdu={frame.msdu} qs={frame.qs}")
                ledger.packets.append(PacketRecord(sid, frame.msdu, frame.generated, t, t + dur, frame.payload_bits))
                counters.data_frames_received += 1
                counters.delivered_bits += frame.payload_bits
                result.outcome = "data"
                result.used += phy.msdu_exchange_time(frame.payload_bits)
                self.policy.on_data_received(sid, frame, t)
                t += dur + phy.sifs
                if log:
                    self._tx(t, MacFrame(FrameKind.ACK, AP, sid), phy.ack_time)
                t += phy.ack_time + phy.sifs
            if result.outcome == "none":
                counters.no_response += 1
                self.policy.on_no_response(sid, t)
            self.policy.on_exchange_complete(sid, grant, result.used, now)
            ledger.polls.append(PollRecord(now, result.poll_time, sid, grant, result.outcome))
            if log:
                state = self.policy.describe(sid)
                if state:
                    self._log(t, "STATE", sid, "", "", "", state)
            result.frames = frames
            outcomes.append(result)
        self._log(t, "CAP_END", "", "", "", "", f"length={t - now}")
        return CapTranscript(now, t, outcomes)

    def _finish(self) -> None:
        for sid, st in self.stations.items():
            self.ledger.stations[sid].queued_at_end = len(st.queue)


def write_event_log(events, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_LOG_HEADER)
        w.writerows(events)
