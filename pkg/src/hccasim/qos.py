"""TSPEC model, reference-scheduler arithmetic and admission control.

All durations are integer microseconds. Airtimes are computed exactly with
``Fraction`` and rounded up to a whole microsecond once per transmitted frame,
so a grant built from these helpers always fits the frames it was sized for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from fractions import Fraction

US_PER_S = 1_000_000
US_PER_MS = 1_000


def ceil_us(x: Fraction | int) -> int:
    return math.ceil(x)


def airtime(bits: int, rate: int) -> Fraction:
    """Exact time in microseconds to send ``bits`` at ``rate`` bit/s."""
    return Fraction(bits * US_PER_S, rate)


@dataclass(frozen=True)
class TrafficSpec:
    mean_data_rate: int  # bit/s
    nominal_msdu_size: int  # bytes
    max_msdu_size: int  # bytes
    delay_bound: int  # us
    min_service_interval: int  # us
    max_service_interval: int  # us
    min_phy_rate: int  # bit/s

    def __post_init__(self):
        if not self.max_msdu_size >= self.nominal_msdu_size > 0:
            raise ValueError("TSPEC needs max MSDU size >= nominal MSDU size > 0")
        if self.mean_data_rate <= 0 or self.min_phy_rate <= 0:
            raise ValueError("TSPEC rates must be positive")
        if not self.max_service_interval >= self.min_service_interval > 0:
            raise ValueError("TSPEC needs max service interval >= min service interval > 0")
        if self.delay_bound <= 0:
            raise ValueError("TSPEC delay bound must be positive")


@dataclass(frozen=True)
class PhyProfile:
    """802.11g/e timing. Defaults are the evaluation setup's values."""

    sifs: int = 10
    pifs: int = 30
    slot_time: int = 20
    preamble_bits: int = 144
    plcp_header_bits: int = 48
    plcp_rate: int = 1_000_000
    mac_header_bytes: int = 36
    data_rate: int = 54_000_000
    basic_rate: int = 6_000_000
    beacon_interval: int = 200_000
    contention_budget: int = 0
    ack_body_bytes: int = 14
    poll_body_bytes: int = 36

    def __post_init__(self):
        for name in ("sifs", "pifs", "slot_time", "preamble_bits", "plcp_header_bits", "plcp_rate",
                     "mac_header_bytes", "data_rate", "basic_rate", "beacon_interval",
                     "ack_body_bytes", "poll_body_bytes"):
            if getattr(self, name) <= 0:
                raise ValueError(f"PHY parameter {name} must be positive")
        if not 0 <= self.contention_budget < self.beacon_interval:
            raise ValueError("contention budget must satisfy 0 <= T_CP < T")

    @property
    def superframe(self) -> int:
        return self.beacon_interval

    @property
    def plcp_time(self) -> Fraction:
        return airtime(self.preamble_bits + self.plcp_header_bits, self.plcp_rate)

    def _framed_time(self, body_bits: int, rate: int) -> int:
        # ceil(plcp + body/rate) in integer arithmetic; hot path of the engine
        plcp_bits = self.preamble_bits + self.plcp_header_bits
        num = (plcp_bits * rate + body_bits * self.plcp_rate) * US_PER_S
        return -(-num // (self.plcp_rate * rate))

    def data_frame_time(self, payload_bits: int) -> int:
        """QoS Data / QoS Null airtime at the data rate."""
        return self._framed_time(self.mac_header_bytes * 8 + payload_bits, self.data_rate)

    def control_frame_time(self, body_bits: int) -> int:
        """Poll / ACK airtime at the basic rate."""
        return self._framed_time(body_bits, self.basic_rate)

    @cached_property
    def ack_time(self) -> int:
        return self.control_frame_time(self.ack_body_bytes * 8)

    @cached_property
    def poll_time(self) -> int:
        return self.control_frame_time(self.poll_body_bytes * 8)

    def msdu_exchange_time(self, payload_bits: int) -> int:
        """Data + SIFS + ACK + SIFS: the grant consumed by one MSDU."""
        return self.data_frame_time(payload_bits) + self.sifs + self.ack_time + self.sifs


def per_msdu_overhead(phy: PhyProfile) -> int:
    """O: PLCP + MAC header, SIFS, ACK, SIFS (each frame rounded up to 1 us).

    The poll frame is charged per poll by the engine, not folded in here.
    """
    return phy.msdu_exchange_time(0)


def compute_si(specs, phy: PhyProfile) -> int:
    """SI = BI / ceil(BI / MSI_min), floored to a whole microsecond."""
    specs = list(specs)
    if not specs:
        raise ValueError("compute_si needs at least one TSPEC")
    msi_min = min(s.max_service_interval for s in specs)
    k = -(-phy.beacon_interval // msi_min)
    return phy.beacon_interval // k


def caps_per_beacon(si: int, phy: PhyProfile) -> int:
    return round(phy.beacon_interval / si)


def compute_packet_count(si: int, spec: TrafficSpec) -> int:
    if si <= 0:
        raise ValueError("service interval must be positive")
    return math.ceil(Fraction(si * spec.mean_data_rate, US_PER_S * spec.nominal_msdu_size * 8))


def compute_txop(n: int, spec: TrafficSpec, overhead: int) -> int:
    """TXOP = max(N*L/R + O, M/R + O), sizes converted from bytes to bits."""
    if n < 1 or overhead < 0:
        raise ValueError("need n >= 1 and overhead >= 0")
    r = spec.min_phy_rate
    nominal = ceil_us(airtime(n * spec.nominal_msdu_size * 8, r))
    maximal = ceil_us(airtime(spec.max_msdu_size * 8, r))
    return max(nominal, maximal) + overhead


@dataclass(frozen=True)
class AdmittedStream:
    stream_id: int
    spec: TrafficSpec
    n: int
    txop: int


@dataclass(frozen=True)
class ScheduleState:
    streams: tuple[AdmittedStream, ...] = ()
    si: int | None = None

    @property
    def polling_order(self) -> list[int]:
        return [s.stream_id for s in self.streams]

    def txop_of(self, stream_id: int) -> int:
        for s in self.streams:
            if s.stream_id == stream_id:
                return s.txop
        raise KeyError(stream_id)

    def load(self) -> Fraction:
        if self.si is None:
            return Fraction(0)
        return Fraction(sum(s.txop for s in self.streams), self.si)


@dataclass(frozen=True)
class AdmissionResult:
    accepted: bool
    state: ScheduleState
    load: Fraction  # sum of (TXOP_i + poll + SIFS) / SI including the candidate
    budget: Fraction  # (T - T_CP) / T

    def __bool__(self) -> bool:
        return self.accepted


def cap_budget_fraction(phy: PhyProfile) -> Fraction:
    return Fraction(phy.superframe - phy.contention_budget, phy.superframe)


def admit(state: ScheduleState, candidate: TrafficSpec, phy: PhyProfile, stream_id: int | None = None) -> AdmissionResult:
    """Admission control unit.

    Recomputes SI over all streams including the candidate, re-derives every
    stream's N and TXOP at that SI, and accepts iff the summed share fits the
    controlled-access budget. Each stream is charged its TXOP plus the poll
    that opens it, so an admitted set always fits its CAP. A rejection
    returns the untouched state.
    """
    if stream_id is None:
        stream_id = max((s.stream_id for s in state.streams), default=0) + 1
    if any(s.stream_id == stream_id for s in state.streams):
        raise ValueError(f"stream {stream_id} already admitted")
    specs = [s.spec for s in state.streams] + [candidate]
    ids = [s.stream_id for s in state.streams] + [stream_id]
    si = compute_si(specs, phy)
    overhead = per_msdu_overhead(phy)
    streams = []
    for sid, spec in zip(ids, specs):
        n = compute_packet_count(si, spec)
        streams.append(AdmittedStream(sid, spec, n, compute_txop(n, spec, overhead)))
    load = Fraction(sum(s.txop + phy.poll_time + phy.sifs for s in streams), si)
    budget = cap_budget_fraction(phy)
    if load <= budget:
        return AdmissionResult(True, ScheduleState(tuple(streams), si), load, budget)
    return AdmissionResult(False, state, load, budget)


@dataclass(frozen=True)
class EddStreamState:
    txop_avg: int = 0
    td_backlog: int = 0
    td_cur: int = 0
    td_free: int = 0
    msi_new: int = 0
    demand_total: int = field(default=0, repr=False)
    served_sis: int = 0

    @property
    def next_txop(self) -> int:
        return self.txop_avg + self.td_backlog


def edd_update(stream: EddStreamState, queue_feedback: int, used_txop: int, granted_txop: int, msi: int) -> EddStreamState:
    """Fold one served SI into the Enhanced EDD per-stream state.

    ``queue_feedback`` is the airtime needed to clear the reported backlog.
    A backlog advances the next service by that amount; otherwise an
    underused grant advances it by the unused part. The advance is always
    taken from the base ``msi``, never from a previous advanced value.
    """
    if used_txop > granted_txop:
        raise ValueError("used TXOP exceeds granted TXOP")
    queue_feedback = max(0, queue_feedback)
    td_free = granted_txop - used_txop
    if queue_feedback > 0:
        msi_new = msi - queue_feedback
    elif td_free > 0:
        msi_new = msi - td_free
    else:
        msi_new = msi
    demand_total = stream.demand_total + used_txop + queue_feedback
    served = stream.served_sis + 1
    return replace(
        stream,
        txop_avg=math.ceil(Fraction(demand_total, served)),
        td_backlog=queue_feedback,
        td_cur=queue_feedback,
        td_free=td_free,
        msi_new=max(0, msi_new),
        demand_total=demand_total,
        served_sis=served,
    )
