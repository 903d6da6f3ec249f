"""Polling policies: reference HCCA round-robin, Enhanced EDD and F-Poll.

A policy is asked at every CAP start for an ordered list of
``(station, grant_us)`` pairs and is told what came back from each poll.
Ordering is always the admission (polling-list) order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .engine import decode_qs
from .qos import (EddStreamState, PhyProfile, ScheduleState, airtime, cap_budget_fraction,
                  edd_update, per_msdu_overhead)


class PollingPolicy:
    name = "base"
    qs_semantics: str | None = None

    def __init__(self, schedule: ScheduleState, phy: PhyProfile):
        self.schedule = schedule
        self.phy = phy
        self.si = schedule.si
        self.order = schedule.polling_order
        self.txop = {s.stream_id: s.txop for s in schedule.streams}

    def on_cap_start(self, now: int) -> list[tuple[int, int]]:
        raise NotImplementedError

    def on_data_received(self, station: int, frame, now: int) -> None:
        pass

    def on_null_received(self, station: int, frame, now: int) -> None:
        pass

    def on_no_response(self, station: int, now: int) -> None:
        pass

    def on_exchange_complete(self, station: int, granted: int, used: int, cap_start: int) -> None:
        pass

    def describe(self, station: int) -> str | None:
        return None


class HccaPolicy(PollingPolicy):
    """Every admitted station, every SI, with its fixed TXOP."""

    name = "hcca"

    def on_cap_start(self, now):
        return self.hcca_poll_set(now)

    def hcca_poll_set(self, now):
        return [(sid, self.txop[sid]) for sid in self.order]


class EnhancedEddPolicy(PollingPolicy):
    """Rate-based TXOPs grown by reported backlog, with per-station early service.

    A station becomes eligible again ``msi_new`` after its last service,
    where ``msi_new`` is its base service interval shortened by the backlog
    clearing time or the unused part of its last grant. The base interval is
    ``min(mSI, SI)`` so the cadence is never slower than the reference.
    Grants are ``max(TXOP_i, txop_avg + TD_i)``; the part above ``TXOP_i``
    is handed out in polling order while the CAP budget lasts.
    """

    name = "edd"
    qs_semantics = "queue"

    def __init__(self, schedule, phy):
        super().__init__(schedule, phy)
        self.state = {sid: EddStreamState() for sid in self.order}
        self.next_service = {sid: 0 for sid in self.order}
        self.base_msi = {s.stream_id: min(s.spec.min_service_interval, self.si) for s in schedule.streams}
        self.spec = {s.stream_id: s.spec for s in schedule.streams}
        self.overhead = per_msdu_overhead(phy)
        self.backlog_bits = {sid: 0 for sid in self.order}
        self.cap_budget = math.floor(self.si * cap_budget_fraction(phy)) if self.si else 0

    def backlog_time(self, station: int, bits: int) -> int:
        """Airtime to clear ``bits`` of backlog, one overhead per nominal MSDU."""
        if bits <= 0:
            return 0
        spec = self.spec[station]
        msdus = -(-bits // (spec.nominal_msdu_size * 8))
        return math.ceil(airtime(bits, spec.min_phy_rate)) + msdus * self.overhead

    def on_cap_start(self, now):
        return self.edd_poll_set(now)

    def edd_poll_set(self, now):
        eligible = [sid for sid in self.order if self.next_service[sid] <= now]
        slot = self.phy.poll_time + self.phy.sifs
        spare = self.cap_budget - sum(slot + self.txop[sid] for sid in eligible)
        out = []
        for sid in eligible:
            base = self.txop[sid]
            extra = max(0, self.state[sid].next_txop - base)
            extra = min(extra, max(0, spare))
            spare -= extra
            out.append((sid, base + extra))
        return out

    def on_data_received(self, station, frame, now):
        self.backlog_bits[station] = frame.queue_bits

    def on_null_received(self, station, frame, now):
        self.backlog_bits[station] = frame.queue_bits

    def on_exchange_complete(self, station, granted, used, cap_start):
        td = self.backlog_time(station, self.backlog_bits[station])
        st = edd_update(self.state[station], td, used, granted, self.base_msi[station])
        self.state[station] = st
        self.next_service[station] = cap_start + st.msi_new

    def describe(self, station):
        st = self.state[station]
        return f"txop_avg={st.txop_avg} td={st.td_backlog} msi_new={st.msi_new}"


class FpollMode(enum.Enum):
    FIRST_CAP = "FIRST_CAP"
    FEEDBACK = "FEEDBACK"
    FALLBACK = "FALLBACK"


@dataclass
class FpollEntry:
    mode: FpollMode = FpollMode.FIRST_CAP
    next_arrival: int | None = None  # absolute us; None = unknown
    arrival_countdown: int = 0  # next_arrival minus the latest CAP start
    post_loss_packets_seen: int = 0

    def due(self, now: int) -> bool:
        if self.mode is not FpollMode.FEEDBACK or self.next_arrival is None:
            return True
        return self.next_arrival <= now


class FpollPolicy(PollingPolicy):
    """Feedback polling: skip a station until its announced next frame exists."""

    name = "fpoll"
    qs_semantics = "arrival"

    def __init__(self, schedule, phy):
        super().__init__(schedule, phy)
        self.entries = {sid: FpollEntry() for sid in self.order}

    def on_cap_start(self, now):
        return self.fpoll_poll_set(now)

    def fpoll_poll_set(self, now):
        out = []
        for sid in self.order:
            entry = self.entries[sid]
            if entry.due(now):
                out.append((sid, self.txop[sid]))
            if entry.next_arrival is not None:
                # residual wait as seen from the next CAP
                entry.arrival_countdown = entry.next_arrival - now - self.si
        return out

    def on_data_received(self, station, frame, now):
        self.fpoll_on_data(station, frame.qs, now)

    def fpoll_on_data(self, station: int, qs_feedback: int, now: int) -> None:
        entry = self.entries[station]
        if entry.mode is FpollMode.FALLBACK:
            entry.post_loss_packets_seen = min(2, entry.post_loss_packets_seen + 1)
            if entry.post_loss_packets_seen < 2:
                return
        entry.mode = FpollMode.FEEDBACK
        entry.next_arrival = decode_qs(qs_feedback, now)
        if entry.next_arrival is not None:
            # pre-deduct the SI that elapses before the next CAP
            entry.arrival_countdown = entry.next_arrival - now - self.si

    def on_null_received(self, station, frame, now):
        self.fpoll_on_no_data(station)

    def on_no_response(self, station, now):
        self.fpoll_on_no_data(station)

    def fpoll_on_no_data(self, station: int) -> None:
        entry = self.entries[station]
        if entry.mode is FpollMode.FIRST_CAP:
            # startup, nothing lost: the first packet's feedback can be trusted
            entry.mode = FpollMode.FALLBACK
            entry.post_loss_packets_seen = 1
        elif entry.mode is FpollMode.FEEDBACK:
            entry.mode = FpollMode.FALLBACK
            entry.post_loss_packets_seen = 0
        entry.next_arrival = None

    def describe(self, station):
        e = self.entries[station]
        if e.mode is FpollMode.FALLBACK:
            return f"FALLBACK seen={e.post_loss_packets_seen}"
        return f"{e.mode.value} next={e.next_arrival}"


POLICIES = {cls.name: cls for cls in (HccaPolicy, EnhancedEddPolicy, FpollPolicy)}


def make_policy(name: str, schedule: ScheduleState, phy: PhyProfile) -> PollingPolicy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown scheduler {name!r}; expected one of {sorted(POLICIES)}") from None
    return cls(schedule, phy)
