import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import F1, PHY, make_sim, trace_of
from hccasim.engine import (AP, QS_ALL_ONES, QS_MAX, EventKind, FrameKind, MacFrame, ScheduleInfeasible,
                            SimEvent, StationModel, decode_qs, encode_qs, frame_duration, serve_poll)
from hccasim.policies import HccaPolicy
from hccasim.engine import Simulation
from hccasim.policies import make_policy
from hccasim.qos import ScheduleState


def exact_us(bits, rate):
    return Fraction(bits * 10**6, rate)


def test_frame_durations():
    null = MacFrame(FrameKind.QOS_NULL, 1, AP)
    ack = MacFrame(FrameKind.ACK, AP, 1)
    data = MacFrame(FrameKind.QOS_DATA, 1, AP, 4152, msdu=0)
    poll = MacFrame(FrameKind.QOS_POLL, AP, 1, txop_grant=1000)
    # 192 + 288/54e6 = 197.3; 192 + 112/6e6 = 210.7; 192 + 4440/54e6 = 274.2; each rounded up on air
    assert frame_duration(null, PHY) == math.ceil(192 + exact_us(288, 54_000_000)) == 198
    assert frame_duration(ack, PHY) == math.ceil(192 + exact_us(112, 6_000_000)) == 211
    assert frame_duration(data, PHY) == math.ceil(192 + exact_us(4440, 54_000_000)) == 275
    assert frame_duration(poll, PHY) == math.ceil(192 + exact_us(288, 6_000_000)) == 240


def test_frame_invariants():
    with pytest.raises(ValueError):
        MacFrame(FrameKind.QOS_NULL, 1, AP, payload_bits=8)
    with pytest.raises(ValueError):
        MacFrame(FrameKind.QOS_DATA, 1, AP, 0, msdu=0)


def test_event_order_tie_break():
    a = SimEvent(100, EventKind.CAP_START, 1)
    b = SimEvent(100, EventKind.FRAME_GENERATED, 2)
    c = SimEvent(100, EventKind.BEACON, 3)
    assert sorted([a, b, c]) == [c, b, a]
    assert SimEvent(99, EventKind.CAP_START, 9) < c


def test_qs_encoding():
    assert encode_qs(None, 0) == QS_ALL_ONES
    assert encode_qs(40_000, 0) == 40
    assert encode_qs(40_001, 0) == 41
    assert encode_qs(10, 500) == 0
    assert encode_qs(10**12, 0) == QS_MAX
    assert decode_qs(QS_ALL_ONES, 123) is None


@given(now=st.integers(0, 10**9), ahead_ms=st.integers(0, QS_MAX))
def test_qs_round_trip_on_ms_grid(now, ahead_ms):
    arrival = (math.ceil(now / 1000) + ahead_ms) * 1000
    qs = encode_qs(arrival, now)
    if qs < QS_MAX:
        assert decode_qs(qs, now) == arrival


def station(times_ms, size=4152, start_ms=0):
    return StationModel(1, trace_of(times_ms, size), F1, start_ms * 1000)


def test_serve_poll_empty_queue():
    frames = serve_poll(station([0, 40]), 1145, 0, PHY)
    assert [f.kind for f in frames] == [FrameKind.QOS_NULL]


def test_serve_poll_single_frame_carries_next_arrival():
    st_ = station([0, 360, 400], size=[12539, 3981, 1427])
    st_.generate()
    st_.queue.clear()
    st_.generate()  # the 3981-bit frame at 360 ms
    frames = serve_poll(st_, 10_000, 361_000, PHY)
    assert len(frames) == 1
    f = frames[0]
    assert f.kind is FrameKind.QOS_DATA and f.payload_bits == 3981
    assert decode_qs(f.qs, 361_000) == 400_000


def test_serve_poll_grant_fits_first_only():
    st_ = station([0, 40, 80])
    st_.generate()
    st_.generate()
    grant = PHY.msdu_exchange_time(4152) + 10
    frames = serve_poll(st_, grant, 50_000, PHY)
    assert len(frames) == 1 and frames[0].msdu == 0
    assert list(st_.queue) == [(1, 40_000, 4152)]


def test_serve_poll_queue_semantics():
    st_ = station([0, 40, 80], size=[1000, 2000, 3000])
    for _ in range(3):
        st_.generate()
    frames = serve_poll(st_, 100_000, 0, PHY, qs_mode="queue")
    assert [f.qs for f in frames] == [5000, 3000, 0]


def test_serve_poll_oversized_head_gives_null():
    st_ = station([0], size=60_000)
    st_.generate()
    frames = serve_poll(st_, 1145, 0, PHY)
    assert frames[0].kind is FrameKind.QOS_NULL and frames[0].queue_bits == 60_000
    with pytest.raises(ValueError):
        serve_poll(st_, 0, 0, PHY)


def test_one_periodic_station_no_wasted_polls():
    sim = make_sim([trace_of(list(range(0, 2000, 40)))], duration_ms=2000)
    ledger = sim.run()
    assert ledger.polls_sent == 50
    assert ledger.nulls_received == 0
    assert len(ledger.packets) == 50


def test_zero_stations_only_beacons():
    state = ScheduleState()
    sim = Simulation(PHY, state, {}, make_policy("hcca", state, PHY), 1_000_000, event_log=True)
    ledger = sim.run()
    assert ledger.polls_sent == 0 and not ledger.packets
    assert {e[1] for e in sim.events} == {"BEACON"}
    assert [e[0] for e in sim.events] == [0, 200_000, 400_000, 600_000, 800_000]


STAGGERED = [[0, 120], [0, 40, 120], [0, 40, 80, 120]]


def hand_count_nulls(traces, cap_times):
    """Oracle: a station answers Null at a CAP iff no frame arrived since its last service."""
    out = []
    served_upto = [-1] * len(traces)
    for cap in cap_times:
        row = []
        for i, times in enumerate(traces):
            pending = [t for t in times if served_upto[i] < t <= cap]
            row.append(0 if pending else 1)
            if pending:
                served_upto[i] = cap
        out.append(row)
    return out


def test_staggered_null_counts_hcca():
    sim = make_sim([trace_of(t) for t in STAGGERED], duration_ms=120)
    ledger = sim.run()
    per_cap = [[1 if p.outcome == "null" else 0 for p in tr.polls] for tr in sim.transcripts]
    assert per_cap == hand_count_nulls(STAGGERED, [0, 40, 80]) == [[0, 0, 0], [1, 0, 0], [1, 1, 0]]
    assert ledger.nulls_received == 3


def test_staggered_fpoll_skips_idle_stations():
    sim = make_sim([trace_of(t) for t in STAGGERED], "fpoll", duration_ms=120)
    sim.run()
    assert [[p.station for p in tr.polls] for tr in sim.transcripts] == [[1, 2, 3], [2, 3], [3]]
    assert sim.ledger.nulls_received == 0


def tx_rows(events):
    return [e for e in events if e[1] == "TX"]


def check_channel(events, si, bi):
    txs = tx_rows(events)
    for a, b in zip(txs, txs[1:]):
        assert a[0] + a[5] <= b[0], (a, b)
    for e in events:
        if e[1] == "CAP_END":
            assert int(e[6].split("=")[1]) <= si
    beacons = [e[0] for e in events if e[1] == "BEACON"]
    assert all(b - a == bi for a, b in zip(beacons, beacons[1:]))


def test_exchange_spacing():
    sim = make_sim([trace_of([0, 40, 80])], duration_ms=120)
    sim.run()
    txs = tx_rows(sim.events)
    poll, data, ack = txs[0], txs[1], txs[2]
    assert (poll[3], data[3], ack[3]) == ("QosPoll", "QosData", "Ack")
    assert data[0] == poll[0] + poll[5] + PHY.sifs
    assert ack[0] == data[0] + data[5] + PHY.sifs


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 8),
    sched=st.sampled_from(["hcca", "edd", "fpoll"]),
    seed=st.integers(0, 10_000),
    gaps=st.lists(st.integers(1, 10), min_size=5, max_size=60),
)
def test_conservation_and_no_overlap(n, sched, seed, gaps):
    rng = random.Random(seed)
    traces = []
    for _ in range(n):
        rng.shuffle(gaps)
        times = [0]
        for g in gaps:
            times.append(times[-1] + 40 * g)
        traces.append(trace_of(times, [rng.randint(100, 38_000) for _ in times]))
    drops = {(rng.randint(1, n), rng.randint(0, 5))} if seed % 3 == 0 else set()
    sim = make_sim(traces, sched, duration_ms=3000, start_ms=rng.choice([0, 20, 100]), drops=drops)
    ledger = sim.run()
    assert ledger.conservation_holds()
    assert sum(c.dropped for c in ledger.stations.values()) <= len(drops)
    check_channel(sim.events, sim.schedule.si, PHY.beacon_interval)
    for p in ledger.packets:
        assert p.generated <= p.sent < p.received


def test_drop_ends_txop_and_requeues():
    # two small frames queued at the CAP at 40 ms, both fit the grant; the first is lost
    sim = make_sim([trace_of([0, 10, 400], size=1000)], duration_ms=200, start_ms=20, drops={(1, 0)})
    sim.run()
    cap = sim.transcripts[1]
    assert cap.start == 40_000 and len(cap.polls[0].frames) == 2
    kinds = [e[1] for e in sim.events if e[1] in ("TX", "DROP", "POLL_TIMEOUT") and e[0] >= 40_000]
    assert kinds[:5] == ["TX", "TX", "DROP", "POLL_TIMEOUT", "TX"]
    drop = next(e for e in sim.events if e[1] == "DROP")
    timeout = next(e for e in sim.events if e[1] == "POLL_TIMEOUT")
    assert timeout[0] - drop[0] == PHY.pifs
    assert sim.ledger.stations[1].dropped == 1
    # no retransmission; the second MSDU waits for the next poll
    assert [(p.msdu, p.sent // 40_000) for p in sim.ledger.packets] == [(1, 2)]
    assert sim.ledger.conservation_holds()


def test_frame_at_cap_boundary_is_served():
    sim = make_sim([trace_of([40, 80])], duration_ms=120)
    ledger = sim.run()
    assert [p.generated for p in ledger.packets] == [40_000, 80_000]
    assert all(p.sent - p.generated == PHY.poll_time + PHY.sifs for p in ledger.packets)


class Greedy(HccaPolicy):
    def hcca_poll_set(self, now):
        return [(sid, self.si) for sid in self.order]


def test_overlong_cap_is_fatal():
    sim = make_sim([trace_of([0, 40])], duration_ms=200)
    sim.policy = Greedy(sim.schedule, PHY)
    with pytest.raises(ScheduleInfeasible) as exc:
        sim.run()
    assert "budget" in str(exc.value)


def test_event_log_deterministic():
    traces = [trace_of(t) for t in STAGGERED]
    a = make_sim(traces, "fpoll", duration_ms=400)
    b = make_sim(traces, "fpoll", duration_ms=400)
    a.run()
    b.run()
    assert a.events == b.events
