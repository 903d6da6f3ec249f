import sys

import pytest

from hccasim.engine import Simulation, StationSetup
from hccasim.policies import make_policy
from hccasim.qos import PhyProfile, ScheduleState, TrafficSpec, admit
from hccasim.traces import FrameRecord, FrameType, VideoTrace

PHY = PhyProfile()
F1 = TrafficSpec(16_000, 519, 4831, 80_000, 40_000, 40_000, 54_000_000)


def trace_of(times_ms, size=4152):
    sizes = size if isinstance(size, (list, tuple)) else [size] * len(times_ms)
    return VideoTrace(tuple(FrameRecord(t, FrameType.P, s) for t, s in zip(times_ms, sizes)), "test")


def make_sim(traces, scheduler="hcca", duration_ms=1000, start_ms=0, drops=(), event_log=True,
             spec=F1, phy=PHY):
    state = ScheduleState()
    for i, _ in enumerate(traces, start=1):
        state = admit(state, spec, phy, stream_id=i).state
    setups = {i: StationSetup(t, spec, start_ms * 1000) for i, t in enumerate(traces, start=1)}
    sim = Simulation(phy, state, setups, make_policy(scheduler, state, phy), duration_ms * 1000,
                     drops=frozenset(drops), event_log=event_log)
    sim.keep_transcripts = True
    return sim


@pytest.fixture
def sim_factory():
    return make_sim


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if not mod or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, (ok, detail) in sorted(mod.RESULTS.items(), key=lambda kv: kv[0]):
        terminalreporter.write_line(f"criterion {cid}: {'PASS' if ok else 'FAIL'}  {detail}")
