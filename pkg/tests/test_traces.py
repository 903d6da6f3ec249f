import io

import pytest
from hypothesis import given, settings, strategies as st

from hccasim.traces import (FrameRecord, FrameType, Jitter, TraceParseError, TraceValidationError, VideoTrace,
                            compute_stats, parse_trace, read_trace, serialize_trace, synthesize_trace,
                            write_trace)

TABLE_FRAGMENT = """\
# time type size
0 I 12539
360 P 3981
400 P 1427
"""


def test_parse_rows():
    trace = parse_trace(TABLE_FRAGMENT)
    assert trace.records[0] == FrameRecord(0, FrameType.I, 12539)
    assert trace.records[1] == FrameRecord(360, FrameType.P, 3981)
    assert len(trace) == 3


def test_parse_accepts_text_stream():
    assert parse_trace(io.StringIO(TABLE_FRAGMENT), "x").source_label == "x"


@pytest.mark.parametrize("text", ["", "# only a comment\n", "\n\n"])
def test_empty_trace_rejected(text):
    with pytest.raises(TraceValidationError, match="empty trace"):
        parse_trace(text)


@pytest.mark.parametrize("text, lineno", [
    ("0 I 100\nabc P 20\n", 2),
    ("0 I 100\n# c\n40 P xx\n", 3),
    ("0 I\n", 1),
    ("0 I 100 7\n", 1),
    ("0 I 0\n", 1),
    ("-40 I 10\n", 1),
])
def test_malformed_rows_carry_line_number(text, lineno):
    with pytest.raises(TraceParseError) as exc:
        parse_trace(text)
    assert exc.value.lineno == lineno


def test_non_monotone_rejected():
    with pytest.raises(TraceValidationError):
        parse_trace("0 I 10\n80 P 10\n40 P 10\n")
    with pytest.raises(TraceValidationError):
        parse_trace("0 I 10\n0 P 10\n")


def test_unknown_type_maps_to_other():
    trace = parse_trace("0 I 10\n40 Q 20\n80 pb 30\n")
    assert trace.records[1].frame_type is FrameType.OTHER
    assert trace.records[2].frame_type is FrameType.PB
    assert trace.unknown_type_count == 1


def test_file_round_trip(tmp_path):
    trace = parse_trace(TABLE_FRAGMENT, "fragment")
    write_trace(trace, tmp_path / "t.txt")
    again = read_trace(tmp_path / "t.txt")
    assert again.records == trace.records


records_strategy = st.lists(
    st.tuples(st.integers(1, 5000), st.sampled_from(list(FrameType)), st.integers(1, 200_000)),
    min_size=1, max_size=40,
).map(lambda rows: tuple(
    FrameRecord(sum(g for g, _, _ in rows[:i + 1]) - rows[0][0], ftype, size)
    for i, (_, ftype, size) in enumerate(rows)
))


@given(records_strategy, st.text(alphabet="abc xyz=0123456789", max_size=20))
def test_serialize_parse_identity(records, label):
    trace = VideoTrace(records, label.strip())
    assert parse_trace(serialize_trace(trace), trace.source_label) == trace


def test_stats_two_frame_example():
    stats = compute_stats(parse_trace("0 I 8000\n1000 P 8000\n"))
    assert stats.mean_bit_rate == pytest.approx(8000.0)
    assert stats.mean_size_bytes == 1000
    assert stats.peak_bit_rate == 8000 * 1000 / 40


def test_stats_single_frame_error():
    with pytest.raises(TraceValidationError):
        compute_stats(parse_trace("0 I 8000\n"))


@given(st.lists(st.tuples(st.integers(40, 2000), st.integers(1, 100_000)), min_size=2, max_size=40))
def test_stats_orderings(rows):
    # at most one frame per reference tick, as encoders emit
    t = 0
    records = []
    for gap, size in rows:
        records.append(FrameRecord(t, FrameType.P, size))
        t += gap
    stats = compute_stats(VideoTrace(records))
    assert stats.max_size_bytes >= stats.mean_size_bytes
    assert stats.peak_bit_rate >= stats.mean_bit_rate - 1e-9
    assert stats.cov_bit_rate >= 0


def test_synth_frame_count_for_260ms_mean():
    trace = synthesize_trace(1, 260, "geometric", 4152, "exp", 500_000)
    expected = 500_000 / 260
    assert abs(len(trace) - expected) <= 0.05 * expected


def test_synth_periodic():
    trace = synthesize_trace(3, 120, "none", 4000, "none", 10_000)
    gaps = {b - a for a, b in zip(trace.arrival_times, trace.arrival_times[1:])}
    assert gaps == {120}
    assert set(trace.sizes) == {4000}


def test_synth_deterministic():
    a = synthesize_trace(7, 200, "uniform:0.5", 3000, "exp", 60_000)
    b = synthesize_trace(7, 200, "uniform:0.5", 3000, "exp", 60_000)
    c = synthesize_trace(8, 200, "uniform:0.5", 3000, "exp", 60_000)
    assert a == b
    assert a != c


@pytest.mark.parametrize("args", [
    (1, 0, "none", 100, "none", 1000),
    (1, 40, "none", 0, "none", 1000),
    (1, 40, "none", 100, "none", -5),
    (1, 60, "none", 100, "none", 1000),
])
def test_synth_rejects_bad_parameters(args):
    with pytest.raises(TraceValidationError):
        synthesize_trace(*args)


def test_jitter_spec_parse():
    assert Jitter.parse("uniform:0.25") == Jitter("uniform", 0.25)
    assert str(Jitter.parse(" Geometric ")) == "geometric"
    with pytest.raises(ValueError):
        Jitter.parse("gauss")
    with pytest.raises(ValueError):
        Jitter.parse("uniform:2")


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32),
    periods=st.integers(1, 12),
    jitter=st.sampled_from(["geometric", "exp", "uniform:0", "uniform:0.5", "uniform:1"]),
    size=st.integers(1, 40_000),
    size_jitter=st.sampled_from(["none", "exp", "uniform:0.9"]),
    duration=st.integers(40, 120_000),
)
def test_synth_invariants(seed, periods, jitter, size, size_jitter, duration):
    mean = periods * 40
    trace = synthesize_trace(seed, mean, jitter, size, size_jitter, duration, max_size_bits=2 * size)
    times = trace.arrival_times
    assert all(t % 40 == 0 for t in times)
    assert all(0 <= t < duration for t in times)
    assert all(b > a for a, b in zip(times, times[1:]))
    assert all(1 <= s <= 2 * size for s in trace.sizes)


@pytest.mark.parametrize("jitter", ["geometric", "uniform:0.5", "none"])
@pytest.mark.parametrize("mean", [80, 200, 320])
def test_synth_realized_mean_gap(jitter, mean):
    trace = synthesize_trace(11, mean, jitter, 4000, "exp", mean * 2000)
    times = trace.arrival_times
    assert len(times) >= 1000
    realized = (times[-1] - times[0]) / (len(times) - 1)
    assert abs(realized - mean) <= 0.05 * mean
