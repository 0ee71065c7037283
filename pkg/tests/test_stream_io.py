import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heralded_qng.stream import (
    EVENT_DTYPE,
    Channel,
    EventStream,
    StreamFormatError,
    from_bytes,
    from_csv,
    read_stream,
    to_bytes,
    to_csv,
    write_stream,
)

DUR = 1_000_000


def random_stream(rng, n=200, segments=5, dur=DUR):
    ev = zip(rng.integers(0, segments, n), rng.integers(0, 3, n), rng.integers(0, dur, n))
    return EventStream.from_events(ev, segments, dur)


def assert_same(a, b):
    assert (a.segment_count, a.segment_duration_ps) == (b.segment_count, b.segment_duration_ps)
    np.testing.assert_array_equal(a.segment, b.segment)
    np.testing.assert_array_equal(a.channel, b.channel)
    np.testing.assert_array_equal(a.timestamp_ps, b.timestamp_ps)


def test_record_layout():
    assert EVENT_DTYPE.itemsize == 13
    s = EventStream.from_events([(1, 2, 7)], 3, DUR)
    raw = to_bytes(s)
    assert raw[:4] == b"QEVT"
    assert len(raw) == 18 + 13
    assert raw[18:] == (1).to_bytes(4, "little") + bytes([2]) + (7).to_bytes(8, "little")


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(0, 300))
def test_binary_roundtrip(seed, n):
    s = random_stream(np.random.default_rng(seed), n)
    assert_same(from_bytes(to_bytes(s)), s)


def test_csv_roundtrip(rng):
    s = random_stream(rng)
    buf = io.StringIO()
    to_csv(s, buf)
    buf.seek(0)
    assert_same(from_csv(buf), s)


def test_csv_without_metadata():
    text = "segment,channel,timestamp_ps\n0,T,5\n1,A,9\n"
    with pytest.raises(StreamFormatError, match="segment_duration_ps"):
        from_csv(io.StringIO(text))
    s = from_csv(io.StringIO(text), segment_duration_ps=100)
    assert s.segment_count == 2
    assert [e.channel for e in s.events()] == [Channel.TRIGGER, Channel.SIGNAL_A]


@pytest.mark.parametrize("suffix", [".qevt", ".csv"])
def test_file_roundtrip(tmp_path, rng, suffix):
    s = random_stream(rng)
    p = tmp_path / f"events{suffix}"
    write_stream(s, p)
    assert_same(read_stream(p), s)


def test_corrupt_files():
    s = EventStream.from_events([(0, 0, 1), (0, 1, 2)], 1, DUR)
    raw = to_bytes(s)
    with pytest.raises(StreamFormatError, match="magic"):
        from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(StreamFormatError, match="truncated"):
        from_bytes(raw[:-1])
    with pytest.raises(StreamFormatError, match="too short"):
        from_bytes(raw[:5])
    with pytest.raises(StreamFormatError, match="version"):
        from_bytes(raw[:4] + (9).to_bytes(2, "little") + raw[6:])
    with pytest.raises(StreamFormatError, match="header"):
        from_csv(io.StringIO("a,b,c\n"))
    with pytest.raises(StreamFormatError, match="line"):
        from_csv(io.StringIO("segment,channel,timestamp_ps\n0,Q,1\n"), segment_duration_ps=10)


def test_validate():
    with pytest.raises(StreamFormatError, match="timestamp"):
        EventStream.from_events([(0, 0, DUR)], 1, DUR)
    with pytest.raises(StreamFormatError, match="segment index"):
        EventStream.from_events([(2, 0, 0)], 2, DUR)
    with pytest.raises(StreamFormatError, match="channel"):
        EventStream.from_events([(0, 5, 0)], 1, DUR)
    unsorted = EventStream(np.array([0, 0]), np.array([0, 0]), np.array([5, 1]), 1, DUR)
    with pytest.raises(StreamFormatError, match="sorted"):
        unsorted.validate()


def test_keys_separate_segments():
    s = EventStream.from_events([(0, 0, DUR - 1), (1, 0, 0)], 2, DUR)
    k = s.keys(Channel.TRIGGER)
    # a window narrower than a segment can never join clicks from different segments
    assert k[1] - k[0] > 2 * DUR


def test_concatenate_and_counts(rng):
    a = random_stream(rng, 50)
    b = EventStream.concatenate([a, a])
    assert len(b) == 100
    assert sum(b.counts_per_channel().values()) == 100
    assert len(EventStream.empty()) == 0
