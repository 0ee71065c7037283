"""Detection-event containers and the on-disk event formats."""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

MAGIC = b"QEVT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")
EVENT_DTYPE = np.dtype([("segment", "<u4"), ("channel", "u1"), ("timestamp_ps", "<u8")])


class Channel(IntEnum):
    TRIGGER = 0
    SIGNAL_A = 1
    SIGNAL_B = 2


_CSV_NAMES = {Channel.TRIGGER: "T", Channel.SIGNAL_A: "A", Channel.SIGNAL_B: "B"}
_CSV_CODES = {v: k for k, v in _CSV_NAMES.items()}


class StreamFormatError(ValueError):
    pass


class DetectionEvent(NamedTuple):
    segment: int
    channel: Channel
    timestamp: int


@dataclass(frozen=True)
class EventStream:
    """Time-tagged clicks grouped into fixed-length segments.

    Stored column-wise, sorted by ``(segment, timestamp_ps)``.
    """

    segment: np.ndarray
    channel: np.ndarray
    timestamp_ps: np.ndarray
    segment_count: int
    segment_duration_ps: int
    config: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segment", np.asarray(self.segment, dtype=np.uint32))
        object.__setattr__(self, "channel", np.asarray(self.channel, dtype=np.uint8))
        object.__setattr__(self, "timestamp_ps", np.asarray(self.timestamp_ps, dtype=np.int64))
        n = self.segment.size
        if self.channel.size != n or self.timestamp_ps.size != n:
            raise StreamFormatError("segment, channel and timestamp columns differ in length")
        if self.segment_duration_ps <= 0:
            raise StreamFormatError("segment duration must be positive")

    def __len__(self) -> int:
        return int(self.segment.size)

    @property
    def stride(self) -> int:
        # segments are laid end to end with a gap so no window spans two of them
        return 4 * int(self.segment_duration_ps)

    def keys(self, channel: Channel) -> np.ndarray:
        m = self.channel == channel
        return self.segment[m].astype(np.int64) * self.stride + self.timestamp_ps[m]

    def events(self) -> Iterator[DetectionEvent]:
        for s, c, t in zip(self.segment.tolist(), self.channel.tolist(), self.timestamp_ps.tolist()):
            yield DetectionEvent(s, Channel(c), t)

    def counts_per_channel(self) -> dict[Channel, int]:
        bc = np.bincount(self.channel, minlength=3)
        return {ch: int(bc[ch]) for ch in Channel}

    def validate(self) -> None:
        if len(self) == 0:
            return
        if self.channel.max() > 2:
            raise StreamFormatError(f"unknown channel code {int(self.channel.max())}")
        if self.timestamp_ps.min() < 0 or self.timestamp_ps.max() >= self.segment_duration_ps:
            raise StreamFormatError("timestamp outside [0, segment_duration)")
        if self.segment.max() >= self.segment_count:
            raise StreamFormatError("segment index beyond segment_count")
        key = self.segment.astype(np.int64) * self.stride + self.timestamp_ps
        if np.any(np.diff(key) < 0):
            raise StreamFormatError("events are not sorted by (segment, timestamp)")

    @classmethod
    def empty(cls, segment_count: int = 1, segment_duration_ps: int = 2_000_000_000) -> "EventStream":
        z = np.zeros(0)
        return cls(z, z, z, segment_count, segment_duration_ps)

    @classmethod
    def from_events(cls, events, segment_count: int, segment_duration_ps: int) -> "EventStream":
        """Build from ``(segment, channel, timestamp_ps)`` triples in any order."""
        arr = np.array([(int(s), int(c), int(t)) for s, c, t in events], dtype=np.int64).reshape(-1, 3)
        order = np.lexsort((arr[:, 1], arr[:, 2], arr[:, 0]))
        arr = arr[order]
        out = cls(arr[:, 0], arr[:, 1], arr[:, 2], segment_count, segment_duration_ps)
        out.validate()
        return out

    @classmethod
    def concatenate(cls, parts) -> "EventStream":
        parts = list(parts)
        if not parts:
            raise ValueError("nothing to concatenate")
        first = parts[0]
        return cls(
            np.concatenate([p.segment for p in parts]),
            np.concatenate([p.channel for p in parts]),
            np.concatenate([p.timestamp_ps for p in parts]),
            first.segment_count,
            first.segment_duration_ps,
            first.config,
        )


# --------------------------------------------------------------------------
# binary / csv formats
# --------------------------------------------------------------------------


def to_bytes(stream: EventStream) -> bytes:
    rec = np.empty(len(stream), dtype=EVENT_DTYPE)
    rec["segment"] = stream.segment
    rec["channel"] = stream.channel
    rec["timestamp_ps"] = stream.timestamp_ps
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, stream.segment_count, stream.segment_duration_ps)
    return header + rec.tobytes()


def from_bytes(data: bytes) -> EventStream:
    if len(data) < _HEADER.size:
        raise StreamFormatError("file too short for QEVT header")
    magic, version, seg_count, seg_dur = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StreamFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise StreamFormatError(f"unsupported QEVT version {version}")
    body = memoryview(data)[_HEADER.size :]
    if len(body) % EVENT_DTYPE.itemsize:
        raise StreamFormatError("truncated event record")
    rec = np.frombuffer(body, dtype=EVENT_DTYPE)
    out = EventStream(rec["segment"], rec["channel"], rec["timestamp_ps"].astype(np.int64), seg_count, seg_dur)
    out.validate()
    return out


def to_csv(stream: EventStream, fh) -> None:
    """CSV with header ``segment,channel,timestamp_ps``; segment geometry in a ``#`` comment line."""
    fh.write(f"# segment_count={stream.segment_count} segment_duration_ps={stream.segment_duration_ps}\n")
    fh.write("segment,channel,timestamp_ps\n")
    names = np.array(["T", "A", "B"])[stream.channel]
    for s, c, t in zip(stream.segment.tolist(), names.tolist(), stream.timestamp_ps.tolist()):
        fh.write(f"{s},{c},{t}\n")


def from_csv(fh, segment_count: int | None = None, segment_duration_ps: int | None = None) -> EventStream:
    meta = {}
    lines = []
    for line in fh:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = int(v)
            continue
        lines.append(line)
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise StreamFormatError("empty CSV event file") from None
    if [h.strip() for h in header] != ["segment", "channel", "timestamp_ps"]:
        raise StreamFormatError(f"unexpected CSV header {header!r}")
    seg, ch, ts = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            seg.append(int(row[0]))
            ch.append(_CSV_CODES[row[1].strip()])
            ts.append(int(row[2]))
        except (KeyError, ValueError, IndexError) as exc:
            raise StreamFormatError(f"bad CSV record on data line {lineno}: {row!r}") from exc
    segment_count = segment_count or meta.get("segment_count") or (max(seg) + 1 if seg else 1)
    segment_duration_ps = segment_duration_ps or meta.get("segment_duration_ps")
    if segment_duration_ps is None:
        raise StreamFormatError("segment_duration_ps missing (no metadata line and not given)")
    out = EventStream(np.array(seg), np.array(ch), np.array(ts), segment_count, segment_duration_ps)
    out.validate()
    return out


def write_stream(stream: EventStream, path) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            to_csv(stream, fh)
    else:
        path.write_bytes(to_bytes(stream))


def read_stream(path) -> EventStream:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        with open(path, newline="") as fh:
            return from_csv(fh)
    return from_bytes(path.read_bytes())
