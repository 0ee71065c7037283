"""Trigger-conditioned coincidence counting and delay histograms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .stream import Channel, EventStream

PS = 1e-12


def _to_ps(seconds: float) -> int:
    return int(round(seconds / PS))


@dataclass(frozen=True)
class CoincidenceCounts:
    """Trigger classification for one coincidence window.

    ``R1A`` counts triggers with an A click and no B click inside the window,
    ``R1B`` the mirror case and ``R2`` triggers with clicks on both.
    """

    R0: int
    R1A: int
    R1B: int
    R2: int
    window: float | None = None

    def __post_init__(self):
        if min(self.R0, self.R1A, self.R1B, self.R2) < 0:
            raise ValueError("coincidence counts must be nonnegative")
        if self.R1A + self.R1B + self.R2 > self.R0:
            raise ValueError("more coincidences than triggers")

    @property
    def vacuum(self) -> int:
        return self.R0 - self.R1A - self.R1B - self.R2

    def __add__(self, other: "CoincidenceCounts") -> "CoincidenceCounts":
        if self.window != other.window:
            raise ValueError("cannot merge counts taken with different windows")
        return CoincidenceCounts(
            self.R0 + other.R0, self.R1A + other.R1A, self.R1B + other.R1B, self.R2 + other.R2, self.window
        )


@dataclass(frozen=True)
class DelayHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    reference: str
    target: str

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def __add__(self, other: "DelayHistogram") -> "DelayHistogram":
        if not np.array_equal(self.bin_edges, other.bin_edges) or (self.reference, self.target) != (other.reference, other.target):
            raise ValueError("histograms are not compatible")
        return DelayHistogram(self.bin_edges, self.counts + other.counts, self.reference, self.target)


def scan_windows(stream: EventStream, windows) -> list[CoincidenceCounts]:
    """Coincidence counts for many windows in one pass over the stream."""
    windows = np.atleast_1d(np.asarray(windows, dtype=float))
    if np.any(windows <= 0):
        raise ValueError("coincidence windows must be positive")
    widths = np.array([_to_ps(w) for w in windows], dtype=np.int64)
    uniq, inverse = np.unique(widths, return_inverse=True)
    trig = stream.keys(Channel.TRIGGER)
    counts = kernels.scan_counts(trig, stream.keys(Channel.SIGNAL_A), stream.keys(Channel.SIGNAL_B), uniq)
    r0 = int(trig.size)
    out = []
    for w, row in zip(windows.tolist(), counts[inverse]):
        out.append(CoincidenceCounts(r0, int(row[0]), int(row[1]), int(row[2]), w))
    return out


def count_coincidences(stream: EventStream, window: float) -> CoincidenceCounts:
    """Classify each trigger by the A/B clicks within ``[t - window/2, t + window/2]``.

    Triggers are classified independently, so one click may serve two
    triggers whose windows overlap.
    """
    return scan_windows(stream, [window])[0]


def _bins(range_ps: int, bw_ps: int) -> tuple[int, int]:
    nbins = int(round(range_ps / bw_ps))
    if nbins < 1:
        raise ValueError("histogram range must be at least one bin wide")
    return nbins, nbins * bw_ps // 2


def delay_histogram(
    stream: EventStream, target: Channel = Channel.SIGNAL_A, bin_width: float = 2e-9, range: float = 200e-9
) -> DelayHistogram:
    """Histogram of ``t_target - t_trigger`` over all pairs within ``range/2``."""
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    bw = _to_ps(bin_width)
    nbins, half = _bins(_to_ps(range), bw)
    counts = kernels.delay_hist(stream.keys(Channel.TRIGGER), stream.keys(Channel(target)), half, bw, nbins)
    edges = (np.arange(nbins + 1) * bw - half) * PS
    return DelayHistogram(edges, counts, Channel.TRIGGER.name, Channel(target).name)


def threefold_delay_histogram(
    stream: EventStream, trigger_window: float = 100e-9, bin_width: float = 2e-9
) -> DelayHistogram:
    """Histogram of ``t_A - t_B`` for triggers with A and B clicks inside ``trigger_window``.

    The clicks used are the ones nearest to the trigger on each channel.
    """
    if not bin_width > 0:
        raise ValueError("bin width must be positive")
    bw = _to_ps(bin_width)
    half = _to_ps(trigger_window) // 2
    nbins = int(round(4 * half / bw))
    counts = kernels.threefold_hist(
        stream.keys(Channel.TRIGGER), stream.keys(Channel.SIGNAL_A), stream.keys(Channel.SIGNAL_B), half, bw, nbins
    )
    edges = (np.arange(nbins + 1) * bw - 2 * half) * PS
    return DelayHistogram(edges, counts, Channel.SIGNAL_B.name, Channel.SIGNAL_A.name)


def naive_counts(stream: EventStream, window: float) -> CoincidenceCounts:
    """All-pairs reference classification (quadratic; for small streams only)."""
    width = _to_ps(window)
    r = [0, 0, 0, 0]
    seg, ch, ts = stream.segment.tolist(), stream.channel.tolist(), stream.timestamp_ps.tolist()
    for i in range(len(seg)):
        if ch[i] != Channel.TRIGGER:
            continue
        r[0] += 1
        has_a = has_b = False
        for j in range(len(seg)):
            if seg[j] != seg[i] or 2 * abs(ts[j] - ts[i]) > width:
                continue
            has_a |= ch[j] == Channel.SIGNAL_A
            has_b |= ch[j] == Channel.SIGNAL_B
        if has_a and has_b:
            r[3] += 1
        elif has_a:
            r[1] += 1
        elif has_b:
            r[2] += 1
    return CoincidenceCounts(r[0], r[1], r[2], r[3], window)
