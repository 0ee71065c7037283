"""Monte Carlo generation of heralded-photon detection streams."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .coincidence import CoincidenceCounts
from .fock_oracle import LossModel
from .physics import CavityParams, DelayPdf, delay_pdf
from .stream import Channel, EventStream

PS = 1e-12
MAX_DEAD_FRACTION = 0.1


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    cavity: CavityParams
    pair_rate: float
    loss: LossModel
    segment_count: int = 2000
    segment_duration: float = 2e-3
    dead_time: float = 0.0
    rng_seed: int = 0
    filtered: bool = True
    pdf_range: float = 1e-6
    pdf_resolution: float = 0.05e-9

    def __post_init__(self):
        if not self.segment_duration > 0:
            raise SimulationError("segment_duration must be positive")
        if self.segment_count < 1:
            raise SimulationError("segment_count must be at least 1")
        if not self.pair_rate >= 0:
            raise SimulationError("pair_rate must be nonnegative")
        if not self.dead_time >= 0:
            raise SimulationError("dead_time must be nonnegative")
        if not 0 <= self.rng_seed < 2**64:
            raise SimulationError("rng_seed must be a 64-bit unsigned integer")

    @property
    def segment_duration_ps(self) -> int:
        return int(round(self.segment_duration / PS))

    def channel_rates(self) -> dict[Channel, float]:
        """Expected click rates per channel before dead time (Hz)."""
        r, l = self.pair_rate, self.loss
        return {
            Channel.TRIGGER: r * l.eta_T + l.false_trigger_rate + l.dark_rate_T,
            Channel.SIGNAL_A: r * l.eta_S * l.split_T + l.dark_rate_A,
            Channel.SIGNAL_B: r * l.eta_S * (1 - l.split_T) + l.dark_rate_B,
        }

    def with_(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "cavity": dataclasses.asdict(self.cavity),
            "pair_rate": self.pair_rate,
            "loss": dataclasses.asdict(self.loss),
            "segment_count": self.segment_count,
            "segment_duration": self.segment_duration,
            "dead_time": self.dead_time,
            "rng_seed": self.rng_seed,
            "filtered": self.filtered,
        }


def pair_rate_for_trigger_rate(trigger_rate: float, loss: LossModel) -> float:
    """Pair rate that yields ``trigger_rate`` total trigger clicks, backgrounds included."""
    correlated = trigger_rate - loss.false_trigger_rate - loss.dark_rate_T
    if correlated < 0:
        raise SimulationError("trigger backgrounds alone exceed the target trigger rate")
    if loss.eta_T == 0:
        raise SimulationError("eta_T = 0: no pair rate can produce correlated triggers")
    return correlated / loss.eta_T


def check_config(config: SimConfig) -> None:
    if config.dead_time > 0:
        for ch, rate in config.channel_rates().items():
            if rate * config.dead_time > MAX_DEAD_FRACTION:
                raise SimulationError(
                    f"{ch.name} rate {rate:.3g} Hz x dead time {config.dead_time:.3g} s "
                    f"= {rate * config.dead_time:.3g} exceeds {MAX_DEAD_FRACTION}"
                )


class _SegmentGenerator:
    def __init__(self, config: SimConfig):
        check_config(config)
        self.config = config
        self.length = config.segment_duration_ps
        self.dead = int(round(config.dead_time / PS))

    @cached_property
    def pdf(self) -> DelayPdf:
        c = self.config
        return delay_pdf(c.cavity, filtered=c.filtered, range=c.pdf_range, resolution=c.pdf_resolution)

    def segment(self, index: int):
        c, l = self.config, self.config.loss
        L = self.length
        rng = np.random.default_rng(np.random.SeedSequence(c.rng_seed, spawn_key=(index,)))
        dur = c.segment_duration

        n = rng.poisson(c.pair_rate * dur)
        t_pair = rng.integers(0, L, n)
        u = rng.random((4, n))
        trig = t_pair[u[0] < l.eta_T]
        sig_mask = u[1] < l.eta_S
        delay_ps = np.rint(self.pdf.sample(u[3][sig_mask]) / PS).astype(np.int64)
        sig = t_pair[sig_mask] + delay_ps
        to_a = u[2][sig_mask] < l.split_T
        inside = (sig >= 0) & (sig < L)
        sig_a = sig[to_a & inside]
        sig_b = sig[~to_a & inside]

        def background(rate):
            return rng.integers(0, L, rng.poisson(rate * dur))

        false_t = background(l.false_trigger_rate)
        dark_t = background(l.dark_rate_T)
        dark_a = background(l.dark_rate_A)
        dark_b = background(l.dark_rate_B)

        parts = []
        for ch, arrays in (
            (Channel.TRIGGER, (trig, false_t, dark_t)),
            (Channel.SIGNAL_A, (sig_a, dark_a)),
            (Channel.SIGNAL_B, (sig_b, dark_b)),
        ):
            t = np.sort(np.concatenate(arrays))
            if self.dead:
                t = t[kernels.dead_time_mask(t, self.dead)]
            parts.append((t, np.full(t.size, ch, dtype=np.uint8)))
        times = np.concatenate([p[0] for p in parts])
        chans = np.concatenate([p[1] for p in parts])
        order = np.lexsort((chans, times))
        return times[order], chans[order]

    def block(self, start: int, stop: int) -> EventStream:
        segs, chans, times = [], [], []
        for i in range(start, stop):
            t, ch = self.segment(i)
            segs.append(np.full(t.size, i, dtype=np.uint32))
            chans.append(ch)
            times.append(t)
        c = self.config
        if not segs:
            return EventStream.empty(c.segment_count, self.length)
        return EventStream(
            np.concatenate(segs),
            np.concatenate(chans),
            np.concatenate(times),
            c.segment_count,
            self.length,
            c.as_dict(),
        )


def simulate_stream(config: SimConfig) -> EventStream:
    """Generate the full stream; every segment uses its own seeded substream."""
    return _SegmentGenerator(config).block(0, config.segment_count)


def iter_stream_blocks(config: SimConfig, block_size: int = 1000):
    """Yield the stream in consecutive segment blocks (bounded memory)."""
    gen = _SegmentGenerator(config)
    for start in range(0, config.segment_count, block_size):
        yield gen.block(start, min(start + block_size, config.segment_count))


def simulate_segments(config: SimConfig, indices) -> EventStream:
    """Generate only the listed segments (in the given order), identical to the full run."""
    gen = _SegmentGenerator(config)
    parts = [gen.block(i, i + 1) for i in indices]
    return EventStream.concatenate(parts)


# --------------------------------------------------------------------------
# pulsed (per-window) sampling of the two-mode squeezed vacuum model
# --------------------------------------------------------------------------


def simulate_heralded_windows(
    nbar: float, loss: LossModel, n_triggers: int, seed: int = 0, batch: int = 1 << 20
) -> CoincidenceCounts:
    """Photon-by-photon sampling of thermal pair windows until ``n_triggers`` triggers.

    Windows with no pair can never trigger (no dark counts in this model), so
    sampling starts from the thermal distribution conditioned on ``n >= 1``.
    """
    if not nbar > 0:
        raise SimulationError("nbar must be positive")
    rng = np.random.default_rng(seed)
    p_geom = 1.0 / (1.0 + nbar)
    r0 = r1a = r1b = r2 = 0
    while r0 < n_triggers:
        n = rng.geometric(p_geom, size=batch)
        trig = rng.binomial(n, loss.eta_T) > 0
        n = n[trig]
        m = rng.binomial(n, loss.eta_S)
        m_a = rng.binomial(m, loss.split_T)
        a = m_a > 0
        b = (m - m_a) > 0
        need = n_triggers - r0
        if n.size > need:
            a, b = a[:need], b[:need]
        r0 += a.size
        r1a += int(np.count_nonzero(a & ~b))
        r1b += int(np.count_nonzero(b & ~a))
        r2 += int(np.count_nonzero(a & b))
    return CoincidenceCounts(r0, r1a, r1b, r2, None)


# --------------------------------------------------------------------------
# analytic expectation for the CW stream (Poisson pairs, no dead time)
# --------------------------------------------------------------------------


def window_capture(pdf: DelayPdf, window: float) -> float:
    """Probability mass of the delay density inside ``[-window/2, window/2]``."""
    t, cdf = pdf.tau_grid, pdf.cumulative
    return float(np.interp(0.5 * window, t, cdf) - np.interp(-0.5 * window, t, cdf))


def expected_counts(config: SimConfig, window: float, pdf: DelayPdf | None = None) -> dict[str, float]:
    """Expected ``R0, R1A, R1B, R2`` of a simulated stream for one window.

    Treats background clicks inside a window as Poisson and neglects segment
    edges and dead time.
    """
    c, l = config, config.loss
    if pdf is None:
        pdf = delay_pdf(c.cavity, filtered=c.filtered, range=c.pdf_range, resolution=c.pdf_resolution)
    exposure = c.segment_count * c.segment_duration
    rates = c.channel_rates()
    trig_rate = rates[Channel.TRIGGER]
    frac_true = c.pair_rate * l.eta_T / trig_rate if trig_rate > 0 else 0.0
    q = l.eta_S * window_capture(pdf, window)
    lam_a = rates[Channel.SIGNAL_A] * window
    lam_b = rates[Channel.SIGNAL_B] * window
    ea, eb = np.exp(-lam_a), np.exp(-lam_b)
    T = l.split_T
    none = (frac_true * (1 - q) + (1 - frac_true)) * ea * eb
    no_a = (frac_true * (1 - q * T) + (1 - frac_true)) * ea
    no_b = (frac_true * (1 - q * (1 - T)) + (1 - frac_true)) * eb
    r0 = trig_rate * exposure
    return {
        "R0": r0,
        "R1A": r0 * (no_b - none),
        "R1B": r0 * (no_a - none),
        "R2": r0 * (1 - no_a - no_b + none),
    }
