import numpy as np
import pytest
from scipy import stats

from heralded_qng.coincidence import count_coincidences, delay_histogram
from heralded_qng.event_sim import (
    SimConfig,
    SimulationError,
    expected_counts,
    iter_stream_blocks,
    pair_rate_for_trigger_rate,
    simulate_heralded_windows,
    simulate_segments,
    simulate_stream,
)
from heralded_qng.fock_oracle import LossModel, detection_outcome_probs
from heralded_qng.physics import delay_pdf
from heralded_qng.stream import Channel, EventStream


@pytest.fixture
def config(cavity):
    loss = LossModel(eta_S=0.44, eta_T=0.1, dark_rate_T=500, dark_rate_A=250, dark_rate_B=250,
                     false_trigger_rate=27_500)
    return SimConfig(cavity, pair_rate=pair_rate_for_trigger_rate(50e3, loss), loss=loss,
                     segment_count=40, rng_seed=7)


def test_same_seed_same_stream(config):
    a, b = simulate_stream(config), simulate_stream(config)
    np.testing.assert_array_equal(a.timestamp_ps, b.timestamp_ps)
    np.testing.assert_array_equal(a.channel, b.channel)
    c = simulate_stream(config.with_(rng_seed=8))
    assert len(c) != len(a) or not np.array_equal(c.timestamp_ps, a.timestamp_ps)


def test_blocks_and_random_access(config):
    full = simulate_stream(config)
    joined = EventStream.concatenate(list(iter_stream_blocks(config, block_size=7)))
    np.testing.assert_array_equal(joined.timestamp_ps, full.timestamp_ps)
    np.testing.assert_array_equal(joined.segment, full.segment)
    one = simulate_segments(config, [13])
    m = full.segment == 13
    np.testing.assert_array_equal(one.timestamp_ps, full.timestamp_ps[m])
    np.testing.assert_array_equal(one.channel, full.channel[m])


def test_stream_is_valid(config):
    s = simulate_stream(config)
    s.validate()
    assert s.config["rng_seed"] == 7


def test_channel_rates(config):
    s = simulate_stream(config)
    exposure = config.segment_count * config.segment_duration
    counts = s.counts_per_channel()
    rates = config.channel_rates()
    assert rates[Channel.TRIGGER] == pytest.approx(50e3)
    for ch in Channel:
        mu = rates[ch] * exposure
        # signal clicks pushed past a segment edge are dropped, a tiny effect
        assert abs(counts[ch] - mu) < 5 * np.sqrt(mu) + 1e-4 * mu


def test_delay_distribution(cavity):
    loss = LossModel(eta_S=1.0, eta_T=1.0, split_T=0.5)
    cfg = SimConfig(cavity, pair_rate=2e4, loss=loss, segment_count=100, rng_seed=3)
    s = simulate_stream(cfg)
    h = delay_histogram(s, Channel.SIGNAL_A, bin_width=4e-9, range=160e-9)
    pdf = delay_pdf(cavity)
    cdf = np.interp(h.bin_edges, pdf.tau_grid, pdf.cumulative)
    # accidentals between independent pairs are flat; subtract their expected level
    n_pairs = s.counts_per_channel()[Channel.TRIGGER]
    rate_a = s.counts_per_channel()[Channel.SIGNAL_A] / (cfg.segment_count * cfg.segment_duration)
    flat = n_pairs * rate_a * 4e-9
    expected = n_pairs * 0.5 * np.diff(cdf) + flat
    chi2 = np.sum((h.counts - expected) ** 2 / expected)
    assert stats.chi2.sf(chi2, h.counts.size) > 1e-3


def test_dead_time_respected(cavity):
    loss = LossModel(eta_S=1.0, eta_T=1.0)
    cfg = SimConfig(cavity, pair_rate=2e5, loss=loss, segment_count=5, dead_time=100e-9)
    s = simulate_stream(cfg)
    for ch in Channel:
        for seg in range(cfg.segment_count):
            t = s.timestamp_ps[(s.channel == ch) & (s.segment == seg)]
            assert np.all(np.diff(t) >= 100_000)


def test_dead_time_rate_guard(cavity):
    cfg = SimConfig(cavity, pair_rate=2e6, loss=LossModel(eta_S=1.0, eta_T=1.0),
                    segment_count=1, dead_time=100e-9)
    with pytest.raises(SimulationError, match="dead time"):
        simulate_stream(cfg)


def test_config_validation(cavity):
    loss = LossModel(eta_S=0.5, eta_T=0.5)
    with pytest.raises(SimulationError):
        SimConfig(cavity, pair_rate=-1, loss=loss)
    with pytest.raises(SimulationError):
        SimConfig(cavity, pair_rate=1, loss=loss, segment_count=0)
    with pytest.raises(SimulationError):
        pair_rate_for_trigger_rate(10.0, LossModel(eta_S=0.5, eta_T=0.5, false_trigger_rate=100))
    assert pair_rate_for_trigger_rate(1100.0, LossModel(0.5, 0.5, false_trigger_rate=100)) == 2000.0


def test_expected_counts_agree(config):
    cfg = config.with_(segment_count=400)
    s = simulate_stream(cfg)
    for w in (5e-9, 34e-9, 200e-9):
        got = count_coincidences(s, w)
        exp = expected_counts(cfg, w)
        for key in ("R0", "R1A", "R1B", "R2"):
            mu = exp[key]
            assert abs(getattr(got, key) - mu) < 5 * np.sqrt(mu) + 0.01 * mu, (w, key)


@pytest.mark.parametrize("nbar,eS,eT,T", [(0.05, 0.4, 0.3, 0.5), (0.3, 0.9, 0.8, 0.35)])
def test_heralded_windows_match_exact(nbar, eS, eT, T):
    loss = LossModel(eta_S=eS, eta_T=eT, split_T=T)
    n = 200_000
    c = simulate_heralded_windows(nbar, loss, n, seed=11)
    assert c.R0 == n
    p = detection_outcome_probs(nbar, loss)
    for got, prob in ((c.R1A, p.trigger_A), (c.R1B, p.trigger_B), (c.R2, p.trigger_AB)):
        mu = n * prob / p.trigger
        assert abs(got - mu) < 5 * np.sqrt(mu)


def test_heralded_windows_deterministic():
    loss = LossModel(eta_S=0.4, eta_T=0.3)
    assert simulate_heralded_windows(0.1, loss, 5000, seed=1) == simulate_heralded_windows(0.1, loss, 5000, seed=1)
    with pytest.raises(SimulationError):
        simulate_heralded_windows(0.0, loss, 10)
