import csv
import json

import numpy as np
import pytest

from heralded_qng import __version__
from heralded_qng.cli import main, theory_table
from heralded_qng.coincidence import CoincidenceCounts, DelayHistogram
from heralded_qng.config import ConfigError, build_run_config, config_echo, load_config, preset_config
from heralded_qng.pipeline import analyze_counts, bin_masses, fit_delay_histogram, parse_window_range
from heralded_qng.stream import Channel


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config(tmp_path):
    cfg = load_config(write(tmp_path, "[cavity]\nepsilon_over_gamma = 0.1\n"))
    assert cfg.epsilon_over_gamma == pytest.approx(0.1)
    assert cfg.trigger_rate == pytest.approx(50e3)
    assert cfg.sim.loss.false_trigger_rate == pytest.approx(0.55 * 50e3)
    assert len(cfg.windows) == 150


def test_gain_scales_trigger_rate():
    assert preset_config("fig4").trigger_rate == pytest.approx(50e3 * 2.8**2)


@pytest.mark.parametrize(
    "text,match",
    [
        ("", "epsilon_over_gamma is required"),
        ("[cavity]\nepsilon_over_gamma = 1.2\n", "below-threshold"),
        ("[cavity]\nepsilon_over_gamma = 0.1\nkappa_over_gamma = 0.9\n", "singularity"),
        ("[cavity]\nepsilon_over_gamma = 0.1\ncolour = 3\n", "unknown key"),
        ("[detectors]\nx = 1\n", "unknown"),
        ("[cavity]\nepsilon_over_gamma = 0.1\n[losses]\neta_S = 1.5\n", "eta_S"),
        ("[cavity]\nepsilon_over_gamma = 0.1\n[simulation]\nsegment_count = 0\n", "segment_count"),
        ("[cavity]\nepsilon_over_gamma = 'x'\n", "number"),
        ("preset = 'nope'\n", "unknown preset"),
        ("[cavity]\nepsilon_over_gamma = 0.1\n[analysis]\nwindows_ns = '5:1:1'\n", "windows_ns"),
        ("[cavity\n", "run.toml"),
    ],
)
def test_config_errors(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(write(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")


def test_explicit_rates():
    cfg = build_run_config({"cavity": {"epsilon_over_gamma": 0.1}, "simulation": {"pair_rate_hz": 1e5},
                            "losses": {"false_trigger_rate": 0.0, "dark_rate_T": 0.0}})
    assert cfg.sim.pair_rate == 1e5
    assert cfg.trigger_rate == pytest.approx(1e4)
    with pytest.raises(ConfigError, match="at most one"):
        build_run_config({"cavity": {"epsilon_over_gamma": 0.1},
                          "simulation": {"pair_rate_hz": 1.0, "trigger_rate_hz": 1.0}})


def test_config_echo_is_json():
    echo = config_echo(preset_config("mid"))
    assert json.loads(json.dumps(echo))["cavity"]["epsilon_over_gamma"] == 0.16
    assert echo["derived"]["trigger_rate_hz"] == pytest.approx(50e3 * 1.6**2)


def test_parse_window_range():
    w = parse_window_range("2:10:2")
    np.testing.assert_allclose(w, [2e-9, 4e-9, 6e-9, 8e-9, 10e-9])
    assert parse_window_range("2:300:2").size == 150
    for bad in ("2:1:1", "0:5:1", "a:b", "1:2:0"):
        with pytest.raises(ValueError):
            parse_window_range(bad)


def test_analyze_counts_nan_when_degenerate():
    row = analyze_counts(CoincidenceCounts(100, 0, 0, 0, 1e-9))
    assert np.isnan(row["p0"]) and np.isnan(row["W"])
    row = analyze_counts(CoincidenceCounts(200_000, 17_000, 17_000, 40, 34e-9))
    assert row["W"] > 0 and row["significance"] > 10
    assert row["window_ns"] == pytest.approx(34.0)


def test_histogram_fit_recovers_model(cavity, rng):
    edges = np.arange(-100, 101, 2) * 1e-9
    m = bin_masses(cavity, edges)
    lam = 5e4 * m + 40.0
    hist = DelayHistogram(edges, rng.poisson(lam), "TRIGGER", "SIGNAL_A")
    fit = fit_delay_histogram(hist, cavity)
    assert fit.amplitude == pytest.approx(5e4, rel=0.03)
    assert fit.background == pytest.approx(40.0, rel=0.05)
    assert fit.dof == 98 and fit.p_value > 1e-4
    # a wrong filter bandwidth is rejected
    wrong = fit_delay_histogram(hist, cavity.__class__(cavity.gamma, cavity.epsilon, 5 * cavity.gamma))
    assert wrong.p_value < 1e-6


def test_theory_table(cavity):
    cols = theory_table(cavity, 100e-9, 1e-9, kappas=[5.0])
    assert cols["tau_ns"][0] == pytest.approx(-50) and cols["tau_ns"][-1] == pytest.approx(50)
    assert set(cols) >= {"gamma_unfiltered", "gamma_filtered", "pdf_filtered", "pdf_filtered_k5"}


# --------------------------------------------------------------------------
# command line
# --------------------------------------------------------------------------


@pytest.fixture
def small_config(tmp_path):
    return write(tmp_path, "seed = 3\n[cavity]\nepsilon_over_gamma = 0.1\n"
                           "[simulation]\nsegment_count = 30\n[analysis]\nwindows_ns = '10:50:20'\n")


def test_cli_simulate_analyze_scan(tmp_path, small_config):
    ev = tmp_path / "ev.qevt"
    assert main(["simulate", "--config", str(small_config), "--out", str(ev)]) == 0
    out = tmp_path / "a.json"
    assert main(["analyze", "--events", str(ev), "--window-ns", "34", "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["provenance"]["code_version"] == __version__
    assert res["provenance"]["seed"] == 3
    assert res["R0"] > 0 and 0 < res["p0"] < 1
    scan = tmp_path / "s.csv"
    assert main(["scan", "--events", str(ev), "--windows", "10:50:20", "--out", str(scan)]) == 0
    rows = list(csv.DictReader(scan.open()))
    assert [float(r["window_ns"]) for r in rows] == [10.0, 30.0, 50.0]
    assert int(rows[1]["R0"]) == res["R0"]


def test_cli_csv_events(tmp_path, small_config):
    ev = tmp_path / "ev.csv"
    assert main(["simulate", "--config", str(small_config), "--out", str(ev), "--segments", "2"]) == 0
    assert ev.read_text().startswith("# segment_count=2")
    assert main(["analyze", "--events", str(ev), "--window-ns", "34", "--out", str(tmp_path / "x.json")]) == 0


def test_cli_witness(tmp_path, capsys):
    assert main(["witness", "--p0", "0.8", "--p1", "0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["W"] == pytest.approx(0.004859, abs=1e-6)
    assert main(["witness", "--r0", "200000", "--r1a", "17000", "--r1b", "17000", "--r2", "40"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["significance"] > 10 and out["converged"]


def test_cli_theory(tmp_path):
    p = tmp_path / "t.csv"
    assert main(["theory", "--preset", "fig3", "--out", str(p), "--range-ns", "20", "--step-ns", "1"]) == 0
    rows = list(csv.reader(p.open()))
    assert rows[0][:3] == ["tau_ns", "gamma_unfiltered", "gamma_filtered"]
    assert len(rows) == 22


def test_cli_failures(tmp_path, capsys):
    bad = write(tmp_path, "[cavity]\nepsilon_over_gamma = 1.2\n")
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "x")]) != 0
    assert "below-threshold" in capsys.readouterr().err
    assert main(["analyze", "--events", str(tmp_path / "missing.qevt"), "--window-ns", "5"]) != 0
    garbage = tmp_path / "g.qevt"
    garbage.write_bytes(b"not an event file")
    assert main(["analyze", "--events", str(garbage), "--window-ns", "5"]) != 0
    with pytest.raises(SystemExit):
        main(["reproduce", "--target", "fig9"])


def test_cli_reproduce_wmax(tmp_path):
    assert main(["reproduce", "--target", "wmax", "--out-dir", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "wmax.json").read_text())
    assert res["W"] == pytest.approx(0.00486, abs=2e-4)
    assert res["provenance"]["code_version"] == __version__


def test_cli_reproduce_small_figure(tmp_path, small_config):
    args = ["reproduce", "--target", "fig3", "--config", str(small_config), "--out-dir", str(tmp_path)]
    assert main(args) == 0
    res = json.loads((tmp_path / "fig3.json").read_text())
    assert res["provenance"]["seed"] == 3
    assert res["channel_counts"]["TRIGGER"] > 0
    rows = list(csv.DictReader((tmp_path / "fig3_histogram.csv").open()))
    assert len(rows) == 100
    assert (tmp_path / "fig3_threefold.csv").exists()


@pytest.mark.slow
def test_simulated_witness_below_prediction():
    from heralded_qng.coincidence import scan_windows
    from heralded_qng.event_sim import simulate_stream
    from heralded_qng.qng import predict_max_witness

    cfg = preset_config("fig3")
    rows = [analyze_counts(c) for c in scan_windows(simulate_stream(cfg.sim), cfg.windows)]
    best = max(r["W"] for r in rows)
    assert 0 < best < predict_max_witness(eta_S=0.2, nbar=1e-6).W


@pytest.mark.slow
def test_reproduce_scans(tmp_path):
    assert main(["reproduce", "--target", "g2_scan", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "g2_scan.csv").open()))
    low = [r for r in rows if float(r["epsilon_over_gamma"]) == 0.1 and float(r["window_ns"]) <= 34]
    assert len(low) == 17 and all(float(r["g2"]) < 0.05 for r in low)
    assert {float(r["epsilon_over_gamma"]) for r in rows} == {0.1, 0.16, 0.28}
    assert main(["reproduce", "--target", "witness_scan", "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "witness_scan.csv").open()))
    high = [float(r["significance"]) for r in rows if float(r["epsilon_over_gamma"]) == 0.28]
    assert len(high) == 150 and max(high) <= 0
