"""Command-line entry point: ``heralded-qng <subcommand>``.

CSV outputs
-----------
scan / g2_scan / witness_scan rows:
    epsilon_over_gamma (reproduce only), window_ns, R0, R1A, R1B, R2,
    p0, p1, var_p0, var_p1, g2, g2_err, a_opt, W, dW, significance
theory:
    tau_ns, gamma_unfiltered, gamma_filtered, pdf_unfiltered, pdf_filtered,
    then pdf_filtered_k<kappa/gamma> per requested filter bandwidth
fig3 / fig4 histograms:
    bin_lo_ns, bin_hi_ns, counts_TA, counts_TB, model_TA, model_TB
fig3 / fig4 three-fold histogram:
    bin_lo_ns, bin_hi_ns, counts_AB
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .coincidence import count_coincidences, delay_histogram, scan_windows, threefold_delay_histogram
from .config import ConfigError, RunConfig, config_echo, gain_presets, load_config, preset_config
from .estimators import estimate_from_rates
from .event_sim import simulate_stream
from .physics import CavityParams, correlation_filtered, correlation_unfiltered, delay_pdf
from .pipeline import RESULT_KEYS, analyze_counts, fit_delay_histogram, parse_window_range
from .qng import optimize_witness_parameter, predict_max_witness, witness_maximum
from .stream import Channel, EventStream, read_stream, write_stream

log = logging.getLogger("heralded_qng")

TARGETS = ("fig3", "fig4", "g2_scan", "witness_scan", "wmax")
SCAN_COLUMNS = ("window_ns", "R0", "R1A", "R1B", "R2") + RESULT_KEYS


def _provenance(extra: dict | None = None) -> dict:
    out = {"code_version": __version__}
    if extra:
        out.update(extra)
    return out


def _write_json(obj, path: Path | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def _stream_meta(stream: EventStream, path: Path) -> dict:
    """Stream geometry plus the seed and config recorded by ``simulate``, when available."""
    meta = {"segment_count": stream.segment_count, "segment_duration_ps": stream.segment_duration_ps,
            "events": len(stream), "seed": None}
    side = _sidecar(path)
    if side.exists():
        rec = json.loads(side.read_text())
        meta["seed"] = rec.get("seed")
        meta["simulation_config"] = rec.get("config")
    return meta


def _config_for(args) -> RunConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = preset_config(getattr(args, "preset", None) or "fig3")
    if getattr(args, "seed", None) is not None:
        cfg = RunConfig(**{**cfg.__dict__, "sim": cfg.sim.with_(rng_seed=args.seed)})
    if getattr(args, "segments", None) is not None:
        cfg = RunConfig(**{**cfg.__dict__, "sim": cfg.sim.with_(segment_count=args.segments)})
    return cfg


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config_for(args)
    stream = simulate_stream(cfg.sim)
    out = Path(args.out)
    write_stream(stream, out)
    _write_json(_provenance({"seed": cfg.sim.rng_seed, "config": config_echo(cfg)}), _sidecar(out))
    log.info("wrote %d events (%s) to %s", len(stream), stream.counts_per_channel(), args.out)
    return 0


def _read(args) -> EventStream:
    path = Path(args.events)
    if path.suffix.lower() == ".csv" and args.segment_duration_ms is not None:
        from .stream import from_csv

        with open(path, newline="") as fh:
            return from_csv(fh, segment_duration_ps=int(round(args.segment_duration_ms * 1e9)))
    return read_stream(path)


def cmd_analyze(args) -> int:
    stream = _read(args)
    counts = count_coincidences(stream, args.window_ns * 1e-9)
    row = analyze_counts(counts)
    row["provenance"] = _provenance({"events": str(args.events), **_stream_meta(stream, Path(args.events))})
    _write_json(row, Path(args.out) if args.out else None)
    return 0


def _scan_rows(stream: EventStream, windows, prefix=()):
    rows = []
    for c in scan_windows(stream, windows):
        r = analyze_counts(c)
        rows.append(list(prefix) + [r[k] for k in SCAN_COLUMNS])
    return rows


def cmd_scan(args) -> int:
    stream = _read(args)
    windows = parse_window_range(args.windows)
    _write_csv(Path(args.out), SCAN_COLUMNS, _scan_rows(stream, windows))
    return 0


def theory_table(cav: CavityParams, span: float, step: float, kappas=()):
    tau = np.arange(-0.5 * span, 0.5 * span + 0.5 * step, step)
    unf = correlation_unfiltered(cav, tau)
    fil = correlation_filtered(cav, tau)
    cols = {"tau_ns": tau * 1e9, "gamma_unfiltered": unf, "gamma_filtered": fil}
    p_u = delay_pdf(cav, filtered=False)
    p_f = delay_pdf(cav, filtered=True)
    cols["pdf_unfiltered"] = np.interp(tau, p_u.tau_grid, p_u.density)
    cols["pdf_filtered"] = np.interp(tau, p_f.tau_grid, p_f.density)
    for k in kappas:
        ck = CavityParams(cav.gamma, cav.epsilon, k * cav.gamma)
        pk = delay_pdf(ck, filtered=True, resolution=min(0.05e-9, 0.1 / max(ck.mu, ck.kappa)))
        cols[f"pdf_filtered_k{k:g}"] = np.interp(tau, pk.tau_grid, pk.density)
    return cols


def cmd_theory(args) -> int:
    cfg = preset_config(args.preset)
    kappas = [float(x) for x in args.kappas.split(",")] if args.kappas else []
    cols = theory_table(cfg.sim.cavity, args.range_ns * 1e-9, args.step_ns * 1e-9, kappas)
    names = list(cols)
    rows = np.column_stack([cols[n] for n in names]).tolist()
    _write_csv(Path(args.out), names, rows)
    return 0


def cmd_witness(args) -> int:
    counts = [args.r0, args.r1a, args.r1b, args.r2]
    if any(c is not None for c in counts):
        if any(c is None for c in counts):
            raise SystemExit("give all of --r0 --r1a --r1b --r2, or none")
        st = estimate_from_rates(*[float(c) for c in counts])
        res = optimize_witness_parameter(st)
        out = {"p0": st.p0, "p1": st.p1, "var_p0": st.var_p0, "var_p1": st.var_p1,
               "a_opt": res.a, "W": res.W, "dW": res.delta_W, "significance": res.significance,
               "boundary": res.boundary, "converged": res.converged}
    else:
        if args.p0 is None or args.p1 is None:
            raise SystemExit("give --p0 and --p1 (or the four count options)")
        m = witness_maximum(args.p0, args.p1)
        out = {"p0": m.p0, "p1": m.p1, "a_opt": m.a, "W": m.W, "boundary": m.boundary}
    out["provenance"] = _provenance()
    _write_json(out, Path(args.out) if args.out else None)
    return 0


# --------------------------------------------------------------------------
# reproduce
# --------------------------------------------------------------------------


def _histogram_target(cfg: RunConfig, out_dir: Path, tag: str) -> dict:
    stream = simulate_stream(cfg.sim)
    h_a = delay_histogram(stream, Channel.SIGNAL_A, cfg.histogram_bin, cfg.histogram_range)
    h_b = delay_histogram(stream, Channel.SIGNAL_B, cfg.histogram_bin, cfg.histogram_range)
    h3 = threefold_delay_histogram(stream, cfg.threefold_window, cfg.histogram_bin)
    fit_a = fit_delay_histogram(h_a, cfg.sim.cavity, cfg.sim.filtered)
    fit_b = fit_delay_histogram(h_b, cfg.sim.cavity, cfg.sim.filtered)
    e = h_a.bin_edges * 1e9
    _write_csv(out_dir / f"{tag}_histogram.csv",
               ["bin_lo_ns", "bin_hi_ns", "counts_TA", "counts_TB", "model_TA", "model_TB"],
               zip(e[:-1].tolist(), e[1:].tolist(), h_a.counts.tolist(), h_b.counts.tolist(),
                   fit_a.expected.tolist(), fit_b.expected.tolist()))
    e3 = h3.bin_edges * 1e9
    _write_csv(out_dir / f"{tag}_threefold.csv", ["bin_lo_ns", "bin_hi_ns", "counts_AB"],
               zip(e3[:-1].tolist(), e3[1:].tolist(), h3.counts.tolist()))
    summary = {
        "target": tag,
        "epsilon_over_gamma": cfg.epsilon_over_gamma,
        "channel_counts": {ch.name: n for ch, n in stream.counts_per_channel().items()},
        "fit_TA": {"amplitude": fit_a.amplitude, "background_per_bin": fit_a.background,
                   "chi2": fit_a.chi2, "dof": fit_a.dof, "p_value": fit_a.p_value},
        "fit_TB": {"amplitude": fit_b.amplitude, "background_per_bin": fit_b.background,
                   "chi2": fit_b.chi2, "dof": fit_b.dof, "p_value": fit_b.p_value},
        "threefold_total": int(h3.counts.sum()),
    }
    return summary


def _scan_target(cfg: RunConfig, out_dir: Path, tag: str, explicit: bool) -> dict:
    gains = [cfg.epsilon_over_gamma] if explicit else list(gain_presets().values())
    columns = ("epsilon_over_gamma",) + SCAN_COLUMNS
    rows = []
    for g in gains:
        if explicit:
            run = cfg
        else:
            run = preset_config("fig3", cavity={"epsilon_over_gamma": g}, seed=cfg.sim.rng_seed)
            run = RunConfig(**{**run.__dict__, "sim": run.sim.with_(segment_count=cfg.sim.segment_count),
                               "windows": cfg.windows})
        rows.extend(_scan_rows(simulate_stream(run.sim), run.windows, prefix=(g,)))
    if tag == "g2_scan":
        keep = ("epsilon_over_gamma", "window_ns", "R0", "R1A", "R1B", "R2", "p0", "p1", "g2", "g2_err")
    else:
        keep = ("epsilon_over_gamma", "window_ns", "R0", "R1A", "R1B", "R2", "p0", "p1",
                "a_opt", "W", "dW", "significance")
    idx = [columns.index(k) for k in keep]
    _write_csv(out_dir / f"{tag}.csv", keep, ([r[i] for i in idx] for r in rows))
    return {"target": tag, "gains": gains, "rows": len(rows)}


def _wmax_target(eta_S: float = 0.2) -> dict:
    m = predict_max_witness(eta_S=eta_S, eta_T=1.0, nbar=1e-6)
    curve = []
    for nbar in (1e-4, 1e-3, 1e-2, 1e-1):
        c = predict_max_witness(eta_S=eta_S, eta_T=1.0, nbar=nbar)
        curve.append({"nbar": nbar, "W": c.W, "a_opt": c.a, "p0": c.p0, "p1": c.p1})
    return {"target": "wmax", "eta_S": eta_S, "nbar": 1e-6, "W": m.W, "a_opt": m.a,
            "p0": m.p0, "p1": m.p1, "boundary": m.boundary, "versus_nbar": curve}


def run_target(target: str, cfg: RunConfig, out_dir: Path, explicit_config: bool = False) -> dict:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; choose from {TARGETS}")
    out_dir.mkdir(parents=True, exist_ok=True)
    if target in ("fig3", "fig4"):
        if not explicit_config:
            cfg2 = preset_config(target, seed=cfg.sim.rng_seed)
            cfg = RunConfig(**{**cfg2.__dict__, "sim": cfg2.sim.with_(segment_count=cfg.sim.segment_count)})
        summary = _histogram_target(cfg, out_dir, target)
    elif target in ("g2_scan", "witness_scan"):
        summary = _scan_target(cfg, out_dir, target, explicit_config)
    else:
        summary = _wmax_target()
    summary["provenance"] = _provenance({"seed": cfg.sim.rng_seed, "config": config_echo(cfg)})
    _write_json(summary, out_dir / f"{target}.json")
    return summary


def cmd_reproduce(args) -> int:
    cfg = _config_for(args)
    run_target(args.target, cfg, Path(args.out_dir or cfg.output_dir), explicit_config=bool(args.config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heralded-qng", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a detection-event stream")
    s.add_argument("--config", help="TOML run configuration (default: fig3 preset)")
    s.add_argument("--preset", choices=sorted(["fig3", "fig4", "low", "mid", "high"]))
    s.add_argument("--seed", type=int)
    s.add_argument("--segments", type=int)
    s.add_argument("--out", required=True, help="output file (.csv for CSV, anything else binary QEVT)")
    s.set_defaults(func=cmd_simulate)

    for name, helptext in (("analyze", "statistics and witness for one window"),
                           ("scan", "statistics over a range of windows")):
        a = sub.add_parser(name, help=helptext)
        a.add_argument("--events", required=True)
        a.add_argument("--segment-duration-ms", type=float,
                       help="segment length for CSV files without a metadata line")
        if name == "analyze":
            a.add_argument("--window-ns", type=float, required=True)
            a.add_argument("--out", help="JSON output (default stdout)")
            a.set_defaults(func=cmd_analyze)
        else:
            a.add_argument("--windows", required=True, help="lo:hi:step in ns, e.g. 2:300:2")
            a.add_argument("--out", required=True)
            a.set_defaults(func=cmd_scan)

    t = sub.add_parser("theory", help="tabulate the pair correlation curves")
    t.add_argument("--preset", default="fig3", choices=sorted(["fig3", "fig4", "low", "mid", "high"]))
    t.add_argument("--range-ns", type=float, default=200.0)
    t.add_argument("--step-ns", type=float, default=0.5)
    t.add_argument("--kappas", default="0.5,1.4,5", help="comma-separated kappa/gamma values")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_theory)

    w = sub.add_parser("witness", help="QNG witness from probabilities or counts")
    w.add_argument("--p0", type=float)
    w.add_argument("--p1", type=float)
    for opt in ("--r0", "--r1a", "--r1b", "--r2"):
        w.add_argument(opt, type=float)
    w.add_argument("--out")
    w.set_defaults(func=cmd_witness)

    r = sub.add_parser("reproduce", help="run a figure/result reproduction")
    r.add_argument("--target", required=True, choices=TARGETS)
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--segments", type=int)
    r.add_argument("--out-dir")
    r.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
