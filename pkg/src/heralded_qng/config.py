"""Run configuration: TOML files with ``[cavity]``, ``[losses]``, ``[simulation]``,
``[analysis]`` and ``[output]`` sections, plus named presets.

Rates are calibrated to a trigger count rate.  Unless ``pair_rate_hz`` or
``trigger_rate_hz`` is given, the trigger rate is
``reference_trigger_rate_hz * (epsilon / reference_epsilon)^2``.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .event_sim import SimConfig, pair_rate_for_trigger_rate
from .fock_oracle import LossModel
from .physics import CavityParams, PhysicsError, check_nondegenerate


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "seed": 20150601,
    "cavity": {
        "gamma_over_pi_mhz": 31.0,
        "kappa_over_gamma": 1.4,
        "filtered": True,
    },
    "losses": {
        # 0.68 propagation (incl. up-conversion) x 0.65 APD quantum efficiency
        "eta_S": 0.44,
        "eta_T": 0.10,
        "split_T": 0.5,
        "dark_rate_T": 500.0,
        "dark_rate_A": 250.0,
        "dark_rate_B": 250.0,
        "false_trigger_fraction": 0.55,
    },
    "simulation": {
        "segment_count": 2000,
        "segment_duration_ms": 2.0,
        "dead_time_ns": 0.0,
        "reference_trigger_rate_hz": 50e3,
        "reference_epsilon_over_gamma": 0.10,
    },
    "analysis": {
        "windows_ns": "2:300:2",
        "histogram_bin_ns": 2.0,
        "histogram_range_ns": 200.0,
        "threefold_window_ns": 100.0,
    },
    "output": {"dir": "results"},
}

OPTIONAL_KEYS = {
    "cavity": {"epsilon_over_gamma"},
    "losses": {"false_trigger_rate"},
    "simulation": {"pair_rate_hz", "trigger_rate_hz"},
}

PRESETS = {
    "fig3": {"cavity": {"epsilon_over_gamma": 0.10}},
    "low": {"cavity": {"epsilon_over_gamma": 0.10}},
    "mid": {"cavity": {"epsilon_over_gamma": 0.16}},
    "fig4": {"cavity": {"epsilon_over_gamma": 0.28}},
    "high": {"cavity": {"epsilon_over_gamma": 0.28}},
}


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig
    windows: tuple
    histogram_bin: float
    histogram_range: float
    threefold_window: float
    output_dir: Path
    target: str | None
    raw: dict

    @property
    def epsilon_over_gamma(self) -> float:
        return self.sim.cavity.epsilon / self.sim.cavity.gamma

    @property
    def trigger_rate(self) -> float:
        from .stream import Channel

        return self.sim.channel_rates()[Channel.TRIGGER]


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict):
            if k not in out or not isinstance(out[k], dict):
                raise ConfigError(f"unknown section [{where}{k}]")
            out[k] = _merge(out[k], v, f"{where}{k}.")
        else:
            out[k] = v
    return out


def _check_keys(data: dict) -> None:
    for k, v in data.items():
        if k in ("preset", "seed", "target"):
            continue
        if k not in DEFAULTS or not isinstance(DEFAULTS[k], dict):
            raise ConfigError(f"unknown top-level key or section {k!r}")
        if not isinstance(v, dict):
            raise ConfigError(f"{k!r} must be a section")
        allowed = set(DEFAULTS[k]) | OPTIONAL_KEYS.get(k, set())
        for key in v:
            if key not in allowed:
                raise ConfigError(f"unknown key {k}.{key}; expected one of {sorted(allowed)}")


def _number(d: dict, section: str, key: str, cond=None, what: str = "") -> float:
    v = d[section][key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}")
    if cond is not None and not cond(v):
        raise ConfigError(f"{section}.{key} = {v!r} violates {what}")
    return float(v)


def _windows(spec) -> tuple:
    from .pipeline import parse_window_range

    if isinstance(spec, str):
        try:
            return tuple(parse_window_range(spec).tolist())
        except ValueError as exc:
            raise ConfigError(f"analysis.windows_ns: {exc}") from None
    if isinstance(spec, list) and spec and all(isinstance(x, (int, float)) for x in spec):
        return tuple(float(x) * 1e-9 for x in spec)
    raise ConfigError(f"analysis.windows_ns must be 'lo:hi:step' or a list of numbers, got {spec!r}")


def build_run_config(data: dict) -> RunConfig:
    """Validate a parsed config mapping and fill defaults."""
    _check_keys(data)
    preset = data.get("preset")
    merged = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        merged = _merge(merged, PRESETS[preset])
    merged = _merge(merged, {k: v for k, v in data.items() if k != "preset"})
    if preset is not None:
        merged["preset"] = preset

    if "epsilon_over_gamma" not in merged["cavity"]:
        raise ConfigError("cavity.epsilon_over_gamma is required (there is no default gain)")
    g_mhz = _number(merged, "cavity", "gamma_over_pi_mhz", lambda v: v > 0, "gamma > 0")
    eps = _number(merged, "cavity", "epsilon_over_gamma", lambda v: 0 <= v < 1,
                  "below-threshold operation 0 <= epsilon/gamma < 1")
    kap = _number(merged, "cavity", "kappa_over_gamma", lambda v: v > 0, "kappa > 0")
    filtered = merged["cavity"]["filtered"]
    if not isinstance(filtered, bool):
        raise ConfigError("cavity.filtered must be true or false")
    try:
        cavity = CavityParams.from_lab_units(g_mhz, eps, kap)
        if filtered:
            check_nondegenerate(cavity)
    except PhysicsError as exc:
        raise ConfigError(str(exc)) from None

    L = merged["losses"]
    for key in ("eta_S", "eta_T"):
        _number(merged, "losses", key, lambda v: 0 <= v <= 1, "0 <= value <= 1")
    _number(merged, "losses", "split_T", lambda v: 0 < v < 1, "0 < split_T < 1")
    for key in ("dark_rate_T", "dark_rate_A", "dark_rate_B"):
        _number(merged, "losses", key, lambda v: v >= 0, "rate >= 0")

    S = merged["simulation"]
    if "pair_rate_hz" in S and "trigger_rate_hz" in S:
        raise ConfigError("give at most one of simulation.pair_rate_hz and simulation.trigger_rate_hz")
    if "trigger_rate_hz" in S:
        trig = _number(merged, "simulation", "trigger_rate_hz", lambda v: v > 0, "rate > 0")
    else:
        ref = _number(merged, "simulation", "reference_trigger_rate_hz", lambda v: v > 0, "rate > 0")
        ref_eps = _number(merged, "simulation", "reference_epsilon_over_gamma", lambda v: v > 0, "ratio > 0")
        trig = ref * (eps / ref_eps) ** 2

    if "false_trigger_rate" in L:
        false_rate = _number(merged, "losses", "false_trigger_rate", lambda v: v >= 0, "rate >= 0")
    else:
        frac = _number(merged, "losses", "false_trigger_fraction", lambda v: 0 <= v < 1, "0 <= fraction < 1")
        false_rate = frac * trig
    loss = LossModel(
        eta_S=float(L["eta_S"]), eta_T=float(L["eta_T"]), split_T=float(L["split_T"]),
        dark_rate_T=float(L["dark_rate_T"]), dark_rate_A=float(L["dark_rate_A"]),
        dark_rate_B=float(L["dark_rate_B"]), false_trigger_rate=false_rate,
    )
    if "pair_rate_hz" in S:
        pair_rate = _number(merged, "simulation", "pair_rate_hz", lambda v: v >= 0, "rate >= 0")
    else:
        try:
            pair_rate = pair_rate_for_trigger_rate(trig, loss)
        except ValueError as exc:
            raise ConfigError(f"rate calibration failed: {exc}") from None

    seg_count = S["segment_count"]
    if isinstance(seg_count, bool) or not isinstance(seg_count, int) or seg_count < 1:
        raise ConfigError(f"simulation.segment_count must be a positive integer, got {seg_count!r}")
    seg_dur = _number(merged, "simulation", "segment_duration_ms", lambda v: v > 0, "duration > 0") * 1e-3
    dead = _number(merged, "simulation", "dead_time_ns", lambda v: v >= 0, "dead time >= 0") * 1e-9
    seed = merged["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    sim = SimConfig(cavity=cavity, pair_rate=pair_rate, loss=loss, segment_count=seg_count,
                    segment_duration=seg_dur, dead_time=dead, rng_seed=seed, filtered=filtered)

    A = merged["analysis"]
    windows = _windows(A["windows_ns"])
    if any(not 0 < w < seg_dur for w in windows):
        raise ConfigError("analysis.windows_ns must lie strictly between 0 and the segment duration")
    hb = _number(merged, "analysis", "histogram_bin_ns", lambda v: v > 0, "bin > 0") * 1e-9
    hr = _number(merged, "analysis", "histogram_range_ns", lambda v: v > 0, "range > 0") * 1e-9
    tw = _number(merged, "analysis", "threefold_window_ns", lambda v: v > 0, "window > 0") * 1e-9
    out_dir = Path(str(merged["output"]["dir"]))
    return RunConfig(sim=sim, windows=windows, histogram_bin=hb, histogram_range=hr,
                     threefold_window=tw, output_dir=out_dir, target=merged.get("target"), raw=merged)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return build_run_config(data)


def preset_config(name: str, **sections) -> RunConfig:
    """Config for a named preset; keyword arguments are section overrides."""
    data = {"preset": name}
    data.update(sections)
    return build_run_config(data)


def gain_presets() -> dict[str, float]:
    return {k: PRESETS[k]["cavity"]["epsilon_over_gamma"] for k in ("low", "mid", "high")}


def config_echo(cfg: RunConfig) -> dict:
    """JSON-safe copy of the effective configuration."""
    def clean(v):
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (np.floating, np.integer)):
            return v.item()
        return v

    echo = clean(cfg.raw)
    echo["derived"] = {"pair_rate_hz": cfg.sim.pair_rate, "trigger_rate_hz": cfg.trigger_rate,
                       "false_trigger_rate_hz": cfg.sim.loss.false_trigger_rate}
    return echo
