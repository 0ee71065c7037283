"""Analysis chain shared by the CLI: counts -> statistics -> witness, and histogram fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats as sps
from scipy.integrate import quad

from .coincidence import CoincidenceCounts, DelayHistogram, scan_windows
from .estimators import EstimationError, estimate_probabilities, g2_zero
from .physics import CavityParams, correlation, pair_flux
from .qng import optimize_witness_parameter
from .stream import EventStream

RESULT_KEYS = ("p0", "p1", "var_p0", "var_p1", "g2", "g2_err", "a_opt", "W", "dW", "significance")


def analyze_counts(counts: CoincidenceCounts) -> dict:
    """Full statistics for one window; values are NaN where estimation is undefined."""
    # windows are counted on a 1 ps grid; rounding drops float noise from the seconds conversion
    row = {"window_ns": None if counts.window is None else round(counts.window * 1e9, 3),
           "R0": counts.R0, "R1A": counts.R1A, "R1B": counts.R1B, "R2": counts.R2}
    row.update({k: float("nan") for k in RESULT_KEYS})
    try:
        st = estimate_probabilities(counts)
    except EstimationError:
        return row
    row.update(p0=st.p0, p1=st.p1, var_p0=st.var_p0, var_p1=st.var_p1)
    try:
        g2 = g2_zero(st)
        row.update(g2=g2.value, g2_err=g2.error)
    except EstimationError:
        pass
    if st.var_p0 > 0 and st.var_p1 > 0:
        wr = optimize_witness_parameter(st)
        row.update(a_opt=wr.a, W=wr.W, dW=wr.delta_W, significance=wr.significance)
    return row


def window_scan(stream: EventStream, windows) -> list[dict]:
    return [analyze_counts(c) for c in scan_windows(stream, windows)]


def parse_window_range(spec: str) -> np.ndarray:
    """``"lo:hi:step"`` in ns (inclusive of ``hi``) -> windows in seconds."""
    try:
        lo, hi, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ValueError(f"window range must look like lo:hi:step (ns), got {spec!r}") from None
    if not (lo > 0 and hi >= lo and step > 0):
        raise ValueError(f"invalid window range {spec!r}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return (lo + step * np.arange(n)) * 1e-9


# --------------------------------------------------------------------------
# delay-histogram model: scaled correlation curve plus flat accidentals
# --------------------------------------------------------------------------


def bin_masses(cavity: CavityParams, edges, filtered: bool = True) -> np.ndarray:
    """Fraction of all correlated pairs whose delay falls in each bin (adaptive quadrature)."""
    total = pair_flux(cavity, filtered=filtered)
    f = lambda t: float(correlation(cavity, t, filtered=filtered))
    out = np.empty(len(edges) - 1)
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        pts = [0.0] if lo < 0 < hi else None
        out[i] = quad(f, lo, hi, points=pts, limit=100, epsabs=0.0, epsrel=1e-10)[0]
    return out / total


@dataclass(frozen=True)
class HistogramFit:
    amplitude: float
    background: float
    expected: np.ndarray
    chi2: float
    dof: int
    p_value: float


def fit_delay_histogram(hist: DelayHistogram, cavity: CavityParams, filtered: bool = True) -> HistogramFit:
    """Poisson maximum-likelihood fit of ``amplitude * bin_mass + background``; Pearson chi-square."""
    n = hist.counts.astype(float)
    m = bin_masses(cavity, hist.bin_edges, filtered)

    def nll(x):
        e = x[0] * m + x[1]
        return float(np.sum(e - n * np.log(e)))

    a0 = max(n.sum() - n.size * np.median(n[:5]), 1.0)
    b0 = max(float(np.median(n[:5])), 0.5)
    res = optimize.minimize(nll, [a0, b0], method="L-BFGS-B", bounds=[(1e-9, None), (1e-9, None)],
                            options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 2000})
    amp, bg = res.x
    e = amp * m + bg
    chi2 = float(np.sum((n - e) ** 2 / e))
    dof = n.size - 2
    return HistogramFit(float(amp), float(bg), e, chi2, dof, float(sps.chi2.sf(chi2, dof)))
