"""Photon-number probabilities and g2(0) from heralded coincidence counts.

Uncertainties use first-order propagation with ``R0, R1A, R1B, R2`` treated
as independent Poisson variables (``Var R = R``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .coincidence import CoincidenceCounts


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class PhotonStats:
    """Vacuum probability, single-photon lower bound and their covariance.

    ``p_multi`` is the multiphoton weight ``1 - p0 - p1``; it is carried
    separately so that it is exactly zero when no three-fold events occur.
    """

    p0: float
    p1: float
    split_T: float
    var_p0: float = 0.0
    var_p1: float = 0.0
    cov_p0p1: float = 0.0
    p_multi: float | None = None

    def __post_init__(self):
        if self.p_multi is None:
            object.__setattr__(self, "p_multi", 1.0 - self.p0 - self.p1)

    @classmethod
    def from_probabilities(cls, p0: float, p1: float, split_T: float = 0.5) -> "PhotonStats":
        """Exact (noise-free) statistics, e.g. from an oracle state."""
        return cls(float(p0), float(p1), split_T)

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_p0, self.cov_p0p1], [self.cov_p0p1, self.var_p1]])


def splitting_factor(T: float) -> float:
    """``(T^2 + (1-T)^2) / (2 T (1-T))``; equals 1 for a balanced splitter."""
    return (T * T + (1 - T) * (1 - T)) / (2 * T * (1 - T))


def estimate_from_rates(R0: float, R1A: float, R1B: float, R2: float) -> PhotonStats:
    """Same as :func:`estimate_probabilities` but accepts real-valued (expected) counts."""
    if not R0 > 0:
        raise EstimationError("no trigger events (R0 = 0)")
    if R1A <= 0 or R1B <= 0:
        raise EstimationError(
            f"degenerate beam-splitter ratio: R1A={R1A!r}, R1B={R1B!r} (both must be positive)"
        )
    R1 = R1A + R1B
    T = R1A / R1
    c = splitting_factor(T)
    p0 = 1.0 - (R1 + R2) / R0
    p1 = R1 / R0 - c * R2 / R0
    p_multi = (1.0 + c) * R2 / R0

    dc_dT = -(1 - 2 * T) / (2 * T * T * (1 - T) * (1 - T))
    dT_dA, dT_dB = R1B / (R1 * R1), -R1A / (R1 * R1)
    jac = np.array(
        [
            [(R1 + R2) / R0**2, -1 / R0, -1 / R0, -1 / R0],
            [
                -p1 / R0,
                1 / R0 - R2 / R0 * dc_dT * dT_dA,
                1 / R0 - R2 / R0 * dc_dT * dT_dB,
                -c / R0,
            ],
        ]
    )
    cov = (jac * np.array([R0, R1A, R1B, R2])) @ jac.T
    return PhotonStats(
        p0=float(p0),
        p1=float(p1),
        split_T=float(T),
        var_p0=float(cov[0, 0]),
        var_p1=float(cov[1, 1]),
        cov_p0p1=float(cov[0, 1]),
        p_multi=float(p_multi),
    )


def estimate_probabilities(counts: CoincidenceCounts) -> PhotonStats:
    """``p0`` and the lower bound on ``p1`` from two- and three-fold coincidences."""
    return estimate_from_rates(counts.R0, counts.R1A, counts.R1B, counts.R2)


class G2(NamedTuple):
    value: float
    variance: float

    @property
    def error(self) -> float:
        return float(np.sqrt(self.variance))


def g2_zero(stats: PhotonStats) -> G2:
    """``g2(0) = 2 (1 - p0 - p1) / (2 (1 - p0) - p1)^2`` with propagated variance."""
    denom = 2.0 * (1.0 - stats.p0) - stats.p1
    if not denom > 0:
        raise EstimationError("g2(0) undefined: 2(1-p0) - p1 <= 0 (no detected photons)")
    multi = stats.p_multi
    value = 2.0 * multi / denom**2
    d_p0 = -2.0 / denom**2 + 8.0 * multi / denom**3
    d_p1 = -2.0 / denom**2 + 4.0 * multi / denom**3
    grad = np.array([d_p0, d_p1])
    # analytically zero when R2 = 0; clip rounding noise
    var = max(float(grad @ stats.covariance @ grad), 0.0)
    return G2(float(value), var)
