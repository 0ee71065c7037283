"""Closed-form pair correlation functions of a below-threshold SPDC cavity.

All rates are angular (rad/s) and all delays are in seconds.  The delay
``tau`` is the signal detection time minus the trigger detection time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERACY_TOL = 1e-6


class PhysicsError(ValueError):
    """Raised for parameters outside the validity range of the cavity model."""


@dataclass(frozen=True)
class CavityParams:
    gamma: float
    epsilon: float
    kappa: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise PhysicsError(f"gamma must be positive, got {self.gamma!r}")
        if not 0 <= abs(self.epsilon) < self.gamma:
            raise PhysicsError(
                f"|epsilon| must lie in [0, gamma) (below threshold); "
                f"got epsilon/gamma = {self.epsilon / self.gamma:.6g}"
            )
        if not self.kappa > 0:
            raise PhysicsError(f"kappa must be positive, got {self.kappa!r}")

    @property
    def lam(self) -> float:
        """Slow decay constant gamma - |epsilon|."""
        return self.gamma - abs(self.epsilon)

    @property
    def mu(self) -> float:
        """Fast decay constant gamma + |epsilon|."""
        return self.gamma + abs(self.epsilon)

    @classmethod
    def from_lab_units(
        cls, gamma_over_pi_mhz: float, epsilon_over_gamma: float, kappa_over_gamma: float
    ) -> "CavityParams":
        """Build from ``gamma = pi * X MHz`` notation and gamma-relative ratios."""
        gamma = np.pi * gamma_over_pi_mhz * 1e6
        return cls(gamma=gamma, epsilon=epsilon_over_gamma * gamma, kappa=kappa_over_gamma * gamma)


def gain_from_pump(pump_power: float, threshold_power: float, gamma: float) -> float:
    """Gain parameter ``gamma * sqrt(P / P_th)`` for a pump below threshold."""
    if not threshold_power > 0:
        raise PhysicsError(f"threshold power must be positive, got {threshold_power!r}")
    if pump_power < 0:
        raise PhysicsError(f"pump power must be nonnegative, got {pump_power!r}")
    if pump_power >= threshold_power:
        raise PhysicsError(
            f"pump power {pump_power!r} is at or above threshold {threshold_power!r}; "
            "the below-threshold model does not apply"
        )
    return gamma * np.sqrt(pump_power / threshold_power)


def correlation_unfiltered(params: CavityParams, tau):
    """Trigger/signal intensity correlation without extra signal filtering."""
    t = np.abs(np.asarray(tau, dtype=float))
    lam, mu = params.lam, params.mu
    amp = 0.5 * params.epsilon * params.gamma * (np.exp(-lam * t) / lam + np.exp(-mu * t) / mu)
    return amp * amp


def check_nondegenerate(params: CavityParams) -> None:
    """Reject kappa equal to lambda or mu, where the filtered closed form is singular."""
    g = params.gamma
    if abs(params.kappa - params.lam) / g < DEGENERACY_TOL or abs(params.kappa - params.mu) / g < DEGENERACY_TOL:
        raise PhysicsError(
            "kappa coincides with gamma -/+ |epsilon| (removable singularity of the "
            f"filtered correlation); kappa/gamma={params.kappa / g:.9g}, "
            f"lambda/gamma={params.lam / g:.9g}, mu/gamma={params.mu / g:.9g}"
        )


def correlation_filtered(params: CavityParams, tau):
    """Correlation with the signal mode passed through a one-pole filter of bandwidth kappa.

    Asymmetric in ``tau``: the filter only delays the signal, so the
    ``exp(-kappa |tau|)`` term vanishes for ``tau < 0``.
    """
    check_nondegenerate(params)
    tau = np.asarray(tau, dtype=float)
    t = np.abs(tau)
    pos = tau >= 0
    k = params.kappa
    inner = np.zeros_like(t)
    for nu in (params.lam, params.mu):
        # e^{-nu t}/(nu(k - nu)) - 2 e^{-k t}/(k^2 - nu^2) on the positive side, regrouped so
        # the difference of exponentials goes through expm1 (exact continuity at tau = 0)
        inner += np.exp(-nu * t) / (nu * (k + nu))
        gap = abs(k - nu)
        diff = np.exp(-min(nu, k) * t) * -np.expm1(-gap * t) / gap
        inner += np.where(pos, 2.0 * diff / (k + nu), 0.0)
    amp = 0.5 * params.gamma * params.epsilon * k * inner
    return amp * amp


def correlation(params: CavityParams, tau, filtered: bool = True):
    if filtered:
        return correlation_filtered(params, tau)
    return correlation_unfiltered(params, tau)


@dataclass(frozen=True)
class DelayPdf:
    """Tabulated, normalized trigger-to-signal delay density."""

    tau_grid: np.ndarray
    density: np.ndarray
    cumulative: np.ndarray

    def sample(self, u):
        """Inverse-CDF lookup for uniforms ``u`` in [0, 1); linear within grid cells."""
        u = np.asarray(u, dtype=float)
        cdf = self.cumulative
        idx = np.searchsorted(cdf, u, side="right")
        idx = np.clip(idx, 1, len(cdf) - 1)
        lo, hi = cdf[idx - 1], cdf[idx]
        width = hi - lo
        frac = np.divide(u - lo, width, out=np.zeros_like(u), where=width > 0)
        t0 = self.tau_grid[idx - 1]
        return t0 + frac * (self.tau_grid[idx] - t0)


def delay_pdf(
    params: CavityParams,
    filtered: bool = True,
    range: float = 1e-6,
    resolution: float = 0.05e-9,
) -> DelayPdf:
    """Normalize the correlation function into a sampling density on ``[-range/2, range/2]``."""
    half = 0.5 * range
    if half < 10.0 / params.lam:
        raise PhysicsError(
            f"delay range +/-{half:.3g} s is shorter than 10/lambda = {10.0 / params.lam:.3g} s"
        )
    fastest = max(params.mu, params.kappa) if filtered else params.mu
    if resolution > 0.1 / fastest:
        raise PhysicsError(
            f"resolution {resolution:.3g} s exceeds 0.1 of the fastest decay time "
            f"({0.1 / fastest:.3g} s)"
        )
    n = int(round(range / resolution))
    tau = np.linspace(-half, half, n + 1)
    dens = correlation(params, tau, filtered=filtered)
    steps = 0.5 * (dens[1:] + dens[:-1]) * np.diff(tau)
    cum = np.concatenate(([0.0], np.cumsum(steps)))
    total = cum[-1]
    return DelayPdf(tau_grid=tau, density=dens / total, cumulative=cum / total)


def pair_flux(params: CavityParams, filtered: bool = False) -> float:
    """Integral of the correlation function over all delays (pairs per second)."""
    from scipy.integrate import quad

    f = lambda t: float(correlation(params, t, filtered=filtered))
    scale = 1.0 / params.lam
    neg, _ = quad(f, -60 * scale, 0.0, limit=200)
    pos, _ = quad(f, 0.0, 60 * scale, limit=200)
    return neg + pos


def upconversion_efficiency(zeta: float, t: float) -> float:
    """Fraction of the fundamental converted after interaction time ``t``."""
    return float(np.sin(zeta * t) ** 2)
