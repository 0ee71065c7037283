"""Exact photon-number statistics in a truncated Fock basis.

Covers pure Gaussian states (squeezed coherent), the photon-number diagonal of
two-mode squeezed vacuum, pure-loss channels and click-detector outcome
probabilities for a heralded Hanbury Brown-Twiss measurement.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

DEFAULT_CUTOFF = 60
MAX_DEFICIT = 1e-6


class CutoffError(ValueError):
    """The Fock cutoff is too small to hold the requested state."""


@dataclass(frozen=True)
class FockDistribution:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a nonempty 1-D sequence")
        if np.any(p < -1e-15):
            raise ValueError(f"negative probability {p.min():.3g}")
        p = np.clip(p, 0.0, None)
        total = p.sum()
        if total > 1 + 1e-12:
            raise ValueError(f"probabilities sum to {total!r} > 1")
        if 1 - total > MAX_DEFICIT:
            raise CutoffError(
                f"truncation deficit {1 - total:.3g} at cutoff {p.size - 1} exceeds {MAX_DEFICIT:g}"
            )
        object.__setattr__(self, "probabilities", p)

    @property
    def cutoff(self) -> int:
        return self.probabilities.size - 1

    @property
    def deficit(self) -> float:
        return float(1.0 - self.probabilities.sum())

    def __getitem__(self, n):
        return self.probabilities[n]

    @property
    def p0(self) -> float:
        return float(self.probabilities[0])

    @property
    def p1(self) -> float:
        return float(self.probabilities[1])

    def mean(self) -> float:
        return float(np.arange(self.probabilities.size) @ self.probabilities)


@dataclass(frozen=True)
class LossModel:
    eta_S: float
    eta_T: float
    split_T: float = 0.5
    dark_rate_T: float = 0.0
    dark_rate_A: float = 0.0
    dark_rate_B: float = 0.0
    false_trigger_rate: float = 0.0

    def __post_init__(self):
        for name in ("eta_S", "eta_T"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v!r}")
        if not 0.0 < self.split_T < 1.0:
            raise ValueError(f"split_T must lie strictly inside (0, 1), got {self.split_T!r}")
        for name in ("dark_rate_T", "dark_rate_A", "dark_rate_B", "false_trigger_rate"):
            v = getattr(self, name)
            if not v >= 0.0:
                raise ValueError(f"{name} must be nonnegative, got {v!r}")


def gaussian_pure_amplitudes(r: float, alpha: complex, n_max: int) -> np.ndarray:
    """Fock amplitudes of ``D(alpha) S(r) |0>`` with ``S(r) = exp(r (a^2 - a^dag^2) / 2)``.

    Uses the three-term recurrence that follows from the annihilator
    ``(a - alpha) cosh r + (a^dag - alpha*) sinh r``.  The global phase is
    chosen so that ``c_0`` is real and nonnegative.
    """
    ch, sh = np.cosh(r), np.sinh(r)
    alpha = complex(alpha)
    lead = (alpha * ch + alpha.conjugate() * sh) / ch
    # |c_0|; the phase of c_0 drops out of every photon-number probability
    log_c0 = -0.5 * abs(alpha) ** 2 - 0.5 * (alpha.conjugate() ** 2 * np.tanh(r)).real - 0.5 * np.log(ch)
    c = np.zeros(n_max + 1, dtype=complex)
    c[0] = np.exp(log_c0)
    if n_max >= 1:
        c[1] = lead * c[0]
    t = sh / ch
    for n in range(1, n_max):
        c[n + 1] = (lead * c[n] - t * np.sqrt(n) * c[n - 1]) / np.sqrt(n + 1)
    return c


def squeezed_coherent_fock_probs(r: float, d: float, n_max: int = DEFAULT_CUTOFF) -> FockDistribution:
    """Photon statistics of vacuum displaced by real ``d`` and then squeezed by ``r``.

    ``S(r) D(d) |0> = D(d e^{-r}) S(r) |0>``, so the recurrence runs with the
    post-squeezing displacement ``d e^{-r}``.
    """
    if abs(r) > 5 or abs(d) > 10:
        raise ValueError(f"(r, d) = ({r!r}, {d!r}) outside |r| <= 5, |d| <= 10")
    if n_max < 20:
        raise ValueError(f"n_max must be at least 20, got {n_max}")
    amps = gaussian_pure_amplitudes(r, d * np.exp(-r), n_max)
    return FockDistribution(np.abs(amps) ** 2)


def thermal_probs(nbar: float, n_max: int = DEFAULT_CUTOFF) -> np.ndarray:
    n = np.arange(n_max + 1)
    if nbar == 0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    return np.exp(n * np.log(nbar) - (n + 1) * np.log1p(nbar))


def tmsv_joint_probs(nbar: float, n_max: int = DEFAULT_CUTOFF) -> FockDistribution:
    """Diagonal ``p_nn`` of two-mode squeezed vacuum with ``nbar`` photons per mode."""
    if not nbar >= 0:
        raise ValueError(f"nbar must be nonnegative, got {nbar!r}")
    return FockDistribution(thermal_probs(nbar, n_max))


def loss_matrix(eta: float, n_max: int) -> np.ndarray:
    """``M[m, n] = C(n, m) eta^m (1 - eta)^(n - m)`` for ``m <= n``."""
    n = np.arange(n_max + 1)
    nn, mm = np.meshgrid(n, n)
    mask = mm <= nn
    M = np.zeros((n_max + 1, n_max + 1))
    if eta == 0.0:
        M[0, :] = 1.0
        return M
    if eta == 1.0:
        return np.eye(n_max + 1)
    logc = gammaln(nn + 1) - gammaln(mm + 1) - gammaln(np.where(mask, nn - mm, 0) + 1)
    logp = logc + mm * np.log(eta) + (nn - mm) * np.log1p(-eta)
    M[mask] = np.exp(logp[mask])
    return M


def apply_loss(dist: FockDistribution, eta: float) -> FockDistribution:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    p = dist.probabilities
    return FockDistribution(loss_matrix(eta, p.size - 1) @ p)


class DetectionOutcomes(NamedTuple):
    """Per-window probabilities of the heralded HBT click patterns."""

    no_trigger: float
    trigger_only: float
    trigger_A: float
    trigger_B: float
    trigger_AB: float

    @property
    def trigger(self) -> float:
        return self.trigger_only + self.trigger_A + self.trigger_B + self.trigger_AB


def _trigger_click(n: np.ndarray, eta_T: float) -> np.ndarray:
    return 1.0 - (1.0 - eta_T) ** n


def detection_outcome_probs(nbar: float, loss: LossModel, n_max: int = DEFAULT_CUTOFF) -> DetectionOutcomes:
    """Exact click-pattern probabilities for one TMSV window with lossy click detectors."""
    pairs = tmsv_joint_probs(nbar, n_max).probabilities
    n = np.arange(n_max + 1)
    click_T = _trigger_click(n, loss.eta_T)
    eS, T = loss.eta_S, loss.split_T
    none = (1.0 - eS) ** n
    no_A = (1.0 - eS * T) ** n
    no_B = (1.0 - eS * (1.0 - T)) ** n
    a_only = no_B - none
    b_only = no_A - none
    # both detectors need at least two photons; keep n <= 1 exactly zero
    both = np.zeros_like(none)
    both[2:] = 1.0 - no_A[2:] - no_B[2:] + none[2:]
    w = pairs * click_T
    p_trig = float(w.sum())
    tA, tB, tAB = float(w @ a_only), float(w @ b_only), float(w @ both)
    return DetectionOutcomes(
        no_trigger=1.0 - p_trig,
        trigger_only=p_trig - tA - tB - tAB,
        trigger_A=tA,
        trigger_B=tB,
        trigger_AB=tAB,
    )


def heralded_fock_distribution(nbar: float, loss: LossModel, n_max: int = DEFAULT_CUTOFF) -> FockDistribution:
    """Signal photon-number distribution after signal loss, given a trigger click."""
    pairs = tmsv_joint_probs(nbar, n_max).probabilities
    w = pairs * _trigger_click(np.arange(n_max + 1), loss.eta_T)
    total = w.sum()
    if not total > 0:
        raise ZeroDivisionError("trigger click probability is zero; heralded state undefined")
    return apply_loss(FockDistribution(w / total), loss.eta_S)


def mixture(dists, weights) -> FockDistribution:
    weights = np.asarray(weights, dtype=float)
    probs = np.stack([d.probabilities for d in dists])
    return FockDistribution(weights / weights.sum() @ probs)
