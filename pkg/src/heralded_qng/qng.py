"""Quantum non-Gaussianity witness ``W(a) = p1 + a p0 - W_G(a)``.

``W_G(a)`` is the largest value of ``p1 + a p0`` over Gaussian states and
their mixtures.  The objective is linear in the state, so the maximum is
attained on a pure squeezed coherent state.  For photon-number statistics
only the squeezing ``r`` (signed) and a displacement along the squeezing axis
matter, and for fixed ``r`` the best displacement has a closed form, which
leaves a one-dimensional search over ``r``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .estimators import PhotonStats, estimate_from_rates
from .fock_oracle import DEFAULT_CUTOFF, LossModel, detection_outcome_probs

A_MIN = -5.0
R_GRID = np.linspace(-3.0, 3.0, 101)
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
R_TOL = 1e-12
A_TOL = 1e-9


class BoundaryError(RuntimeError):
    """The Gaussian-boundary search did not converge inside its domain."""


def _profile(r, a):
    """``max_u e^{-u k} (b u + a) / cosh r``: best value at squeezing ``r`` over ``u = alpha^2 >= 0``."""
    ch = np.cosh(r)
    k = 1.0 + np.tanh(r)
    b = np.exp(2.0 * r) / (ch * ch)
    u = np.maximum(0.0, 1.0 / k - a / b)
    return np.exp(-u * k) * (b * u + a) / ch


def _golden_max(f, lo, hi, tol):
    """Vectorized golden-section maximization of a unimodal ``f`` on ``[lo, hi]``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    width = float(np.max(hi - lo)) if lo.size else 0.0
    n_iter = max(0, int(np.ceil(np.log(tol / width) / np.log(GOLDEN)))) if width > tol else 0
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(n_iter):
        left = f1 >= f2
        # left: maximum in [lo, x2], old x1 becomes new x2; else mirror
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        keep_x, keep_f = np.where(left, x1, x2), np.where(left, f1, f2)
        new_x = np.where(left, hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo))
        new_f = f(new_x)
        x1 = np.where(left, new_x, keep_x)
        f1 = np.where(left, new_f, keep_f)
        x2 = np.where(left, keep_x, new_x)
        f2 = np.where(left, keep_f, new_f)
    x = 0.5 * (lo + hi)
    return x, f(x), hi - lo


def _boundary_search(a):
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if np.any(a >= 1.0):
        raise ValueError("witness parameter a must be below 1")
    vals = _profile(R_GRID[None, :], a[:, None])
    j = np.argmax(vals, axis=1)
    if np.any((j == 0) | (j == R_GRID.size - 1)):
        bad = a[(j == 0) | (j == R_GRID.size - 1)]
        raise BoundaryError(f"Gaussian boundary maximum left the squeezing grid for a = {bad[:3]}")
    lo, hi = R_GRID[j - 1], R_GRID[j + 1]
    r, best, width = _golden_max(lambda rr: _profile(rr, a), lo, hi, R_TOL)
    if np.any(width > 10 * R_TOL):
        raise BoundaryError("golden-section refinement of the Gaussian boundary did not converge")
    return r, best


def gaussian_boundary_array(a) -> np.ndarray:
    """Vectorized, uncached ``W_G(a)``."""
    return _boundary_search(a)[1]


_cache: dict[float, float] = {}
_cache_lock = threading.Lock()


def gaussian_boundary(a: float) -> float:
    """Maximum of ``p1 + a p0`` over Gaussian states (cached by ``a``)."""
    a = float(a)
    hit = _cache.get(a)
    if hit is not None:
        return hit
    value = float(gaussian_boundary_array(a)[0])
    with _cache_lock:
        _cache.setdefault(a, value)
    return value


def boundary_state(a: float) -> tuple[float, float]:
    """``(r, d)`` of the extremal state, with ``d`` the displacement applied before squeezing."""
    r, _ = _boundary_search(a)
    r = float(r[0])
    ch, k = np.cosh(r), 1.0 + np.tanh(r)
    b = np.exp(2 * r) / ch**2
    alpha = np.sqrt(max(0.0, 1.0 / k - a / b))
    return r, float(alpha * np.exp(r))


# --------------------------------------------------------------------------
# witness evaluation and optimization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class WitnessResult:
    a: float
    W: float
    delta_W: float
    significance: float
    boundary: float
    converged: bool = True

    @property
    def certifies_qng(self) -> bool:
        return self.W > 0


class WitnessMaximum(NamedTuple):
    a: float
    W: float
    boundary: float
    p0: float
    p1: float


def _delta_w(stats: PhotonStats, a):
    return np.sqrt(stats.var_p1 + a * a * stats.var_p0 + 2 * a * stats.cov_p0p1)


def evaluate_witness(stats: PhotonStats, a: float) -> WitnessResult:
    """Witness value and its statistical error at a fixed parameter ``a``."""
    if not a < 1:
        raise ValueError("witness parameter a must be below 1")
    wg = gaussian_boundary(a)
    w = stats.p1 + a * stats.p0 - wg
    dw = float(_delta_w(stats, a))
    sig = w / dw if dw > 0 else np.copysign(np.inf, w) if w != 0 else np.nan
    return WitnessResult(a=float(a), W=float(w), delta_W=dw, significance=float(sig), boundary=wg)


_A_GRID = None


def a_grid() -> np.ndarray:
    """Coarse search grid on ``(A_MIN, 1)``, dense near ``a = 1`` where weak states need it."""
    global _A_GRID
    if _A_GRID is None:
        g = 1.0 - np.logspace(-7, np.log10(1.0 - A_MIN), 241)
        _A_GRID = np.sort(g)
    return _A_GRID


_GRID_WG = None


def _grid_boundary() -> np.ndarray:
    global _GRID_WG
    if _GRID_WG is None:
        _GRID_WG = gaussian_boundary_array(a_grid())
    return _GRID_WG


def _bracket(j, n):
    grid = a_grid()
    lo = grid[np.maximum(j - 1, 0)]
    hi = grid[np.minimum(j + 1, n - 1)]
    return lo, hi


def max_witness(p0, p1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Maximize ``W(a)`` over ``a`` for arrays of ``(p0, p1)``; returns ``(a, W, W_G(a))``.

    ``W`` is concave in ``a`` because ``W_G`` is convex.
    """
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    p1 = np.atleast_1d(np.asarray(p1, dtype=float))
    grid, wg = a_grid(), _grid_boundary()
    w_grid = p1[:, None] + grid[None, :] * p0[:, None] - wg[None, :]
    j = np.argmax(w_grid, axis=1)
    lo, hi = _bracket(j, grid.size)
    f = lambda a: p1 + a * p0 - gaussian_boundary_array(a)
    a, w, _ = _golden_max(f, lo, hi, A_TOL)
    return a, w, p1 + a * p0 - w


def witness_maximum(p0: float, p1: float) -> WitnessMaximum:
    a, w, wg = max_witness(p0, p1)
    return WitnessMaximum(float(a[0]), float(w[0]), float(wg[0]), float(p0), float(p1))


def optimize_witness_parameter(stats: PhotonStats) -> WitnessResult:
    """Choose ``a`` maximizing the significance ``W / Delta W``.

    Coarse grid followed by golden-section refinement.  When ``W(a) < 0`` on
    the whole grid the best (least negative) point is still returned, with
    ``converged=False``.
    """
    grid, wg = a_grid(), _grid_boundary()
    w = stats.p1 + grid * stats.p0 - wg
    dw = _delta_w(stats, grid)
    if not np.all(dw > 0):
        raise ValueError("witness significance needs positive variances")
    sig = w / dw
    j = int(np.argmax(sig))
    lo, hi = _bracket(np.array([j]), grid.size)

    def f(a):
        return (stats.p1 + a * stats.p0 - gaussian_boundary_array(a)) / _delta_w(stats, a)

    a_opt, _, _ = _golden_max(f, lo, hi, A_TOL)
    a_opt = float(a_opt[0])
    if f(np.array([a_opt]))[0] < sig[j]:
        a_opt = float(grid[j])
    res = evaluate_witness(stats, a_opt)
    if not np.any(w > 0):
        res = WitnessResult(res.a, res.W, res.delta_W, res.significance, res.boundary, converged=False)
    return res


def predict_max_witness(
    eta_S: float, eta_T: float = 1.0, nbar: float = 1e-6, split_T: float = 0.5, n_max: int = DEFAULT_CUTOFF
) -> WitnessMaximum:
    """Largest witness for a lossy two-mode squeezed vacuum source, from exact click rates."""
    loss = LossModel(eta_S=eta_S, eta_T=eta_T, split_T=split_T)
    out = detection_outcome_probs(nbar, loss, n_max)
    if out.trigger_A <= 0 or out.trigger_B <= 0:
        # no signal clicks at all: the heralded state is vacuum
        return witness_maximum(1.0, 0.0)
    stats = estimate_from_rates(out.trigger, out.trigger_A, out.trigger_B, out.trigger_AB)
    return witness_maximum(stats.p0, stats.p1)
