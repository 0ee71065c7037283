"""Event-stream inner loops.

Every kernel has a numba version (explicit loops, single pass) and a
vectorized numpy version.  Both operate on sorted int64 picosecond keys and
return identical integer results; the public wrappers pick one according to
:func:`heralded_qng._accel.numba_enabled`.
"""

from __future__ import annotations

import numpy as np

from ._accel import njit, numba_enabled

NO_CLICK = np.iinfo(np.int64).max // 4


# --------------------------------------------------------------------------
# window-scan classification
# --------------------------------------------------------------------------


@njit
def _scan_counts_nb(trig, a, b, widths):
    k = widths.shape[0]
    da = np.zeros(k + 1, dtype=np.int64)
    db = np.zeros(k + 1, dtype=np.int64)
    dab = np.zeros(k + 1, dtype=np.int64)
    ia = 0
    ib = 0
    na = a.shape[0]
    nb = b.shape[0]
    for i in range(trig.shape[0]):
        t = trig[i]
        while ia < na and a[ia] < t:
            ia += 1
        dist_a = NO_CLICK
        if ia < na:
            dist_a = a[ia] - t
        if ia > 0 and t - a[ia - 1] < dist_a:
            dist_a = t - a[ia - 1]
        while ib < nb and b[ib] < t:
            ib += 1
        dist_b = NO_CLICK
        if ib < nb:
            dist_b = b[ib] - t
        if ib > 0 and t - b[ib - 1] < dist_b:
            dist_b = t - b[ib - 1]
        ka = np.searchsorted(widths, 2 * dist_a)
        kb = np.searchsorted(widths, 2 * dist_b)
        if ka < kb:
            da[ka] += 1
            da[kb] -= 1
            dab[kb] += 1
        elif kb < ka:
            db[kb] += 1
            db[ka] -= 1
            dab[ka] += 1
        else:
            dab[ka] += 1
    out = np.zeros((k, 3), dtype=np.int64)
    ca = 0
    cb = 0
    cab = 0
    for j in range(k):
        ca += da[j]
        cb += db[j]
        cab += dab[j]
        out[j, 0] = ca
        out[j, 1] = cb
        out[j, 2] = cab
    return out


def _nearest_distance_np(t, clicks):
    if clicks.size == 0:
        return np.full(t.shape, NO_CLICK, dtype=np.int64)
    idx = np.searchsorted(clicks, t, side="left")
    right = np.where(idx < clicks.size, clicks[np.minimum(idx, clicks.size - 1)] - t, NO_CLICK)
    left = np.where(idx > 0, t - clicks[np.maximum(idx - 1, 0)], NO_CLICK)
    return np.minimum(left, right)


def _scan_counts_np(trig, a, b, widths):
    k = widths.size
    ka = np.searchsorted(widths, 2 * _nearest_distance_np(trig, a), side="left")
    kb = np.searchsorted(widths, 2 * _nearest_distance_np(trig, b), side="left")
    start_ab = np.maximum(ka, kb)
    a_first = ka < kb
    b_first = kb < ka
    da = np.bincount(ka[a_first], minlength=k + 1) - np.bincount(kb[a_first], minlength=k + 1)
    db = np.bincount(kb[b_first], minlength=k + 1) - np.bincount(ka[b_first], minlength=k + 1)
    dab = np.bincount(start_ab, minlength=k + 1)
    out = np.stack([np.cumsum(da)[:k], np.cumsum(db)[:k], np.cumsum(dab)[:k]], axis=1)
    return out.astype(np.int64)


def scan_counts(trig, a, b, widths):
    """Counts of (A only, B only, both) per full window width.

    A click at ``t_c`` falls in the window of a trigger at ``t`` when
    ``2 |t_c - t| <= width``.  ``widths`` must be sorted ascending.
    Returns an ``(len(widths), 3)`` int64 array.
    """
    trig = np.ascontiguousarray(trig, dtype=np.int64)
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    widths = np.ascontiguousarray(widths, dtype=np.int64)
    if numba_enabled():
        return _scan_counts_nb(trig, a, b, widths)
    return _scan_counts_np(trig, a, b, widths)


# --------------------------------------------------------------------------
# two-channel delay histogram
# --------------------------------------------------------------------------


@njit
def _delay_hist_nb(ref, target, half, bw, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    n_t = target.shape[0]
    lo = 0
    for i in range(ref.shape[0]):
        t = ref[i]
        while lo < n_t and target[lo] < t - half:
            lo += 1
        j = lo
        while j < n_t and target[j] <= t + half:
            k = (target[j] - t + half) // bw
            if k >= nbins:
                k = nbins - 1
            counts[k] += 1
            j += 1
    return counts


def _delay_hist_np(ref, target, half, bw, nbins, chunk=1 << 16):
    counts = np.zeros(nbins, dtype=np.int64)
    for s in range(0, ref.size, chunk):
        r = ref[s : s + chunk]
        lo = np.searchsorted(target, r - half, side="left")
        hi = np.searchsorted(target, r + half, side="right")
        n = hi - lo
        if n.sum() == 0:
            continue
        rep = np.repeat(r, n)
        offs = np.arange(n.sum()) - np.repeat(np.cumsum(n) - n, n)
        d = target[np.repeat(lo, n) + offs] - rep
        k = np.minimum((d + half) // bw, nbins - 1)
        counts += np.bincount(k, minlength=nbins)
    return counts


def delay_hist(ref, target, half, bw, nbins):
    """Histogram of ``target - ref`` over all pairs with ``|difference| <= half``."""
    ref = np.ascontiguousarray(ref, dtype=np.int64)
    target = np.ascontiguousarray(target, dtype=np.int64)
    if numba_enabled():
        return _delay_hist_nb(ref, target, np.int64(half), np.int64(bw), nbins)
    return _delay_hist_np(ref, target, int(half), int(bw), nbins)


# --------------------------------------------------------------------------
# three-fold A-B delay histogram
# --------------------------------------------------------------------------


@njit
def _nearest_signed_nb(t, clicks, pos):
    # returns (found, signed offset) of the click nearest to t; ties go to the earlier click
    n = clicks.shape[0]
    best = NO_CLICK
    found = False
    if pos > 0:
        best = clicks[pos - 1] - t
        found = True
    if pos < n:
        d = clicks[pos] - t
        if not found or d < -best:
            best = d
            found = True
    return found, best


@njit
def _threefold_nb(trig, a, b, half, bw, nbins):
    counts = np.zeros(nbins, dtype=np.int64)
    span_half = 2 * half
    ia = 0
    ib = 0
    for i in range(trig.shape[0]):
        t = trig[i]
        while ia < a.shape[0] and a[ia] < t:
            ia += 1
        while ib < b.shape[0] and b[ib] < t:
            ib += 1
        fa, oa = _nearest_signed_nb(t, a, ia)
        fb, ob = _nearest_signed_nb(t, b, ib)
        if fa and fb and abs(oa) <= half and abs(ob) <= half:
            k = (oa - ob + span_half) // bw
            if k >= nbins:
                k = nbins - 1
            counts[k] += 1
    return counts


def _nearest_signed_np(t, clicks):
    if clicks.size == 0:
        return np.full(t.shape, NO_CLICK, dtype=np.int64)
    idx = np.searchsorted(clicks, t, side="left")
    right = np.where(idx < clicks.size, clicks[np.minimum(idx, clicks.size - 1)] - t, NO_CLICK)
    left = np.where(idx > 0, clicks[np.maximum(idx - 1, 0)] - t, -NO_CLICK)
    return np.where(right < -left, right, left)


def _threefold_np(trig, a, b, half, bw, nbins):
    oa = _nearest_signed_np(trig, a)
    ob = _nearest_signed_np(trig, b)
    ok = (np.abs(oa) <= half) & (np.abs(ob) <= half)
    k = np.minimum((oa[ok] - ob[ok] + 2 * half) // bw, nbins - 1)
    return np.bincount(k, minlength=nbins).astype(np.int64)


def threefold_hist(trig, a, b, half, bw, nbins):
    """Histogram of ``t_A - t_B`` for the clicks nearest each trigger, both within ``half``."""
    trig = np.ascontiguousarray(trig, dtype=np.int64)
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if numba_enabled():
        return _threefold_nb(trig, a, b, np.int64(half), np.int64(bw), nbins)
    return _threefold_np(trig, a, b, int(half), int(bw), nbins)


# --------------------------------------------------------------------------
# non-paralyzable dead time
# --------------------------------------------------------------------------


@njit
def _dead_time_nb(times, dead):
    keep = np.zeros(times.shape[0], dtype=np.bool_)
    last = 0
    have = False
    for i in range(times.shape[0]):
        if not have or times[i] - last >= dead:
            keep[i] = True
            last = times[i]
            have = True
    return keep


def _dead_time_np(times, dead):
    keep = np.ones(times.size, dtype=bool)
    if times.size < 2:
        return keep
    gaps = np.diff(times)
    if np.all(gaps >= dead):
        return keep
    # exact fallback: only runs of closely spaced events need the sequential rule
    keep[:] = False
    last = None
    for i, t in enumerate(times.tolist()):
        if last is None or t - last >= dead:
            keep[i] = True
            last = t
    return keep


def dead_time_mask(times, dead):
    """Mask of events kept by a non-paralyzable detector with dead time ``dead`` (ps)."""
    times = np.ascontiguousarray(times, dtype=np.int64)
    if dead <= 0:
        return np.ones(times.size, dtype=bool)
    if numba_enabled():
        return _dead_time_nb(times, np.int64(dead))
    return _dead_time_np(times, int(dead))
