"""Compiled inner loops.

Every kernel accumulates each output in a fixed order, so results are
bitwise reproducible and independent of how callers split work across
threads. All kernels release the GIL.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


# -- periodic two-channel filter bank ----------------------------------------
# Analysis:  lo[k] = sum_t h[t] * x[(2k + t) mod N]   (t ascending)
# Synthesis: x[j]  = sum_{t = j mod 2} h[t] lo[k] + g[t] hi[k],  k = ((j - t) mod N) / 2


@njit(**_JIT)
def analyze_rows(x, h, g, lo, hi):
    rows, n = x.shape
    mask = n - 1
    taps = h.shape[0]
    for r in range(rows):
        for k in range(n // 2):
            a = 0j
            d = 0j
            base = 2 * k
            for t in range(taps):
                v = x[r, (base + t) & mask]
                a += h[t] * v
                d += g[t] * v
            lo[r, k] = a
            hi[r, k] = d


@njit(**_JIT)
def analyze_cols(x, h, g, lo, hi):
    n, cols = x.shape
    mask = n - 1
    taps = h.shape[0]
    for k in range(n // 2):
        for c in range(cols):
            lo[k, c] = 0j
            hi[k, c] = 0j
        for t in range(taps):
            src = (2 * k + t) & mask
            ht = h[t]
            gt = g[t]
            for c in range(cols):
                v = x[src, c]
                lo[k, c] += ht * v
                hi[k, c] += gt * v


@njit(**_JIT)
def synthesize_rows(lo, hi, h, g, out):
    rows, half = lo.shape
    n = 2 * half
    mask = n - 1
    taps = h.shape[0]
    for r in range(rows):
        for j in range(n):
            acc = 0j
            for t in range(j & 1, taps, 2):
                k = ((j - t) & mask) >> 1
                acc += h[t] * lo[r, k] + g[t] * hi[r, k]
            out[r, j] = acc


@njit(**_JIT)
def synthesize_cols(lo, hi, h, g, out):
    half, cols = lo.shape
    n = 2 * half
    mask = n - 1
    taps = h.shape[0]
    for j in range(n):
        for c in range(cols):
            out[j, c] = 0j
        for t in range(j & 1, taps, 2):
            k = ((j - t) & mask) >> 1
            ht = h[t]
            gt = g[t]
            for c in range(cols):
                out[j, c] += ht * lo[k, c] + gt * hi[k, c]


# -- wavelet-domain superposition ---------------------------------------------


@njit(**_JIT)
def accumulate(acc, starts, band, m, n, value, band_r0, band_c0, band_size, band_factor, cls, qx, qy, amp):
    """Add amp[j] * value[k] at every shifted LUT entry of every point j.

    Returns (operations, dropped): one operation per visited entry; entries
    whose shifted index leaves their band are dropped.
    """
    ops = 0
    dropped = 0
    for j in range(cls.shape[0]):
        c = cls[j]
        a = amp[j]
        sx = qx[j]
        sy = qy[j]
        for k in range(starts[c], starts[c + 1]):
            b = band[k]
            f = band_factor[b]
            size = band_size[b]
            mm = m[k] + sx * f
            nn = n[k] + sy * f
            ops += 1
            if mm >= 0 and mm < size and nn >= 0 and nn < size:
                acc[band_r0[b] + nn, band_c0[b] + mm] += a * value[k]
            else:
                dropped += 1
    return ops, dropped


# -- space-domain patch stamping (N-LUT baseline) ----------------------------


@njit(**_JIT)
def stamp(out, row_lo, row_hi, patch_data, patch_start, patch_h, patch_w, ext_start, ext_lo, ext_hi, pid, by, bx, amp):
    """Add amp[j] * patch[pid[j]] with its (0, 0) pixel at (by[j], bx[j]).

    Only output rows in [row_lo, row_hi) are written, which lets callers
    split one tile into disjoint row strips. Patch rows carry [lo, hi)
    column extents outside of which the patch is zero. Returns the number
    of pixels added.
    """
    height, width = out.shape
    ops = 0
    for j in range(pid.shape[0]):
        p = pid[j]
        a = amp[j]
        h = patch_h[p]
        w = patch_w[p]
        base = patch_start[p]
        e0 = ext_start[p]
        y0 = by[j]
        x0 = bx[j]
        i_start = max(0, row_lo - y0)
        i_stop = min(h, row_hi - y0)
        for i in range(i_start, i_stop):
            y = y0 + i
            lo = ext_lo[e0 + i]
            hi = ext_hi[e0 + i]
            if x0 + lo < 0:
                lo = -x0
            if x0 + hi > width:
                hi = width - x0
            row = base + i * w
            for c in range(lo, hi):
                out[y, x0 + c] += a * patch_data[row + c]
                ops += 1
    return ops
