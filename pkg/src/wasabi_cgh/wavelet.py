"""Periodic 2-D fast wavelet transform and magnitude shrinkage.

Pyramids use the usual packed layout: an N x N array holding the coarsest
scaling band in its top-left corner and, for each level l, three detail
bands of side N / 2**l. Arrays are indexed ``[row, col] = [y, x]``; a band
coordinate ``(m, n)`` is ``(col, row)`` inside the band. Band names give
the filter along x first: LH is lowpass in x and highpass in y.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np

from . import _kernels
from .field import ComplexField, is_power_of_two

__all__ = [
    "WaveletFilter",
    "WaveletPyramid",
    "SparseCoeffs",
    "BandInfo",
    "DimensionError",
    "ShrinkageWarning",
    "band_layout",
    "fwt2",
    "ifwt2",
    "fwt2_shifts",
    "shrink",
    "shrink_shifts",
    "densify",
    "get_filter",
]


class DimensionError(ValueError):
    """Raised for fields or pyramids of unsupported or inconsistent shape."""


class ShrinkageWarning(UserWarning):
    """Requested coefficient count exceeded the pyramid size and was clamped."""


# Orthonormal coiflet scaling filters (synthesis lowpass).
_COIFLETS = {
    1: [-0.07273261951252645, 0.3378976624574818, 0.8525720202116004, 0.3848648468648578,
        -0.07273261951252645, -0.015655728135791993],
    2: [0.01638733646320364, -0.04146493678687178, -0.0673725547237256, 0.3861100668227629,
        0.8127236354494135, 0.4170051844232391, -0.07648859907828076, -0.05943441864643109,
        0.02368017194684777, 0.005611434819368834, -0.0018232088709110323, -0.000720549445520347],
    3: [-0.003793512864380802, 0.007782596425672746, 0.023452696142077168, -0.06577191128146936,
        -0.06112339000297255, 0.40517690240911824, 0.7937772226260872, 0.42848347637737,
        -0.07179982161915484, -0.08230192710629983, 0.03455502757329774, 0.015880544863669452,
        -0.009007976136730624, -0.0025745176881367972, 0.0011175187708306303, 0.0004662169598204029,
        -7.0983302506379e-05, -3.459977319727278e-05],
    4: [0.000892313902537003, -0.001629492425226786, -0.007346167936268051, 0.01606894713157503,
        0.02668230466960483, -0.08126671024919373, -0.05607731960356926, 0.41530842700068227,
        0.7822389344242826, 0.43438603311435653, -0.06662747236681717, -0.09622042453595264,
        0.03933442260558915, 0.02508225333794961, -0.015211728187697211, -0.0056582838001308835,
        0.0037514346971460866, 0.0012665610789256603, -0.0005890202246332165, -0.0002599743371222568,
        6.233885431278719e-05, 3.1229861599195265e-05, -3.259647940030751e-06, -1.7849909144933469e-06],
    5: [-0.000212081862067494, 0.0003585777411617577, 0.0021782943778456947, -0.00415931262757864,
        -0.010131584846900276, 0.023408322118927783, 0.028169744270532353, -0.09192158806008609,
        -0.052046670253554764, 0.42157126673075435, 0.7742936228603274, 0.4379823066591634,
        -0.06203775157498196, -0.10556315130733723, 0.041287530472117834, 0.032674799467057355,
        -0.019758391600965465, -0.009159507338676163, 0.006761520220620417, 0.0024315754425382886,
        -0.0016616273039298788, -0.0006375589261258812, 0.0003018579416682448, 0.00014035632812373243,
        -4.12198619242655e-05, -2.1270221672515614e-05, 3.7007277113394796e-06, 2.0612203985788783e-06,
        -1.6237995172048338e-07, -9.604010112767894e-08],
}


@dataclass(frozen=True)
class WaveletFilter:
    name: str
    lowpass: np.ndarray
    highpass: np.ndarray

    @classmethod
    def from_lowpass(cls, name: str, taps) -> "WaveletFilter":
        h = np.asarray(taps, dtype=np.float64)
        if h.ndim != 1 or h.size < 2 or h.size % 2:
            raise ValueError("lowpass filter needs an even number of taps")
        # quadrature mirror: g[n] = (-1)^n h[L-1-n]
        g = h[::-1] * np.where(np.arange(h.size) % 2 == 0, 1.0, -1.0)
        h.setflags(write=False)
        g.setflags(write=False)
        return cls(name, h, g)

    @classmethod
    def coiflet(cls, order: int = 2) -> "WaveletFilter":
        if order not in _COIFLETS:
            raise ValueError(f"coiflet order must be one of {sorted(_COIFLETS)}, got {order}")
        return cls.from_lowpass(f"coif{order}", _COIFLETS[order])

    @property
    def support(self) -> int:
        return int(self.lowpass.size)

    def check_orthonormal(self, tol: float = 1e-12) -> None:
        h = self.lowpass
        for lag in range(0, h.size, 2):
            acf = float(np.dot(h[: h.size - lag], h[lag:]))
            want = 1.0 if lag == 0 else 0.0
            if abs(acf - want) > tol:
                raise ValueError(f"{self.name}: autocorrelation at lag {lag} is {acf!r}")
        if abs(h.sum() - math.sqrt(2.0)) > tol:
            raise ValueError(f"{self.name}: taps sum to {h.sum()!r}, expected sqrt(2)")


def get_filter(name: str) -> WaveletFilter:
    if name.startswith("coif") and name[4:].isdigit():
        return WaveletFilter.coiflet(int(name[4:]))
    raise ValueError(f"unknown wavelet filter {name!r}")


class BandInfo(NamedTuple):
    band_id: int
    kind: str  # "LL", "LH", "HL" or "HH"
    level: int
    row0: int
    col0: int
    size: int


@lru_cache(maxsize=None)
def band_layout(n: int, level: int) -> tuple[BandInfo, ...]:
    """Band ids in coarse-to-fine order: 0 is the scaling band."""
    bands = [BandInfo(0, "LL", level, 0, 0, n >> level)]
    for lvl in range(level, 0, -1):
        b = n >> lvl
        base = 1 + 3 * (level - lvl)
        bands.append(BandInfo(base, "LH", lvl, b, 0, b))
        bands.append(BandInfo(base + 1, "HL", lvl, 0, b, b))
        bands.append(BandInfo(base + 2, "HH", lvl, b, b, b))
    return tuple(bands)


@lru_cache(maxsize=None)
def _axis_band_level(n: int, level: int) -> np.ndarray:
    # per-axis index -> finest level whose detail region contains it; the
    # scaling region gets level + 1 as a sentinel
    out = np.full(n, level + 1, dtype=np.int64)
    for lvl in range(level, 0, -1):
        b = n >> lvl
        out[b: 2 * b] = lvl
    out.setflags(write=False)
    return out


def locate(n: int, level: int, rows: np.ndarray, cols: np.ndarray):
    """Map packed positions to (band_id, level, m, n) arrays."""
    lv = _axis_band_level(n, level)
    lr = lv[rows]
    lc = lv[cols]
    lvl = np.minimum(lr, lc)
    scaling = lvl > level
    lvl = np.where(scaling, level, lvl)
    b = n >> lvl
    high_y = rows >= b
    high_x = cols >= b
    # LH -> 0, HL -> 1, HH -> 2 within a level
    kind = np.where(high_x & high_y, 2, np.where(high_x, 1, 0))
    band = np.where(scaling, 0, 1 + 3 * (level - lvl) + kind)
    m = np.where(high_x & ~scaling, cols - b, cols)
    nn = np.where(high_y & ~scaling, rows - b, rows)
    return band.astype(np.uint8), lvl.astype(np.uint8), m.astype(np.uint32), nn.astype(np.uint32)


@dataclass
class WaveletPyramid:
    data: np.ndarray  # packed N x N complex coefficients
    level: int

    def __post_init__(self) -> None:
        n = self.data.shape[0]
        if self.data.ndim != 2 or self.data.shape[1] != n or not is_power_of_two(n):
            raise DimensionError(f"pyramid must be square with power-of-two side, got {self.data.shape}")
        if n % (1 << self.level):
            raise DimensionError(f"side {n} not divisible by 2**{self.level}")

    @property
    def size(self) -> int:
        return self.data.shape[0]

    @property
    def scaling(self) -> np.ndarray:
        b = self.size >> self.level
        return self.data[:b, :b]

    def band(self, kind: str, level: int) -> np.ndarray:
        for info in band_layout(self.size, self.level):
            if info.kind == kind and info.level == level:
                return self.data[info.row0: info.row0 + info.size, info.col0: info.col0 + info.size]
        raise KeyError((kind, level))

    def bands(self) -> Iterator[tuple[BandInfo, np.ndarray]]:
        for info in band_layout(self.size, self.level):
            yield info, self.data[info.row0: info.row0 + info.size, info.col0: info.col0 + info.size]

    @property
    def coefficient_count(self) -> int:
        return self.data.size

    def energy(self) -> float:
        return float(np.vdot(self.data, self.data).real)


def _check_square(data: np.ndarray, level: int) -> int:
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise DimensionError(f"field must be square, got shape {data.shape}")
    n = data.shape[0]
    if not is_power_of_two(n):
        raise DimensionError(f"field side {n} is not a power of two")
    if level < 0 or n % (1 << level) or (n >> level) < 1:
        raise DimensionError(f"field side {n} not divisible by 2**{level}")
    return n


def _analyze2(x: np.ndarray, filt: WaveletFilter):
    """One 2-D analysis level; returns (LL, LH, HL, HH)."""
    h, g = filt.lowpass, filt.highpass
    rows, n = x.shape
    lo_x = np.empty((rows, n // 2), np.complex128)
    hi_x = np.empty_like(lo_x)
    _kernels.analyze_rows(x, h, g, lo_x, hi_x)
    ll = np.empty((rows // 2, n // 2), np.complex128)
    lh = np.empty_like(ll)
    hl = np.empty_like(ll)
    hh = np.empty_like(ll)
    _kernels.analyze_cols(lo_x, h, g, ll, lh)
    _kernels.analyze_cols(hi_x, h, g, hl, hh)
    return ll, lh, hl, hh


def _synthesize2(ll, lh, hl, hh, filt: WaveletFilter) -> np.ndarray:
    h, g = filt.lowpass, filt.highpass
    half = ll.shape[0]
    lo_x = np.empty((2 * half, half), np.complex128)
    hi_x = np.empty_like(lo_x)
    _kernels.synthesize_cols(ll, lh, h, g, lo_x)
    _kernels.synthesize_cols(hl, hh, h, g, hi_x)
    out = np.empty((2 * half, 2 * half), np.complex128)
    _kernels.synthesize_rows(lo_x, hi_x, h, g, out)
    return out


def fwt2(field, level: int, filt: WaveletFilter) -> WaveletPyramid:
    """Orthonormal periodic 2-D FWT of a square power-of-two field."""
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    n = _check_square(data, level)
    out = np.array(data, dtype=np.complex128, order="C")
    side = n
    for _ in range(level):
        ll, lh, hl, hh = _analyze2(np.ascontiguousarray(out[:side, :side]), filt)
        b = side // 2
        out[:b, :b] = ll
        out[b:side, :b] = lh
        out[:b, b:side] = hl
        out[b:side, b:side] = hh
        side = b
    return WaveletPyramid(out, level)


def ifwt2(pyr: WaveletPyramid, filt: WaveletFilter, pitch: float = 1e-6) -> ComplexField:
    data = pyr.data
    n = _check_square(data, pyr.level)
    out = np.array(data, dtype=np.complex128, order="C")
    side = n >> pyr.level
    for _ in range(pyr.level):
        b = side
        side = 2 * b
        rec = _synthesize2(
            np.ascontiguousarray(out[:b, :b]),
            np.ascontiguousarray(out[b:side, :b]),
            np.ascontiguousarray(out[:b, b:side]),
            np.ascontiguousarray(out[b:side, b:side]),
            filt,
        )
        out[:side, :side] = rec
    return ComplexField(out, pitch)


def _shift_tree(x: np.ndarray, levels: int, filt: WaveletFilter):
    # yields (rx, ry, scaling, details) with details ordered fine->coarse;
    # each entry equals the transform of x rolled by (ry, rx)
    for py in (0, 1):
        for px in (0, 1):
            xp = np.roll(x, (py, px), axis=(0, 1)) if (px or py) else x
            ll, lh, hl, hh = _analyze2(np.ascontiguousarray(xp), filt)
            if levels == 1:
                yield px, py, ll, [(lh, hl, hh)]
                continue
            for qx, qy, sub_ll, sub_details in _shift_tree(ll, levels - 1, filt):
                if qx or qy:
                    mine = tuple(np.roll(d, (qy, qx), axis=(0, 1)) for d in (lh, hl, hh))
                else:
                    mine = (lh, hl, hh)
                yield px + 2 * qx, py + 2 * qy, sub_ll, [mine] + sub_details


def fwt2_shifts(field, level: int, filt: WaveletFilter) -> Iterator[tuple[tuple[int, int], WaveletPyramid]]:
    """Pyramids of every periodic shift of ``field`` by (rx, ry) in [0, 2**level)^2.

    Bitwise identical to ``fwt2(np.roll(field, (ry, rx), axis=(0, 1)))`` but
    shares work between shifts with equal low-order bits.
    """
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    n = _check_square(data, level)
    data = np.ascontiguousarray(data, dtype=np.complex128)
    for rx, ry, ll, details in _shift_tree(data, level, filt):
        out = np.empty((n, n), np.complex128)
        side = n
        for lh, hl, hh in details:
            b = side // 2
            out[b:side, :b] = lh
            out[:b, b:side] = hl
            out[b:side, b:side] = hh
            side = b
        out[:side, :side] = ll
        yield (rx, ry), WaveletPyramid(out, level)


@dataclass
class SparseCoeffs:
    """Retained coefficients sorted by (band, m, n)."""

    band: np.ndarray  # uint8
    level: np.ndarray  # uint8
    m: np.ndarray  # uint32, column inside the band
    n: np.ndarray  # uint32, row inside the band
    value: np.ndarray  # complex128
    size: int  # side of the source pyramid
    levels: int  # pyramid depth

    def __len__(self) -> int:
        return int(self.value.size)

    def energy(self) -> float:
        return float(np.vdot(self.value, self.value).real)

    def packed_positions(self) -> tuple[np.ndarray, np.ndarray]:
        layout = band_layout(self.size, self.levels)
        r0 = np.array([b.row0 for b in layout], dtype=np.int64)
        c0 = np.array([b.col0 for b in layout], dtype=np.int64)
        return r0[self.band] + self.n, c0[self.band] + self.m


def _tie_order(n: int, level: int, flat: np.ndarray) -> np.ndarray:
    band, _, m, nn = locate(n, level, flat // n, flat % n)
    return flat[np.lexsort((nn, m, band))]


def _top_candidates(mags: np.ndarray, n_r: int) -> np.ndarray:
    """Indices of positive entries at or above the n_r-th largest magnitude.

    Ties at the cut are all included, so any entry that could belong to a
    top-n_r selection over a superset is among them.
    """
    pos = np.flatnonzero(mags > 0)
    if pos.size <= n_r:
        return pos
    vals = mags[pos]
    thresh = np.partition(vals, pos.size - n_r)[pos.size - n_r]
    return pos[vals >= thresh]


def _select(mags: np.ndarray, n_r: int, tie_keys) -> np.ndarray:
    """Pick n_r of ``mags`` (all positive) by magnitude, breaking ties by key order."""
    total = mags.size
    if n_r >= total:
        return np.arange(total)
    thresh = np.partition(mags, total - n_r)[total - n_r]
    above = np.flatnonzero(mags > thresh)
    tied = np.flatnonzero(mags == thresh)
    need = n_r - above.size
    band, m, nn = tie_keys(tied)
    return np.concatenate([above, tied[np.lexsort((nn, m, band))][:need]])


def _check_n_r(n_r: int, total: int) -> int:
    if n_r < 0:
        raise ValueError(f"n_r must be >= 0, got {n_r}")
    if n_r > total:
        warnings.warn(f"n_r={n_r} exceeds {total} coefficients; clamped", ShrinkageWarning, stacklevel=3)
        n_r = total
    return n_r


def shrink(pyr: WaveletPyramid, n_r: int, keep_all: bool = False) -> SparseCoeffs:
    """Keep the ``n_r`` largest-magnitude coefficients.

    Ties at the threshold magnitude go to the smaller (band, m, n). In
    keep-all mode every nonzero coefficient is kept and ``n_r`` is ignored.
    """
    n = pyr.size
    flat = pyr.data.ravel()
    mags = np.abs(flat)
    total = flat.size
    if keep_all:
        idx = np.flatnonzero(mags > 0)
    else:
        n_r = _check_n_r(n_r, total)
        pos = np.flatnonzero(mags > 0)
        if n_r == 0:
            idx = np.zeros(0, dtype=np.int64)
        elif pos.size >= n_r:
            # zeros can never be selected, so only rank the positive entries
            def keys(i):
                band, _, m, nn = locate(n, pyr.level, pos[i] // n, pos[i] % n)
                return band, m, nn
            idx = pos[_select(mags[pos], n_r, keys)]
        else:
            zeros = np.flatnonzero(mags == 0)
            idx = np.concatenate([pos, _tie_order(n, pyr.level, zeros)[: n_r - pos.size]])
    rows, cols = idx // n, idx % n
    band, lvl, m, nn = locate(n, pyr.level, rows, cols)
    order = np.lexsort((nn, m, band))
    return SparseCoeffs(band[order], lvl[order], m[order], nn[order], flat[idx[order]].copy(), n, pyr.level)


@dataclass
class _NodeCandidates:
    band: np.ndarray  # int64 band ids
    row: np.ndarray  # unshifted row inside the band
    col: np.ndarray
    value: np.ndarray
    mag: np.ndarray


def _node_candidates(bands: list[tuple[int, np.ndarray]], n_r: Optional[int]) -> _NodeCandidates:
    ids = np.concatenate([np.full(a.size, bid, np.int64) for bid, a in bands])
    flat = np.concatenate([a.ravel() for _, a in bands])
    local = np.concatenate([np.arange(a.size, dtype=np.int64) for _, a in bands])
    mags = np.abs(flat)
    sel = np.flatnonzero(mags > 0) if n_r is None else _top_candidates(mags, n_r)
    side = bands[0][1].shape[1]
    return _NodeCandidates(ids[sel], local[sel] // side, local[sel] % side, flat[sel], mags[sel])


def _support_window(data: np.ndarray, level: int, filt: WaveletFilter):
    """Smallest aligned power-of-two window whose transforms match the full field's.

    The zero pad covers the filter's spread over ``level`` levels plus the
    largest class shift, so no periodic wrap inside the window ever meets a
    nonzero sample. Returns (window, row0, col0); row0 and col0 are multiples
    of 2**level.
    """
    n = data.shape[0]
    nz = data != 0
    rows = np.flatnonzero(nz.any(axis=1))
    if rows.size == 0:
        return data, 0, 0
    cols = np.flatnonzero(nz.any(axis=0))
    step = 1 << level
    pad = filt.support * step
    lo_r, lo_c = (int(rows[0]) - pad) // step * step, (int(cols[0]) - pad) // step * step
    hi_r, hi_c = int(rows[-1]) + pad + step, int(cols[-1]) + pad + step
    need = max(hi_r - lo_r, hi_c - lo_c, 2 * step)
    side = 1 << (need - 1).bit_length()
    if side >= n or lo_r < 0 or lo_c < 0 or lo_r + side > n or lo_c + side > n:
        return data, 0, 0
    return np.ascontiguousarray(data[lo_r: lo_r + side, lo_c: lo_c + side]), lo_r, lo_c


def shrink_shifts(field, level: int, filt: WaveletFilter, n_r: int, keep_all: bool = False,
                  only: Optional[Iterable[tuple[int, int]]] = None
                  ) -> Iterator[tuple[tuple[int, int], SparseCoeffs]]:
    """``shrink`` applied to the pyramid of every periodic shift of ``field``.

    Yields ``((rx, ry), coeffs)`` equal to
    ``shrink(fwt2(np.roll(field, (ry, rx), axis=(0, 1))), n_r, keep_all)``
    for (rx, ry) in [0, 2**level)^2, restricted to ``only`` if given.

    A shift by r rolls the level-j detail bands computed for the shift
    r mod 2**j by r >> j, so magnitudes are ranked once per tree node and
    each shift only re-indexes that node's candidates. Transforms run on a
    window around the nonzero support when that is smaller than the field.
    """
    data = field.data if isinstance(field, ComplexField) else np.asarray(field)
    n = _check_square(data, level)
    data = np.ascontiguousarray(data, dtype=np.complex128)
    win, row0, col0 = _support_window(data, level, filt)
    total = n * n
    if not keep_all:
        n_r = _check_n_r(n_r, total)
    wanted = None if only is None else set(only)
    step = 1 << level
    rank_n = None if keep_all else n_r

    # nodes[j][(px, py)] holds the candidates of the level-(j+1) detail bands
    nodes: list[dict] = []
    lls = {(0, 0): win}
    wn = win.shape[0]
    for j in range(1, level + 1):
        bit = 1 << (j - 1)
        base = 1 + 3 * (level - j)
        nxt = {}
        cands = {}
        for (px, py), parent in lls.items():
            for by in (0, 1):
                for bx in (0, 1):
                    x = np.roll(parent, (by, bx), axis=(0, 1)) if (bx or by) else parent
                    ll, lh, hl, hh = _analyze2(np.ascontiguousarray(x), filt)
                    key = (px + bx * bit, py + by * bit)
                    bands = [(base, lh), (base + 1, hl), (base + 2, hh)]
                    if j == level:
                        bands.insert(0, (0, ll))
                    else:
                        nxt[key] = ll
                    cands[key] = _node_candidates(bands, rank_n)
        nodes.append(cands)
        lls = nxt
    levels = np.array([b.level for b in band_layout(n, level)], dtype=np.uint8)

    for ry in range(step):
        for rx in range(step):
            if wanted is not None and (rx, ry) not in wanted:
                continue
            parts = []
            for j in range(1, level + 1):
                mask = (1 << j) - 1
                c = nodes[j - 1][(rx & mask, ry & mask)]
                b = wn >> j
                sx, sy = rx >> j, ry >> j
                parts.append((c.band, (c.col + sx) % b + (col0 >> j), (c.row + sy) % b + (row0 >> j),
                              c.value, c.mag))
            band, m, nn, value, mag = (np.concatenate(col) for col in zip(*parts))
            if not keep_all and band.size < n_r:
                # every node kept all its nonzeros and there are still too few: zeros join by tie order, so use the plain path
                shifted = fwt2(np.roll(data, (ry, rx), axis=(0, 1)), level, filt)
                yield (rx, ry), shrink(shifted, n_r, keep_all)
                continue
            if not keep_all:
                sel = _select(mag, n_r, lambda i: (band[i], m[i], nn[i]))
                band, m, nn, value = band[sel], m[sel], nn[sel], value[sel]
            order = np.lexsort((nn, m, band))
            band = band[order]
            yield (rx, ry), SparseCoeffs(band.astype(np.uint8), levels[band], m[order].astype(np.uint32),
                                         nn[order].astype(np.uint32), value[order].copy(), n, level)


def densify(coeffs: SparseCoeffs) -> WaveletPyramid:
    out = np.zeros((coeffs.size, coeffs.size), np.complex128)
    rows, cols = coeffs.packed_positions()
    out[rows, cols] = coeffs.value
    return WaveletPyramid(out, coeffs.levels)
