"""Space-domain point superposition: N-LUT patch stamping and the naive oracle."""

from __future__ import annotations

import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .engine import ComputeStats, PreparedPoints, TileStats, _as_prepared, plan_tile, run_tiles, tile_members
from .field import ComplexField, OpticalConfig, PointCloud, TileIndex
from .lut import WasabiLut, psf_patch, psf_specs
from .wavelet import WaveletFilter, densify, get_filter, ifwt2

__all__ = ["Patch", "PsfTable", "direct_superpose", "direct_tile", "compute_full_direct", "naive_pixelwise"]


@dataclass(frozen=True)
class Patch:
    """Complex patch with per-row [lo, hi) extents of its nonzero pixels.

    ``origin`` is the (row, col) of the patch's first pixel relative to its
    anchor: the point itself for exact patches, and the shifted tile-center
    frame for shrunk ones.
    """

    data: np.ndarray
    origin: tuple[int, int]
    lo: np.ndarray
    hi: np.ndarray

    @property
    def area(self) -> int:
        return int((self.hi - self.lo).sum())


def _circle_patch(z_c: float, radius: int, cfg: OpticalConfig) -> Patch:
    data = np.ascontiguousarray(psf_patch(z_c, radius, cfg))
    dy = np.arange(-radius, radius + 1)
    half = np.array([math.isqrt(radius * radius - int(d) * int(d)) for d in dy], dtype=np.int64)
    return Patch(data, (-radius, -radius), radius - half, radius + half + 1)


def _bbox_patch(full: np.ndarray) -> Patch:
    nz = full != 0
    rows = np.flatnonzero(nz.any(axis=1))
    if rows.size == 0:
        return Patch(np.zeros((1, 1), np.complex128), (0, 0), np.zeros(1, np.int64), np.zeros(1, np.int64))
    cols = np.flatnonzero(nz.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    crop = np.ascontiguousarray(full[r0:r1, c0:c1])
    cnz = crop != 0
    has = cnz.any(axis=1)
    lo = np.where(has, cnz.argmax(axis=1), 0).astype(np.int64)
    hi = np.where(has, crop.shape[1] - cnz[:, ::-1].argmax(axis=1), 0).astype(np.int64)
    return Patch(crop, (int(r0), int(c0)), lo, hi)


class PsfTable:
    """Space-domain PSF patches, built on first use.

    Exact patches depend only on the depth slice and are always kept.
    Shrunk patches are the inverse transforms of the very coefficient lists
    held by ``lut``, one per (slice, offset class); they are near tile-sized,
    so only ``cache_bytes`` worth of them is retained.
    """

    def __init__(self, cfg: OpticalConfig, lut: Optional[WasabiLut] = None,
                 filt: Optional[WaveletFilter] = None, cache_bytes: int = 256 << 20):
        if lut is not None:
            lut.check_config(cfg)
        self.cfg = cfg
        self.lut = lut
        self.filt = filt or get_filter(cfg.filter_name)
        self.specs = lut.specs if lut is not None else psf_specs(cfg, self.filt)
        self.cache_bytes = cache_bytes
        self._patches: dict[tuple, Patch] = {}
        self._cached = 0
        self._lock = threading.Lock()

    def exact(self, slice_index: int) -> Patch:
        return self.patch(("exact", int(slice_index)))

    def shrunk(self, cls: int) -> Patch:
        return self.patch(("shrunk", int(cls)))

    def patch(self, key: tuple) -> Patch:
        with self._lock:
            hit = self._patches.get(key)
        if hit is not None:
            return hit
        kind, idx = key
        if kind == "exact":
            spec = self.specs[idx]
            made = _circle_patch(spec.z_c, spec.footprint, self.cfg)
        elif kind == "shrunk":
            if self.lut is None:
                raise ValueError("shrunk patches need the WASABI look-up table")
            s, rx, ry = self.lut.class_key(idx)
            made = _bbox_patch(ifwt2(densify(self.lut.entries(s, rx, ry)), self.filt).data)
        else:
            raise KeyError(key)
        with self._lock:
            if key in self._patches:
                return self._patches[key]
            if kind == "exact" or self._cached + made.data.nbytes <= self.cache_bytes:
                self._patches[key] = made
                if kind == "shrunk":
                    self._cached += made.data.nbytes
        return made


def _pack(patches: list[Patch]):
    sizes = np.array([p.data.size for p in patches], dtype=np.int64)
    heights = np.array([p.data.shape[0] for p in patches], dtype=np.int64)
    start = np.zeros(len(patches), np.int64)
    np.cumsum(sizes[:-1], out=start[1:])
    ext_start = np.zeros(len(patches), np.int64)
    np.cumsum(heights[:-1], out=ext_start[1:])
    return (
        np.concatenate([p.data.ravel() for p in patches]),
        start,
        heights,
        np.array([p.data.shape[1] for p in patches], dtype=np.int64),
        ext_start,
        np.concatenate([p.lo for p in patches]),
        np.concatenate([p.hi for p in patches]),
    )


def direct_tile(points: Union[PointCloud, PreparedPoints], tile: TileIndex, cfg: OpticalConfig,
                table: PsfTable, variant: str = "exact", workers: int = 1,
                chunk_bytes: int = 256 << 20) -> tuple[ComplexField, TileStats]:
    """Stamp every contributing point's patch into one tile.

    Points are added in (patch key, index) order; distinct patches are
    materialized in groups of at most ``chunk_bytes``.
    ``workers`` splits the tile into row strips, which does not change any
    pixel's summation order.
    """
    if variant not in ("exact", "shrunk"):
        raise ValueError(f"variant must be 'exact' or 'shrunk', got {variant!r}")
    if variant == "shrunk" and table.lut is None:
        raise ValueError("shrunk patches need the WASABI look-up table")
    if table.cfg.config_hash() != cfg.config_hash():
        raise ValueError("PSF table was built for a different configuration")
    t0 = time.perf_counter()
    tile = TileIndex(*tile).check(cfg)
    pts = _as_prepared(points, cfg, table.specs)
    nh = cfg.n_h
    if variant == "exact":
        keep, xp, yp = tile_members(pts, tile, cfg)
        keys = pts.slice[keep].astype(np.int64)
        amp = pts.amp[keep]
        ay, ax = yp, xp
    else:
        plan = plan_tile(pts, tile, cfg, table.lut)
        keys = plan.cls
        amp = plan.amp
        step = table.lut.step
        ay, ax = plan.qy * step, plan.qx * step
    amp = np.ascontiguousarray(amp, dtype=np.float64)
    out = np.zeros((nh, nh), np.complex128)
    n_pts = int(keys.size)
    t1 = time.perf_counter()
    ops = 0
    bounds = np.linspace(0, nh, max(1, workers) + 1).astype(np.int64)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 and n_pts else None
    try:
        # (key, index) order makes every pixel's sum independent of chunking
        order = np.argsort(keys, kind="stable")
        uniq = np.unique(keys)
        bounds_of = np.searchsorted(keys[order], np.append(uniq, np.iinfo(np.int64).max))
        i = 0
        while i < uniq.size:
            group, used = [], 0
            while i < uniq.size and (not group or used < chunk_bytes):
                p = table.patch((variant, int(uniq[i])))
                group.append(p)
                used += p.data.nbytes
                i += 1
            sel = order[bounds_of[i - len(group)]: bounds_of[i]]
            pid = np.searchsorted(uniq[i - len(group): i], keys[sel]).astype(np.int64)
            oy = np.array([p.origin[0] for p in group], dtype=np.int64)[pid]
            ox = np.array([p.origin[1] for p in group], dtype=np.int64)[pid]
            packed = _pack(group)
            by, bx, a = ay[sel] + oy, ax[sel] + ox, amp[sel]

            def strip(k):
                return _kernels.stamp(out, bounds[k], bounds[k + 1], *packed, pid, by, bx, a)

            if pool is None:
                ops += strip(0)
            else:
                ops += sum(pool.map(strip, range(workers)))
    finally:
        if pool is not None:
            pool.shutdown()
    t2 = time.perf_counter()
    return ComplexField(out, cfg.pitch), TileStats(tile, n_pts, int(ops), 0, t1 - t0, t2 - t1, 0.0)


def direct_superpose(points, tile: TileIndex, cfg: OpticalConfig, table: PsfTable,
                     variant: str = "exact", workers: int = 1) -> ComplexField:
    return direct_tile(points, tile, cfg, table, variant, workers)[0]


def compute_full_direct(points, cfg: OpticalConfig, table: PsfTable, sink, variant: str = "exact",
                        workers: int = 1):
    t0 = time.perf_counter()
    pts = _as_prepared(points, cfg, table.specs)
    stats = run_tiles(lambda tile: direct_tile(pts, tile, cfg, table, variant), cfg.tiles(), sink, workers)
    return ComputeStats(stats, pts.skipped, time.perf_counter() - t0)


def naive_pixelwise(points: Union[PointCloud, PreparedPoints], tile: TileIndex, cfg: OpticalConfig) -> ComplexField:
    """Literal per-pixel sum of windowed spherical waves over every point.

    Costs O(N * n_h^2); meant as a ground-truth oracle on small tiles.
    """
    specs = psf_specs(cfg)
    tile = TileIndex(*tile).check(cfg)
    pts = _as_prepared(points, cfg, specs)
    nh = cfg.n_h
    cols = np.arange(nh, dtype=np.int64)[None, :] + tile.s * nh
    rows = np.arange(nh, dtype=np.int64)[:, None] + tile.t * nh
    out = np.zeros((nh, nh), np.complex128)
    k = cfg.wavenumber
    for j in range(len(pts)):
        spec = specs[int(pts.slice[j])]
        dx = cols - pts.ix[j]
        dy = rows - pts.iy[j]
        inside = dx * dx + dy * dy <= spec.footprint * spec.footprint
        r = np.sqrt((dx * cfg.pitch) ** 2 + (dy * cfg.pitch) ** 2 + spec.z_c * spec.z_c)
        out += pts.amp[j] * np.where(inside, np.exp(1j * k * r), 0.0)
    return ComplexField(out, cfg.pitch)
