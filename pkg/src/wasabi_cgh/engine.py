"""Wavelet-domain superposition of point PSFs, tile by tile.

Each tile of the full hologram is computed independently: points are
re-based to tile-relative pixels, their LUT coefficients are added into a
zeroed pyramid at integer-shifted indices, and one inverse FWT returns the
tile's complex object wave.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from .field import ComplexField, OpticalConfig, PointCloud, TileIndex, quantize_depths, snap_pixels
from .lut import PsfSpec, WasabiLut
from .wavelet import WaveletFilter, WaveletPyramid, get_filter, ifwt2

__all__ = [
    "PreparedPoints",
    "TilePlan",
    "CoeffAccumulator",
    "TileStats",
    "ComputeStats",
    "SinkError",
    "prepare_points",
    "tile_members",
    "plan_tile",
    "superpose",
    "finalize_tile",
    "compute_tile",
    "compute_full",
]

log = logging.getLogger(__name__)

TileSink = Callable[[TileIndex, ComplexField], None]


@dataclass(frozen=True)
class PreparedPoints:
    """Points snapped to full-frame pixels and assigned to depth slices."""

    index: np.ndarray  # original point index
    ix: np.ndarray
    iy: np.ndarray
    slice: np.ndarray
    footprint: np.ndarray
    amp: np.ndarray
    skipped: int = 0

    def __len__(self) -> int:
        return int(self.index.size)


def prepare_points(points: PointCloud, cfg: OpticalConfig, specs: list[PsfSpec]) -> PreparedPoints:
    """Snap, quantize and drop points whose PSF misses the whole hologram."""
    ix, iy = snap_pixels(points.x, points.y, cfg)
    sl = quantize_depths(points.z, cfg)
    fp = np.array([s.footprint for s in specs], dtype=np.int64)[sl] if len(points) else np.zeros(0, np.int64)
    n = cfg.n_w
    keep = (ix + fp >= 0) & (ix - fp < n) & (iy + fp >= 0) & (iy - fp < n)
    skipped = int((~keep).sum())
    if skipped:
        log.warning("skipped %d point(s) whose PSF lies entirely outside the hologram", skipped)
    idx = np.flatnonzero(keep)
    return PreparedPoints(idx, ix[keep], iy[keep], sl[keep], fp[keep], np.asarray(points.a)[keep], skipped)


@dataclass
class TilePlan:
    tile: TileIndex
    index: np.ndarray
    xp: np.ndarray  # tile-relative pixel coordinates, may fall outside [0, n_h)
    yp: np.ndarray
    slice: np.ndarray
    cls: np.ndarray  # LUT class per point
    qx: np.ndarray  # shift of the stored PSF in units of 2**level pixels
    qy: np.ndarray
    amp: np.ndarray

    def __len__(self) -> int:
        return int(self.index.size)


def tile_members(pts: PreparedPoints, tile: TileIndex, cfg: OpticalConfig):
    """Mask of points whose footprint reaches the tile, and their tile-relative pixels."""
    nh = cfg.n_h
    xp = pts.ix - tile.s * nh
    yp = pts.iy - tile.t * nh
    half = nh // 2
    keep = (np.abs(xp - half) <= half + pts.footprint) & (np.abs(yp - half) <= half + pts.footprint)
    return keep, xp[keep], yp[keep]


def _as_prepared(points, cfg: OpticalConfig, specs) -> PreparedPoints:
    if isinstance(points, PreparedPoints):
        return points
    return prepare_points(points, cfg, specs)


def plan_tile(points: Union[PointCloud, PreparedPoints], tile: TileIndex, cfg: OpticalConfig,
              lut: WasabiLut) -> TilePlan:
    lut.check_config(cfg)
    tile = TileIndex(*tile).check(cfg)
    pts = _as_prepared(points, cfg, lut.specs)
    keep, xp, yp = tile_members(pts, tile, cfg)
    half = cfg.n_h // 2
    sl = pts.slice[keep]
    step = lut.step
    if lut.offset_mode == "exact":
        rx = xp & (step - 1)
        ry = yp & (step - 1)
        qx = (xp - rx - half) // step
        qy = (yp - ry - half) // step
        cls = sl * lut.classes_per_slice + ry * step + rx
    else:
        qx = (xp + step // 2) // step - half // step
        qy = (yp + step // 2) // step - half // step
        cls = sl.copy()
    missing = ~lut.present[cls]
    if np.any(missing):
        s, rx0, ry0 = lut.class_key(int(cls[np.flatnonzero(missing)[0]]))
        raise KeyError(f"partial LUT lacks slice {s}, offset ({rx0}, {ry0}) needed by tile {tuple(tile)}")
    return TilePlan(tile, pts.index[keep], xp, yp, sl, cls.astype(np.int64), qx.astype(np.int64),
                    qy.astype(np.int64), np.ascontiguousarray(pts.amp[keep], dtype=np.float64))


@dataclass
class CoeffAccumulator:
    """Packed wavelet pyramid being accumulated for one tile."""

    data: np.ndarray
    level: int
    ops: int = 0
    dropped: int = 0

    @classmethod
    def zeros(cls, n_h: int, level: int) -> "CoeffAccumulator":
        return cls(np.zeros((n_h, n_h), np.complex128), level)

    def pyramid(self) -> WaveletPyramid:
        return WaveletPyramid(self.data, self.level)


def superpose(plan: TilePlan, lut: WasabiLut, acc: CoeffAccumulator) -> CoeffAccumulator:
    """Add every planned point's shifted LUT coefficients into ``acc``.

    Points are visited in ascending original index and entries in stored
    order, so the sum is bitwise reproducible.
    """
    if acc.data.shape != (lut.n_h, lut.n_h) or acc.level != lut.level:
        raise ValueError(f"accumulator {acc.data.shape} at level {acc.level} does not match the LUT")
    if len(plan):
        r0, c0, size, factor = lut.band_tables()
        ops, dropped = _kernels.accumulate(
            acc.data, lut.starts, lut.band, lut.m, lut.n, lut.value, r0, c0, size, factor,
            plan.cls, plan.qx, plan.qy, plan.amp,
        )
        acc.ops += int(ops)
        acc.dropped += int(dropped)
    return acc


def finalize_tile(acc: CoeffAccumulator, filt: WaveletFilter, pitch: float = 1e-6) -> ComplexField:
    return ifwt2(acc.pyramid(), filt, pitch)


@dataclass
class TileStats:
    tile: TileIndex
    points: int
    ops: int
    dropped: int
    plan_s: float
    superpose_s: float
    inverse_s: float


@dataclass
class ComputeStats:
    tiles: list[TileStats] = field(default_factory=list)
    skipped_points: int = 0
    wall_s: float = 0.0

    @property
    def ops(self) -> int:
        return sum(t.ops for t in self.tiles)

    @property
    def dropped(self) -> int:
        return sum(t.dropped for t in self.tiles)

    @property
    def points_per_tile(self) -> dict[TileIndex, int]:
        return {t.tile: t.points for t in self.tiles}

    def phase_seconds(self) -> dict[str, float]:
        return {
            "plan": sum(t.plan_s for t in self.tiles),
            "superpose": sum(t.superpose_s for t in self.tiles),
            "inverse": sum(t.inverse_s for t in self.tiles),
        }


class SinkError(RuntimeError):
    """A tile sink failed; ``delivered`` lists the tiles already accepted."""

    def __init__(self, message: str, delivered: list[TileIndex]):
        super().__init__(message)
        self.delivered = delivered


def compute_tile(points, tile: TileIndex, cfg: OpticalConfig, lut: WasabiLut,
                 filt: Optional[WaveletFilter] = None) -> tuple[ComplexField, TileStats]:
    filt = filt or get_filter(lut.filter_name)
    t0 = time.perf_counter()
    plan = plan_tile(points, tile, cfg, lut)
    t1 = time.perf_counter()
    acc = superpose(plan, lut, CoeffAccumulator.zeros(cfg.n_h, cfg.level))
    t2 = time.perf_counter()
    out = finalize_tile(acc, filt, cfg.pitch)
    t3 = time.perf_counter()
    return out, TileStats(TileIndex(*tile), len(plan), acc.ops, acc.dropped, t1 - t0, t2 - t1, t3 - t2)


def run_tiles(work: Callable[[TileIndex], tuple[ComplexField, TileStats]], tiles: list[TileIndex],
              sink: TileSink, workers: int = 1) -> list[TileStats]:
    """Compute tiles on a thread pool and hand each to ``sink`` exactly once."""
    stats: list[TileStats] = []
    delivered: list[TileIndex] = []
    lock = threading.Lock()

    def job(tile):
        out, st = work(tile)
        sink(tile, out)
        with lock:
            delivered.append(tile)
            stats.append(st)

    if workers <= 1:
        for tile in tiles:
            try:
                job(tile)
            except Exception as exc:
                raise SinkError(f"tile {tuple(tile)} failed: {exc}", list(delivered)) from exc
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(job, tile): tile for tile in tiles}
            for fut in as_completed(futures):
                exc = fut.exception()
                if exc is not None:
                    for other in futures:
                        other.cancel()
                    raise SinkError(f"tile {tuple(futures[fut])} failed: {exc}", list(delivered)) from exc
    order = {tuple(t): i for i, t in enumerate(tiles)}
    stats.sort(key=lambda st: order[tuple(st.tile)])
    return stats


def compute_full(points: Union[PointCloud, PreparedPoints], cfg: OpticalConfig, lut: WasabiLut,
                 sink: TileSink, workers: int = 1, filt: Optional[WaveletFilter] = None) -> ComputeStats:
    """Compute every tile of the hologram and stream it to ``sink``."""
    t0 = time.perf_counter()
    lut.check_config(cfg)
    filt = filt or get_filter(lut.filter_name)
    pts = _as_prepared(points, cfg, lut.specs)
    stats = run_tiles(lambda tile: compute_tile(pts, tile, cfg, lut, filt), cfg.tiles(), sink, workers)
    return ComputeStats(stats, pts.skipped, time.perf_counter() - t0)
