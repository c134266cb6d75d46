"""Timing harness comparing the wavelet-domain engine with the N-LUT baseline."""

from __future__ import annotations

import resource
import threading
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .direct import PsfTable, compute_full_direct
from .encode import binarize, interfere, reference_wave
from .engine import ComputeStats, compute_full, prepare_points
from .field import OpticalConfig, PointCloud
from .lut import WasabiLut, build_lut

__all__ = ["RunReport", "desk_scenario", "desk_config", "run_bench", "relative_l2", "REFERENCE_BASELINE_S",
           "REFERENCE_WASABI_S"]

# Reference timings of the 65,536^2-pixel, 95,949-point printed hologram
REFERENCE_BASELINE_S = 10533.0
REFERENCE_WASABI_S = 354.0
REFERENCE_SPEEDUP = 30.0


@dataclass
class RunReport:
    n_points: int
    tile_grid: tuple[int, int]
    gamma: float
    workers: int
    lut_s: float = 0.0
    superpose_s: float = 0.0
    inverse_s: float = 0.0
    encode_s: float = 0.0
    wasabi_s: Optional[float] = None  # wall time of the wavelet engine, LUT excluded
    baseline_s: Optional[float] = None
    ops: int = 0
    baseline_ops: int = 0
    dropped: int = 0
    skipped_points: int = 0
    peak_mem_bytes: int = 0

    @property
    def speedup(self) -> Optional[float]:
        if self.wasabi_s and self.baseline_s is not None:
            return self.baseline_s / self.wasabi_s
        return None

    def fields(self) -> dict:
        d = asdict(self)
        d["tile_grid"] = f"{self.tile_grid[0]}x{self.tile_grid[1]}"
        d["speedup"] = self.speedup
        d["reference_baseline_s"] = REFERENCE_BASELINE_S
        d["reference_wasabi_s"] = REFERENCE_WASABI_S
        d["reference_speedup"] = REFERENCE_SPEEDUP
        return d

    def to_kv(self) -> str:
        out = []
        for k, v in self.fields().items():
            if isinstance(v, float):
                v = repr(v)
            out.append(f"{k}={'' if v is None else v}")
        return "\n".join(out) + "\n"

    def to_text(self) -> str:
        def sec(v):
            return "n/a" if v is None else f"{v:.3f} s"

        lines = [
            f"points            {self.n_points} ({self.skipped_points} skipped)",
            f"tiles             {self.tile_grid[0]} x {self.tile_grid[1]}, {self.workers} worker(s)",
            f"gamma             {self.gamma}",
            f"LUT build         {sec(self.lut_s)}",
            f"superpose         {sec(self.superpose_s)}  ({self.ops} accumulations, {self.dropped} dropped)",
            f"inverse FWT       {sec(self.inverse_s)}",
            f"encode            {sec(self.encode_s)}",
            f"WASABI wall       {sec(self.wasabi_s)}",
            f"N-LUT wall        {sec(self.baseline_s)}  ({self.baseline_ops} pixel updates)",
            f"speedup           {'n/a' if self.speedup is None else f'{self.speedup:.1f}x'}",
            f"peak memory       {self.peak_mem_bytes / 2**20:.0f} MiB",
            f"reference         {REFERENCE_BASELINE_S:.0f} s -> {REFERENCE_WASABI_S:.0f} s (~{REFERENCE_SPEEDUP:.0f}x) "
            f"at 65,536^2 pixels, 95,949 points",
        ]
        return "\n".join(lines) + "\n"


def desk_config(**overrides) -> OpticalConfig:
    """4096^2 single-tile proxy of the printed hologram, depth +/-3 mm."""
    base = dict(n_w=4096, n_h=4096, n_z=29, z_min=-3e-3, z_max=3e-3, gamma=0.05)
    base.update(overrides)
    return OpticalConfig(**base)


def desk_scenario(cfg: OpticalConfig, n: int = 10000, seed: int = 0) -> PointCloud:
    """Uniform random points over the hologram area and the configured depth range."""
    rng = np.random.default_rng(seed)
    half = 0.5 * cfg.n_w * cfg.pitch
    return PointCloud(
        rng.uniform(-half, half, n),
        rng.uniform(-half, half, n),
        rng.uniform(cfg.z_min, cfg.z_max, n),
        rng.uniform(0.5, 1.0, n),
    )


def relative_l2(a: np.ndarray, b: np.ndarray, margin: int = 0) -> float:
    """||a - b|| / ||b||, optionally ignoring ``margin`` pixels along every edge."""
    if a.shape != b.shape:
        raise ValueError(f"shapes differ: {a.shape} vs {b.shape}")
    if margin:
        a = a[margin:-margin, margin:-margin]
        b = b[margin:-margin, margin:-margin]
    den = np.linalg.norm(b)
    num = np.linalg.norm(a - b)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


def _peak_rss() -> int:
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss) * 1024


def run_bench(cfg: OpticalConfig, points: PointCloud, workers: int = 1, lut: Optional[WasabiLut] = None,
              baseline: bool = True, encode: bool = True, sink=None) -> RunReport:
    """Time both engines on the same points.

    The LUT build is timed separately and not part of the WASABI wall time,
    mirroring the N-LUT baseline whose patch table is likewise a one-off.
    With ``encode`` both engines binarize every tile inside their wall time;
    ``encode_s`` is the summed per-tile encoding time of the WASABI run.
    """
    report = RunReport(len(points), (cfg.tiles_per_side, cfg.tiles_per_side), cfg.gamma, workers)
    if lut is None:
        t0 = time.perf_counter()
        lut = build_lut(cfg)
        report.lut_s = time.perf_counter() - t0
    else:
        report.lut_s = lut.build_seconds
    pts = prepare_points(points, cfg, lut.specs)
    report.skipped_points = pts.skipped
    lock = threading.Lock()
    enc_s = [0.0]

    def make_sink(forward):
        def deliver(tile, field):
            if encode:
                t = time.perf_counter()
                binarize(interfere(field, reference_wave(tile, cfg)))
                with lock:
                    enc_s[0] += time.perf_counter() - t
            if forward is not None:
                forward(tile, field)
        return deliver

    stats: ComputeStats = compute_full(pts, cfg, lut, make_sink(sink), workers)
    phases = stats.phase_seconds()
    report.superpose_s = phases["superpose"]
    report.inverse_s = phases["inverse"]
    report.encode_s = enc_s[0]
    report.wasabi_s = stats.wall_s
    report.ops = stats.ops
    report.dropped = stats.dropped
    if baseline:
        base = compute_full_direct(pts, cfg, PsfTable(cfg), make_sink(None), "exact", workers)
        report.baseline_s = base.wall_s
        report.baseline_ops = base.ops
    report.peak_mem_bytes = _peak_rss()
    return report
