"""Depth-quantized PSFs and the wavelet-domain look-up table.

For every depth slice the PSF is synthesized at the tile center shifted by
each residual offset (rx, ry) in [0, 2**level)^2, transformed, and shrunk
to its N_r strongest coefficients. A point whose tile-relative position has
that residual then becomes an exact integer shift of the stored indices.
"""

from __future__ import annotations

import io
import math
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .field import ComplexField, ConfigError, OpticalConfig
from .fileio import atomic_open
from .wavelet import SparseCoeffs, WaveletFilter, band_layout, fwt2, get_filter, shrink, shrink_shifts

__all__ = [
    "AliasingError",
    "FormatError",
    "StaleLutError",
    "PsfSpec",
    "WasabiLut",
    "footprint_radius",
    "psf_radius",
    "n_strong",
    "support_margin",
    "max_footprint",
    "psf_spec",
    "psf_specs",
    "psf_patch",
    "synthesize_psf",
    "build_lut",
    "write_lut",
    "read_lut",
]


class AliasingError(ConfigError):
    """Wavelength too long for the pixel pitch (Nyquist violated)."""


class StaleLutError(ValueError):
    """LUT config hash does not match the active configuration."""


class FormatError(ValueError):
    """Malformed or incompatible binary file."""


def _max_angle_tan(cfg: OpticalConfig) -> float:
    s = cfg.wavelength / (2.0 * cfg.pitch)
    if s >= 1.0:
        raise AliasingError(
            f"wavelength {cfg.wavelength!r} m >= 2 * pitch {cfg.pitch!r} m: no propagating diffraction angle"
        )
    return math.tan(math.asin(s))


def support_margin(cfg: OpticalConfig, filt: Optional[WaveletFilter] = None) -> int:
    """Pixels a coarsest-level basis function can reach beyond a PSF."""
    filt = filt or get_filter(cfg.filter_name)
    return (filt.support - 1) << cfg.level


def max_footprint(cfg: OpticalConfig, filt: Optional[WaveletFilter] = None) -> int:
    """Largest footprint radius whose coefficients stay inside one tile."""
    return cfg.n_h // 2 - support_margin(cfg, filt)


def _uncapped_footprint(z_c: float, cfg: OpticalConfig) -> int:
    return int(math.ceil(abs(z_c) * _max_angle_tan(cfg) / cfg.pitch))


def footprint_radius(z_c: float, cfg: OpticalConfig, filt: Optional[WaveletFilter] = None) -> int:
    """Circ support radius in pixels (2W), after the configured cap."""
    r = _uncapped_footprint(z_c, cfg)
    if cfg.w_cap == "auto":
        limit = max_footprint(cfg, filt)
        if limit < 0:
            raise ConfigError(f"n_h={cfg.n_h} is smaller than twice the {support_margin(cfg, filt)} px "
                              f"wavelet support margin; no PSF fits a tile")
        r = min(r, limit)
    elif cfg.w_cap is not None:
        r = min(r, int(math.floor(2 * cfg.w_cap)))
    return r


def psf_radius(z_c: float, cfg: OpticalConfig, filt: Optional[WaveletFilter] = None) -> float:
    """PSF radius W in pixels: half the grating-equation footprint, at least 1."""
    return max(1.0, footprint_radius(z_c, cfg, filt) / 2.0)


def n_strong(w: float, gamma: float) -> int:
    if not w > 0:
        raise ValueError(f"W must be positive, got {w!r}")
    if not (0 < gamma <= 1):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma!r}")
    return max(1, int(math.floor(math.pi * (w / 2.0) ** 2 * gamma + 0.5)))


@dataclass(frozen=True)
class PsfSpec:
    slice_index: int
    z_c: float
    w: float
    footprint: int  # circ radius in pixels
    n_r: int


def psf_spec(i: int, cfg: OpticalConfig, filt: Optional[WaveletFilter] = None) -> PsfSpec:
    z_c = cfg.slice_center(i)
    r = footprint_radius(z_c, cfg, filt)
    w = max(1.0, r / 2.0)
    return PsfSpec(i, z_c, w, r, n_strong(w, cfg.gamma))


def psf_specs(cfg: OpticalConfig, filt: Optional[WaveletFilter] = None) -> list[PsfSpec]:
    return [psf_spec(i, cfg, filt) for i in range(cfg.n_z)]


def psf_patch(z_c: float, radius: int, cfg: OpticalConfig) -> np.ndarray:
    """(2R+1)^2 patch of exp(ikr) inside the circ support, centered on the point."""
    d = np.arange(-radius, radius + 1, dtype=np.int64)
    dx = d[None, :]
    dy = d[:, None]
    inside = dx * dx + dy * dy <= radius * radius
    px = (dx * cfg.pitch) ** 2
    py = (dy * cfg.pitch) ** 2
    r = np.sqrt(px + py + z_c * z_c)
    return np.where(inside, np.exp(1j * cfg.wavenumber * r), 0.0)


def _check_fits(spec: PsfSpec, cfg: OpticalConfig, filt: WaveletFilter) -> None:
    limit = max_footprint(cfg, filt)
    if spec.footprint > limit:
        raise ConfigError(
            f"PSF footprint radius {spec.footprint} px at z={spec.z_c!r} m (slice {spec.slice_index}) "
            f"exceeds the {limit} px that fit an n_h={cfg.n_h} tile; use a larger n_h, "
            f"a smaller |z|, or set w_cap"
        )


def synthesize_psf(z_c: float, offset: tuple[int, int], cfg: OpticalConfig,
                   filt: Optional[WaveletFilter] = None) -> ComplexField:
    """Tile-sized PSF centered on pixel (n_h/2 + rx, n_h/2 + ry)."""
    filt = filt or get_filter(cfg.filter_name)
    rx, ry = offset
    step = 1 << cfg.level
    if not (0 <= rx < step and 0 <= ry < step):
        raise ValueError(f"offset {offset} outside [0, {step})^2")
    r = footprint_radius(z_c, cfg, filt)
    _check_fits(PsfSpec(-1, z_c, max(1.0, r / 2), r, 1), cfg, filt)
    out = np.zeros((cfg.n_h, cfg.n_h), np.complex128)
    c = cfg.n_h // 2
    out[c + ry - r: c + ry + r + 1, c + rx - r: c + rx + r + 1] = psf_patch(z_c, r, cfg)
    return ComplexField(out, cfg.pitch)


@dataclass
class WasabiLut:
    """Sparse wavelet-domain PSFs keyed by (slice, rx, ry).

    Entries are stored back to back; ``starts[k]:starts[k+1]`` is the list
    of class ``k = (slice * classes_per_slice) + ry * step + rx``.
    """

    n_h: int
    level: int
    n_z: int
    gamma: float
    keep_all: bool
    filter_name: str
    offset_mode: str
    config_hash: bytes
    specs: list[PsfSpec]
    band: np.ndarray
    m: np.ndarray
    n: np.ndarray
    value: np.ndarray
    starts: np.ndarray
    present: np.ndarray  # bool per class
    build_seconds: float = 0.0
    _tables: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def step(self) -> int:
        return 1 << self.level

    @property
    def classes_per_slice(self) -> int:
        return self.step * self.step if self.offset_mode == "exact" else 1

    @property
    def n_classes(self) -> int:
        return self.n_z * self.classes_per_slice

    @property
    def complete(self) -> bool:
        return bool(self.present.all())

    def class_index(self, slice_index: int, rx: int, ry: int) -> int:
        if self.offset_mode == "round":
            return slice_index
        return slice_index * self.classes_per_slice + ry * self.step + rx

    def class_key(self, k: int) -> tuple[int, int, int]:
        per = self.classes_per_slice
        s, rem = divmod(k, per)
        return s, rem % self.step, rem // self.step

    def entries(self, slice_index: int, rx: int = 0, ry: int = 0) -> SparseCoeffs:
        k = self.class_index(slice_index, rx, ry)
        if not self.present[k]:
            raise KeyError(f"LUT has no entry for slice {slice_index}, offset ({rx}, {ry})")
        a, b = int(self.starts[k]), int(self.starts[k + 1])
        layout = band_layout(self.n_h, self.level)
        levels = np.array([info.level for info in layout], dtype=np.uint8)
        band = self.band[a:b]
        return SparseCoeffs(band, levels[band], self.m[a:b], self.n[a:b], self.value[a:b], self.n_h, self.level)

    def __len__(self) -> int:
        return int(self.present.sum())

    @property
    def total_entries(self) -> int:
        return int(self.value.size)

    @property
    def nbytes(self) -> int:
        return self.band.nbytes + self.m.nbytes + self.n.nbytes + self.value.nbytes

    def band_tables(self):
        """Per-band (row0, col0, size, shift factor) arrays for the accumulator."""
        if self._tables is None:
            layout = band_layout(self.n_h, self.level)
            r0 = np.array([b.row0 for b in layout], dtype=np.int64)
            c0 = np.array([b.col0 for b in layout], dtype=np.int64)
            size = np.array([b.size for b in layout], dtype=np.int64)
            factor = np.array([1 << (self.level - b.level) for b in layout], dtype=np.int64)
            self._tables = (r0, c0, size, factor)
        return self._tables

    def check_config(self, cfg: OpticalConfig) -> None:
        if cfg.config_hash() != self.config_hash:
            raise StaleLutError(
                "look-up table was built for a different configuration; rebuild it with `build-lut`"
            )


def build_lut(cfg: OpticalConfig, filt: Optional[WaveletFilter] = None,
              only: Optional[Iterable[tuple[int, int, int]]] = None) -> WasabiLut:
    """Pre-compute the sparse wavelet-domain PSF table.

    ``only`` restricts the build to the given (slice, rx, ry) keys; the
    result is then partial and the engine refuses points needing a missing
    entry.
    """
    t0 = time.perf_counter()
    filt = filt or get_filter(cfg.filter_name)
    if filt.name != cfg.filter_name:
        raise ConfigError(f"filter {filt.name!r} does not match config filter {cfg.filter_name!r}")
    step = 1 << cfg.level
    if cfg.n_h < 2 * step:
        raise ConfigError(f"n_h={cfg.n_h} must be at least 2 * 2**level = {2 * step}")
    specs = psf_specs(cfg, filt)
    wanted = None if only is None else set(only)

    per = step * step if cfg.offset_mode == "exact" else 1
    n_classes = cfg.n_z * per
    lists: list[Optional[SparseCoeffs]] = [None] * n_classes
    c = cfg.n_h // 2
    for spec in specs:
        if wanted is not None and not any(key[0] == spec.slice_index for key in wanted):
            continue
        try:
            _check_fits(spec, cfg, filt)
            base = np.zeros((cfg.n_h, cfg.n_h), np.complex128)
            r = spec.footprint
            base[c - r: c + r + 1, c - r: c + r + 1] = psf_patch(spec.z_c, r, cfg)
            if cfg.offset_mode == "exact":
                keys = None if wanted is None else [(rx, ry) for s, rx, ry in wanted if s == spec.slice_index]
                variants = shrink_shifts(base, cfg.level, filt, spec.n_r, cfg.keep_all, keys)
            else:
                variants = iter([((0, 0), shrink(fwt2(base, cfg.level, filt), spec.n_r, cfg.keep_all))])
            for (rx, ry), coeffs in variants:
                k = spec.slice_index * per + (ry * step + rx if per > 1 else 0)
                lists[k] = coeffs
        except ConfigError:
            raise
        except Exception as exc:  # annotate with the failing slice
            raise RuntimeError(f"LUT build failed at slice {spec.slice_index} (z={spec.z_c!r} m): {exc}") from exc

    present = np.array([lst is not None for lst in lists], dtype=bool)
    counts = np.array([len(lst) if lst is not None else 0 for lst in lists], dtype=np.int64)
    starts = np.zeros(n_classes + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    kept = [lst for lst in lists if lst is not None]

    def cat(attr, dtype):
        if not kept:
            return np.zeros(0, dtype=dtype)
        return np.concatenate([getattr(lst, attr) for lst in kept]).astype(dtype, copy=False)

    return WasabiLut(
        n_h=cfg.n_h,
        level=cfg.level,
        n_z=cfg.n_z,
        gamma=cfg.gamma,
        keep_all=cfg.keep_all,
        filter_name=filt.name,
        offset_mode=cfg.offset_mode,
        config_hash=cfg.config_hash(),
        specs=specs,
        band=cat("band", np.uint8),
        m=cat("m", np.uint32),
        n=cat("n", np.uint32),
        value=cat("value", np.complex128),
        starts=starts,
        present=present,
        build_seconds=time.perf_counter() - t0,
    )


# -- WLUT cache file ----------------------------------------------------------
# header: b"WLUT", version u32, config hash (32 bytes), n_z u32, level u32,
#         gamma f64, list count u32
# lists:  slice u32, rx u32, ry u32, count u32, then count records of
#         (band u8, level u8, m u32, n u32, re f64, im f64), little-endian

_LUT_MAGIC = b"WLUT"
_LUT_VERSION = 1
_LUT_HEADER = struct.Struct("<4sI32sIIdI")
_LIST_HEADER = struct.Struct("<IIII")
RECORD_DTYPE = np.dtype(
    [("band", "u1"), ("level", "u1"), ("m", "<u4"), ("n", "<u4"), ("re", "<f8"), ("im", "<f8")]
)


def _lut_bytes(lut: WasabiLut, out: io.BufferedIOBase) -> None:
    out.write(_LUT_HEADER.pack(_LUT_MAGIC, _LUT_VERSION, lut.config_hash, lut.n_z, lut.level,
                               lut.gamma, int(lut.present.sum())))
    for k in np.flatnonzero(lut.present):
        s, rx, ry = lut.class_key(int(k))
        coeffs = lut.entries(s, rx, ry)
        rec = np.empty(len(coeffs), dtype=RECORD_DTYPE)
        rec["band"] = coeffs.band
        rec["level"] = coeffs.level
        rec["m"] = coeffs.m
        rec["n"] = coeffs.n
        rec["re"] = coeffs.value.real
        rec["im"] = coeffs.value.imag
        out.write(_LIST_HEADER.pack(s, rx, ry, len(coeffs)))
        out.write(rec.tobytes())


def write_lut(path, lut: WasabiLut) -> Path:
    path = Path(path)
    with atomic_open(path) as f:
        _lut_bytes(lut, f)
    return path


def read_lut(path, cfg: OpticalConfig) -> WasabiLut:
    """Load a WLUT file and verify it belongs to ``cfg``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no LUT at {path}; create one with `wasabi-cgh build-lut`")
    raw = path.read_bytes()
    if len(raw) < _LUT_HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, version, digest, n_z, level, gamma, n_lists = _LUT_HEADER.unpack_from(raw, 0)
    if magic != _LUT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_LUT_MAGIC!r}")
    if version != _LUT_VERSION:
        raise FormatError(f"{path}: unsupported WLUT version {version}")
    if digest != cfg.config_hash():
        raise StaleLutError(f"{path}: built for a different configuration; rerun `build-lut`")
    if n_z != cfg.n_z or level != cfg.level or gamma != cfg.gamma:
        raise FormatError(f"{path}: header n_z/level/gamma disagree with the configuration")
    per = (1 << (2 * level)) if cfg.offset_mode == "exact" else 1
    n_classes = n_z * per
    pos = _LUT_HEADER.size
    parts: dict[int, np.ndarray] = {}
    for _ in range(n_lists):
        if pos + _LIST_HEADER.size > len(raw):
            raise FormatError(f"{path}: truncated list header at byte {pos}")
        s, rx, ry, count = _LIST_HEADER.unpack_from(raw, pos)
        pos += _LIST_HEADER.size
        nbytes = count * RECORD_DTYPE.itemsize
        if pos + nbytes > len(raw):
            raise FormatError(f"{path}: expected {nbytes} record bytes at {pos}, file has {len(raw) - pos}")
        k = s * per + (ry * (1 << level) + rx if per > 1 else 0)
        parts[k] = np.frombuffer(raw, dtype=RECORD_DTYPE, count=count, offset=pos)
        pos += nbytes
    if pos != len(raw):
        raise FormatError(f"{path}: {len(raw) - pos} trailing bytes")

    present = np.zeros(n_classes, dtype=bool)
    counts = np.zeros(n_classes, dtype=np.int64)
    for k, rec in parts.items():
        present[k] = True
        counts[k] = rec.size
    starts = np.zeros(n_classes + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    ordered = [parts[k] for k in sorted(parts)]
    rec = np.concatenate(ordered) if ordered else np.zeros(0, dtype=RECORD_DTYPE)
    value = np.empty(rec.size, np.complex128)
    value.real = rec["re"]
    value.imag = rec["im"]
    return WasabiLut(
        n_h=cfg.n_h,
        level=level,
        n_z=n_z,
        gamma=gamma,
        keep_all=cfg.keep_all,
        filter_name=cfg.filter_name,
        offset_mode=cfg.offset_mode,
        config_hash=digest,
        specs=psf_specs(cfg),
        band=rec["band"].copy(),
        m=rec["m"].astype(np.uint32),
        n=rec["n"].astype(np.uint32),
        value=value,
        starts=starts,
        present=present,
    )
