"""Shared optical types, coordinate snapping and depth quantization."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

__all__ = [
    "OpticalConfig",
    "PointSource",
    "PointCloud",
    "ComplexField",
    "TileIndex",
    "ConfigError",
    "DepthRangeError",
    "quantize_depth",
    "quantize_depths",
    "to_pixel",
    "snap_pixels",
    "is_power_of_two",
]


class ConfigError(ValueError):
    """Raised for physically or structurally invalid configurations."""


class DepthRangeError(ValueError):
    """Raised when a point depth lies outside the quantized depth range."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# Parameters that change the contents of a look-up table. n_w and the
# reference source only matter downstream of the LUT.
_LUT_FIELDS = (
    "wavelength",
    "pitch",
    "n_h",
    "z_min",
    "z_max",
    "n_z",
    "dz_override",
    "level",
    "gamma",
    "keep_all",
    "filter_name",
    "w_cap",
    "offset_mode",
)


@dataclass(frozen=True)
class OpticalConfig:
    """Physical and numerical parameters of a hologram computation.

    All lengths are in meters; ``n_w`` and ``n_h`` are pixel counts of the full
    hologram and of one square tile. Defaults reproduce the large printed
    hologram (65,536^2 pixels at 1 um, 8,192^2 tiles, +/-15 mm in 29 slices).
    """

    wavelength: float = 632.8e-9
    pitch: float = 1e-6
    n_w: int = 65536
    n_h: int = 8192
    z_min: float = -15e-3
    z_max: float = 15e-3
    n_z: int = 29
    reference_pos: tuple[float, float, float] = (0.0, 30e-3, -400e-3)
    level: int = 3
    gamma: float = 0.05
    keep_all: bool = False
    filter_name: str = "coif2"
    dz_override: Optional[float] = None
    # None: oversized PSFs are an error; "auto": clamp to the largest radius
    # that fits a tile; a number: explicit cap on W in pixels.
    w_cap: Optional[Union[str, float]] = None
    offset_mode: str = "exact"
    reference_kind: str = "diverging"

    def __post_init__(self) -> None:
        object.__setattr__(self, "reference_pos", tuple(float(v) for v in self.reference_pos))
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ConfigError(f"wavelength must be positive, got {self.wavelength!r}")
        if not (self.pitch > 0 and math.isfinite(self.pitch)):
            raise ConfigError(f"pitch must be positive, got {self.pitch!r}")
        if self.n_z < 1:
            raise ConfigError(f"n_z must be >= 1, got {self.n_z}")
        if self.z_min > self.z_max or (self.z_min == self.z_max and self.n_z != 1):
            raise ConfigError(
                f"need z_min < z_max (or z_min == z_max with n_z == 1), got "
                f"z_min={self.z_min!r}, z_max={self.z_max!r}, n_z={self.n_z}"
            )
        if not is_power_of_two(self.n_w) or not is_power_of_two(self.n_h):
            raise ConfigError(f"n_w and n_h must be powers of two, got {self.n_w}, {self.n_h}")
        if self.n_w % self.n_h:
            raise ConfigError(f"n_h={self.n_h} does not divide n_w={self.n_w}")
        if self.level < 1:
            raise ConfigError(f"wavelet level must be >= 1, got {self.level}")
        if self.n_h % (1 << self.level):
            raise ConfigError(f"n_h={self.n_h} not divisible by 2**level={1 << self.level}")
        if not (0 < self.gamma <= 1):
            raise ConfigError(f"selectivity gamma must lie in (0, 1], got {self.gamma!r}")
        if self.dz_override is not None and not self.dz_override > 0:
            raise ConfigError(f"dz_override must be positive, got {self.dz_override!r}")
        if self.offset_mode not in ("exact", "round"):
            raise ConfigError(f"offset_mode must be 'exact' or 'round', got {self.offset_mode!r}")
        if self.reference_kind not in ("diverging", "converging"):
            raise ConfigError(f"reference_kind must be 'diverging' or 'converging', got {self.reference_kind!r}")
        if self.w_cap is not None and self.w_cap != "auto":
            if isinstance(self.w_cap, str) or not self.w_cap >= 1:
                raise ConfigError(f"w_cap must be None, 'auto' or a number >= 1, got {self.w_cap!r}")

    @property
    def dz(self) -> float:
        """Depth slice spacing; 0 for a single slice without override."""
        if self.dz_override is not None:
            return float(self.dz_override)
        if self.n_z == 1:
            return 0.0
        return (self.z_max - self.z_min) / (self.n_z - 1)

    def slice_center(self, i: int) -> float:
        # Slice lattice is symmetric about the span midpoint. Without an
        # override it is z_min + i*dz, evaluated so that both ends and a
        # symmetric span's center come out exact.
        if self.dz_override is None:
            if self.n_z == 1:
                return 0.5 * (self.z_min + self.z_max)
            if i == 0:
                return self.z_min
            if i == self.n_z - 1:
                return self.z_max
            return (self.z_min * (self.n_z - 1 - i) + self.z_max * i) / (self.n_z - 1)
        mid = 0.5 * (self.z_min + self.z_max)
        return mid + (i - 0.5 * (self.n_z - 1)) * self.dz

    def slice_centers(self) -> np.ndarray:
        return np.array([self.slice_center(i) for i in range(self.n_z)])

    @property
    def tiles_per_side(self) -> int:
        return self.n_w // self.n_h

    @property
    def n_tiles(self) -> int:
        return self.tiles_per_side ** 2

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    def tiles(self) -> list["TileIndex"]:
        n = self.tiles_per_side
        return [TileIndex(s, t) for t in range(n) for s in range(n)]

    def lut_key(self) -> str:
        parts = []
        for name in _LUT_FIELDS:
            v = getattr(self, name)
            if isinstance(v, float):
                v = v.hex()
            parts.append(f"{name}={v!r}")
        return ";".join(parts)

    def config_hash(self) -> bytes:
        """32-byte digest of every parameter that affects LUT contents."""
        return hashlib.sha256(self.lut_key().encode()).digest()


class PointSource(NamedTuple):
    x: float
    y: float
    z: float
    a: float = 1.0


@dataclass(frozen=True)
class PointCloud:
    """Ordered object points, stored column-wise."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        cols = [np.array(c, dtype=np.float64).reshape(-1) for c in (self.x, self.y, self.z, self.a)]
        n = len(cols[0])
        if any(len(c) != n for c in cols):
            raise ValueError("point columns differ in length")
        for name, c in zip("xyza", cols):
            if not np.all(np.isfinite(c)):
                bad = int(np.flatnonzero(~np.isfinite(c))[0])
                raise ValueError(f"non-finite {name} at point {bad}: {c[bad]!r}")
            c.setflags(write=False)
            object.__setattr__(self, name, c)
        if np.any(cols[3] < 0):
            bad = int(np.flatnonzero(cols[3] < 0)[0])
            raise ValueError(f"negative intensity at point {bad}: {cols[3][bad]!r}")

    @classmethod
    def from_points(cls, points: Sequence[PointSource]) -> "PointCloud":
        arr = np.asarray([tuple(p) for p in points], dtype=np.float64).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])

    @classmethod
    def empty(cls) -> "PointCloud":
        e = np.zeros(0)
        return cls(e, e, e, e)

    def __len__(self) -> int:
        return len(self.x)

    def __iter__(self) -> Iterator[PointSource]:
        for row in zip(self.x.tolist(), self.y.tolist(), self.z.tolist(), self.a.tolist()):
            yield PointSource(*row)

    def __getitem__(self, i: int) -> PointSource:
        return PointSource(float(self.x[i]), float(self.y[i]), float(self.z[i]), float(self.a[i]))

    @property
    def points(self) -> list[PointSource]:
        return list(self)

    @property
    def count(self) -> int:
        return len(self)


@dataclass
class ComplexField:
    """Row-major complex amplitudes on a regular grid (``data[row, col]``)."""

    data: np.ndarray
    pitch: float = 1e-6

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or min(self.data.shape) < 1:
            raise ValueError(f"field must be a non-empty 2-D array, got shape {self.data.shape}")
        if not np.iscomplexobj(self.data):
            self.data = self.data.astype(np.complex128)

    @classmethod
    def zeros(cls, width: int, height: Optional[int] = None, pitch: float = 1e-6) -> "ComplexField":
        return cls(np.zeros((height or width, width), dtype=np.complex128), pitch)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


class TileIndex(NamedTuple):
    s: int
    t: int

    def check(self, cfg: OpticalConfig) -> "TileIndex":
        n = cfg.tiles_per_side
        if not (0 <= self.s < n and 0 <= self.t < n):
            raise ValueError(f"tile {tuple(self)} outside the {n}x{n} tile grid")
        return self

    def origin(self, cfg: OpticalConfig) -> tuple[int, int]:
        """Full-frame pixel (ix, iy) of the tile's first pixel."""
        return self.s * cfg.n_h, self.t * cfg.n_h


def _depth_bounds(cfg: OpticalConfig) -> tuple[float, float]:
    half = 0.5 * cfg.dz
    lo = cfg.slice_center(0) - half
    hi = cfg.slice_center(cfg.n_z - 1) + half
    slack = 1e-9 * max(abs(lo), abs(hi), cfg.dz, 1e-12)
    return lo - slack, hi + slack


def quantize_depths(z: np.ndarray, cfg: OpticalConfig) -> np.ndarray:
    """Vectorized nearest-slice index; ties go to the lower slice."""
    z = np.asarray(z, dtype=np.float64)
    lo, hi = _depth_bounds(cfg)
    bad = (z < lo) | (z > hi) | ~np.isfinite(z)
    if np.any(bad):
        v = float(z[np.flatnonzero(bad.ravel())[0]] if z.ndim else z)
        raise DepthRangeError(
            f"depth z={v!r} m outside quantized range [{lo!r}, {hi!r}] m"
        )
    if cfg.n_z == 1 or cfg.dz == 0:
        return np.zeros(z.shape, dtype=np.int64)
    u = (z - cfg.slice_center(0)) / cfg.dz
    idx = np.ceil(u - 0.5).astype(np.int64)
    return np.clip(idx, 0, cfg.n_z - 1)


def quantize_depth(z: float, cfg: OpticalConfig) -> int:
    return int(quantize_depths(np.asarray(z), cfg))


def snap_pixels(x: np.ndarray, y: np.ndarray, cfg: OpticalConfig) -> tuple[np.ndarray, np.ndarray]:
    """Nearest full-frame pixel for physical coordinates (ties toward +inf)."""
    half = cfg.n_w // 2
    ix = np.floor(np.asarray(x, dtype=np.float64) / cfg.pitch + 0.5).astype(np.int64) + half
    iy = np.floor(np.asarray(y, dtype=np.float64) / cfg.pitch + 0.5).astype(np.int64) + half
    return ix, iy


def to_pixel(p: PointSource, cfg: OpticalConfig) -> tuple[int, int]:
    if not (math.isfinite(p.x) and math.isfinite(p.y)):
        raise ValueError(f"non-finite point position ({p.x!r}, {p.y!r})")
    ix, iy = snap_pixels(np.asarray(p.x), np.asarray(p.y), cfg)
    return int(ix), int(iy)
