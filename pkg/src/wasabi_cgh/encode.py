"""Reference interference, binarization and angular-spectrum reconstruction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .field import ComplexField, OpticalConfig, TileIndex, is_power_of_two
from .wavelet import DimensionError

__all__ = [
    "RealField",
    "BitField",
    "reference_wave",
    "interfere",
    "complex_hologram",
    "binarize",
    "angular_spectrum",
    "reconstruct",
    "ncc",
]


@dataclass
class RealField:
    data: np.ndarray  # float64, [row, col]
    pitch: float = 1e-6

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or min(self.data.shape) < 1:
            raise DimensionError(f"real field must be a non-empty 2-D array, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("real field contains non-finite values")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass
class BitField:
    data: np.ndarray  # bool, [row, col]
    pitch: float = 1e-6

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=bool)
        if self.data.ndim != 2 or min(self.data.shape) < 1:
            raise DimensionError(f"bit field must be a non-empty 2-D array, got shape {self.data.shape}")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def count(self) -> int:
        return int(np.count_nonzero(self.data))


def _tile_coords(tile: TileIndex, cfg: OpticalConfig):
    tile = TileIndex(*tile).check(cfg)
    nh = cfg.n_h
    half = cfg.n_w // 2
    x = (np.arange(nh, dtype=np.float64) + (tile.s * nh - half)) * cfg.pitch
    y = (np.arange(nh, dtype=np.float64) + (tile.t * nh - half)) * cfg.pitch
    return x[None, :], y[:, None]


def reference_wave(tile: TileIndex, cfg: OpticalConfig) -> ComplexField:
    """Unit-amplitude spherical reference wave on the tile's absolute pixels.

    ``reference_kind="diverging"`` gives exp(+ikr), "converging" exp(-ikr).
    """
    xr, yr, zr = cfg.reference_pos
    if zr == 0:
        raise ValueError("reference source must lie off the hologram plane (z_r != 0)")
    x, y = _tile_coords(tile, cfg)
    r = np.sqrt((x - xr) ** 2 + (y - yr) ** 2 + zr * zr)
    sign = 1.0 if cfg.reference_kind == "diverging" else -1.0
    return ComplexField(np.exp(1j * (sign * cfg.wavenumber) * r), cfg.pitch)


def _same_shape(a: ComplexField, b: ComplexField) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"field shapes differ: {a.data.shape} vs {b.data.shape}")


def interfere(u: ComplexField, ref: ComplexField) -> RealField:
    """Bipolar intensity Re(u * conj(R))."""
    _same_shape(u, ref)
    return RealField(np.real(u.data * np.conj(ref.data)), u.pitch)


def complex_hologram(u: ComplexField, ref: ComplexField) -> ComplexField:
    _same_shape(u, ref)
    return ComplexField(u.data * np.conj(ref.data), u.pitch)


def binarize(field: RealField, rule: str = "sign") -> BitField:
    """Threshold at zero ("sign") or at the tile median ("median").

    The median threshold is the element of rank n // 2 in ascending order,
    so a field of distinct values gets exactly ceil(n / 2) ones.
    """
    data = field.data
    if rule == "sign":
        thresh = 0.0
    elif rule == "median":
        flat = data.ravel()
        k = flat.size // 2
        thresh = np.partition(flat, k)[k]
    else:
        raise ValueError(f"binarization rule must be 'sign' or 'median', got {rule!r}")
    return BitField(data >= thresh, field.pitch)


def angular_spectrum(f: ComplexField, d: float, cfg: OpticalConfig) -> ComplexField:
    """Propagate ``f`` by distance ``d``; evanescent frequencies are zeroed."""
    data = f.data
    n = data.shape[0]
    if data.ndim != 2 or data.shape[1] != n or not is_power_of_two(n):
        raise DimensionError(f"angular spectrum needs a square power-of-two field, got {data.shape}")
    if d == 0:
        return ComplexField(np.array(data, dtype=np.complex128), f.pitch)
    fx = np.fft.fftfreq(n, d=f.pitch)
    arg = 1.0 / cfg.wavelength ** 2 - fx[None, :] ** 2 - fx[:, None] ** 2
    prop = arg > 0
    kz = np.sqrt(np.where(prop, arg, 0.0))
    h = np.where(prop, np.exp(1j * 2 * np.pi * d * kz), 0.0)
    return ComplexField(np.fft.ifft2(np.fft.fft2(data) * h), f.pitch)


def reconstruct(holo: Union[BitField, ComplexField, RealField], z: float, cfg: OpticalConfig,
                tile: TileIndex = TileIndex(0, 0), normalize: bool = True) -> RealField:
    """Illuminate with the reference wave and back-propagate to depth ``z``.

    The object wave of a point at depth z is focused by propagating over -z.
    The intensity is scaled to [0, 1] unless ``normalize`` is false.
    """
    ref = reference_wave(tile, cfg)
    if isinstance(holo, BitField):
        amp = holo.data.astype(np.float64)
    else:
        amp = holo.data
    if amp.shape != ref.data.shape:
        raise DimensionError(f"hologram shape {amp.shape} does not match tile shape {ref.data.shape}")
    field = angular_spectrum(ComplexField(amp * ref.data, holo.pitch), -z, cfg)
    inten = np.abs(field.data) ** 2
    if normalize:
        peak = inten.max()
        inten = inten / peak if peak > 0 else inten
    return RealField(inten, holo.pitch)


def ncc(a: Union[RealField, np.ndarray], b: Union[RealField, np.ndarray]) -> float:
    """Zero-mean normalized cross-correlation of two equally shaped images."""
    x = np.asarray(getattr(a, "data", a), dtype=np.float64).ravel()
    y = np.asarray(getattr(b, "data", b), dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"image sizes differ: {x.size} vs {y.size}")
    x = x - x.mean()
    y = y - y.mean()
    den = np.sqrt(np.dot(x, x) * np.dot(y, y))
    return float(np.dot(x, y) / den) if den > 0 else 0.0
