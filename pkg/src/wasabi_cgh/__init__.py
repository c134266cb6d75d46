"""Wavelet-domain (WASABI) computer-generated hologram engine."""

from .direct import PsfTable, compute_full_direct, direct_tile, naive_pixelwise
from .encode import angular_spectrum, binarize, complex_hologram, interfere, reconstruct, reference_wave
from .engine import compute_full, compute_tile
from .field import ComplexField, ConfigError, OpticalConfig, PointCloud, PointSource, TileIndex
from .formats import load_config, load_points, parse_config, read_field, save_points, write_field
from .lut import build_lut, read_lut, write_lut
from .sinks import HfldFileSink, MemorySink, TileDirSink
from .wavelet import fwt2, get_filter, ifwt2, shrink

__version__ = "0.1.0"

__all__ = [
    "OpticalConfig", "PointSource", "PointCloud", "ComplexField", "TileIndex", "ConfigError",
    "fwt2", "ifwt2", "shrink", "get_filter",
    "build_lut", "read_lut", "write_lut",
    "compute_tile", "compute_full",
    "PsfTable", "direct_tile", "compute_full_direct", "naive_pixelwise",
    "reference_wave", "interfere", "complex_hologram", "binarize", "angular_spectrum", "reconstruct",
    "load_points", "save_points", "read_field", "write_field", "load_config", "parse_config",
    "MemorySink", "TileDirSink", "HfldFileSink",
]
