"""Tile sinks: receive each finished tile exactly once, in any order."""

from __future__ import annotations

import contextlib
import os
import threading
from pathlib import Path

import numpy as np

from .field import ComplexField, OpticalConfig, TileIndex
from .fileio import temp_sibling
from .formats import HFLD_HEADER_SIZE, pack_header, write_field

__all__ = ["MemorySink", "TileDirSink", "HfldFileSink", "DuplicateTileError"]


class DuplicateTileError(RuntimeError):
    pass


class _Once:
    def __init__(self):
        self._seen: set = set()
        self._lock = threading.Lock()

    def claim(self, tile: TileIndex) -> None:
        with self._lock:
            if tuple(tile) in self._seen:
                raise DuplicateTileError(f"tile {tuple(tile)} delivered twice")
            self._seen.add(tuple(tile))

    @property
    def count(self) -> int:
        return len(self._seen)


def _place(dest: np.ndarray, tile: TileIndex, cfg: OpticalConfig, field: ComplexField) -> None:
    nh = cfg.n_h
    if field.data.shape != (nh, nh):
        raise ValueError(f"tile {tuple(tile)} has shape {field.data.shape}, expected {(nh, nh)}")
    x0, y0 = tile.origin(cfg)
    dest[y0: y0 + nh, x0: x0 + nh] = field.data


class MemorySink:
    """Assembles the whole hologram in memory."""

    def __init__(self, cfg: OpticalConfig):
        self.cfg = cfg
        self.data = np.zeros((cfg.n_w, cfg.n_w), np.complex128)
        self._once = _Once()

    def __call__(self, tile: TileIndex, field: ComplexField) -> None:
        tile = TileIndex(*tile).check(self.cfg)
        self._once.claim(tile)
        _place(self.data, tile, self.cfg, field)

    @property
    def field(self) -> ComplexField:
        return ComplexField(self.data, self.cfg.pitch)

    @property
    def complete(self) -> bool:
        return self._once.count == self.cfg.n_tiles


class TileDirSink:
    """Writes each tile as ``tile_<s>_<t>.hfld`` inside a directory."""

    def __init__(self, directory, cfg: OpticalConfig):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self._once = _Once()

    def path(self, tile: TileIndex) -> Path:
        return self.dir / f"tile_{tile.s}_{tile.t}.hfld"

    def __call__(self, tile: TileIndex, field: ComplexField) -> None:
        tile = TileIndex(*tile).check(self.cfg)
        self._once.claim(tile)
        write_field(self.path(tile), field, self.cfg.wavelength)


class HfldFileSink:
    """Streams tiles into one full-size HFLD file without holding it in memory.

    Tiles go to a memory-mapped temporary file that is renamed over the
    target by ``close()`` once every tile has arrived. Use as a context
    manager; on error the temporary file is removed.
    """

    def __init__(self, path, cfg: OpticalConfig):
        self.path = Path(path)
        self.cfg = cfg
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._tmp = temp_sibling(self.path)
        n = cfg.n_w
        with open(self._tmp, "wb") as f:
            f.write(pack_header(n, n, cfg.pitch, cfg.wavelength))
            f.truncate(HFLD_HEADER_SIZE + n * n * 16)
        self._map = np.memmap(self._tmp, dtype="<c16", mode="r+", offset=HFLD_HEADER_SIZE, shape=(n, n))
        self._once = _Once()
        self._lock = threading.Lock()

    def __call__(self, tile: TileIndex, field: ComplexField) -> None:
        tile = TileIndex(*tile).check(self.cfg)
        self._once.claim(tile)
        with self._lock:
            _place(self._map, tile, self.cfg, field)

    def close(self) -> Path:
        if self._once.count != self.cfg.n_tiles:
            self.abort()
            raise RuntimeError(f"only {self._once.count} of {self.cfg.n_tiles} tiles arrived; output discarded")
        self._map.flush()
        del self._map
        os.replace(self._tmp, self.path)
        return self.path

    def abort(self) -> None:
        if hasattr(self, "_map"):
            del self._map
        with contextlib.suppress(FileNotFoundError):
            os.unlink(self._tmp)

    def __enter__(self) -> "HfldFileSink":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.close()
        else:
            self.abort()
