"""On-disk formats: point lists, HFLD complex fields, PGM/PBM images, configs.

HFLD layout (little-endian)::

    b"HFLD"  version u32  width u32  height u32  pitch f64  wavelength f64
    width * height * (re f64, im f64), row-major

The header is 32 bytes.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .encode import BitField, RealField
from .field import ComplexField, ConfigError, OpticalConfig, PointCloud
from .fileio import atomic_open

__all__ = [
    "FormatError",
    "HfldHeader",
    "RunConfig",
    "load_points",
    "save_points",
    "write_field",
    "read_field",
    "read_header",
    "write_image",
    "read_pbm",
    "read_pgm",
    "load_config",
    "parse_config",
    "format_config",
    "HFLD_HEADER_SIZE",
]


class FormatError(ValueError):
    """A file does not follow the expected layout."""


# -- point lists --------------------------------------------------------------


def load_points(path) -> PointCloud:
    """Read "x y z a" lines in meters; '#' starts a comment."""
    path = Path(path)
    cols: list[list[float]] = [[], [], [], []]
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 values 'x y z a', got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{path}:{lineno}: non-finite value in {text!r}")
            for c, v in zip(cols, vals):
                c.append(v)
    return PointCloud(*(np.array(c, dtype=np.float64) for c in cols))


def save_points(path, cloud: PointCloud) -> Path:
    # 17 significant digits round-trip every float64 exactly
    path = Path(path)
    with atomic_open(path, "w") as f:
        f.write(f"# x y z a  ({len(cloud)} points, meters)\n")
        for x, y, z, a in zip(cloud.x.tolist(), cloud.y.tolist(), cloud.z.tolist(), cloud.a.tolist()):
            f.write(f"{x:.17g} {y:.17g} {z:.17g} {a:.17g}\n")
    return path


# -- HFLD complex fields ------------------------------------------------------

_HFLD_MAGIC = b"HFLD"
_HFLD_VERSION = 1
_HFLD = struct.Struct("<4sIIIdd")
HFLD_HEADER_SIZE = _HFLD.size


class HfldHeader(NamedTuple):
    version: int
    width: int
    height: int
    pitch: float
    wavelength: float

    @property
    def payload_bytes(self) -> int:
        return self.width * self.height * 16


def pack_header(width: int, height: int, pitch: float, wavelength: float) -> bytes:
    return _HFLD.pack(_HFLD_MAGIC, _HFLD_VERSION, width, height, pitch, wavelength)


def _parse_header(raw: bytes, path) -> HfldHeader:
    if len(raw) < HFLD_HEADER_SIZE:
        raise FormatError(f"{path}: truncated header, expected {HFLD_HEADER_SIZE} bytes, got {len(raw)}")
    magic, version, w, h, pitch, wl = _HFLD.unpack_from(raw, 0)
    if magic != _HFLD_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_HFLD_MAGIC!r}")
    if version != _HFLD_VERSION:
        raise FormatError(f"{path}: unsupported HFLD version {version}, expected {_HFLD_VERSION}")
    return HfldHeader(version, w, h, pitch, wl)


def read_header(path) -> HfldHeader:
    with open(path, "rb") as f:
        return _parse_header(f.read(HFLD_HEADER_SIZE), path)


def write_field(path, field: ComplexField, wavelength: float = 632.8e-9) -> Path:
    path = Path(path)
    data = np.ascontiguousarray(field.data, dtype="<c16")
    with atomic_open(path) as f:
        f.write(pack_header(field.width, field.height, field.pitch, wavelength))
        f.write(data.tobytes())
    return path


def read_field(path, mmap: bool = False) -> ComplexField:
    """Read an HFLD file; ``mmap`` maps the payload read-only instead of loading it."""
    path = Path(path)
    hdr = read_header(path)
    size = path.stat().st_size
    actual = size - HFLD_HEADER_SIZE
    if actual != hdr.payload_bytes:
        raise FormatError(f"{path}: expected {hdr.payload_bytes} payload bytes, found {actual}")
    if mmap:
        data = np.memmap(path, dtype="<c16", mode="r", offset=HFLD_HEADER_SIZE, shape=(hdr.height, hdr.width))
    else:
        with open(path, "rb") as f:
            f.seek(HFLD_HEADER_SIZE)
            data = np.frombuffer(f.read(), dtype="<c16").reshape(hdr.height, hdr.width).astype(np.complex128)
    return ComplexField(data, hdr.pitch)


# -- PGM / PBM images ---------------------------------------------------------


def _to_gray(data: np.ndarray) -> np.ndarray:
    lo, hi = float(data.min()), float(data.max())
    if hi == lo:
        return np.full(data.shape, 128, dtype=np.uint8)
    return np.rint((data - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def write_image(path, field: Union[RealField, BitField]) -> Path:
    """RealField -> 8-bit PGM (min-max scaled), BitField -> PBM (1 bits are set bits)."""
    path = Path(path)
    try:
        with atomic_open(path) as f:
            if isinstance(field, BitField):
                h, w = field.data.shape
                f.write(f"P4\n{w} {h}\n".encode())
                f.write(np.packbits(field.data, axis=1, bitorder="big").tobytes())
            elif isinstance(field, RealField):
                h, w = field.data.shape
                f.write(f"P5\n{w} {h}\n255\n".encode())
                f.write(_to_gray(field.data).tobytes())
            else:
                raise TypeError(f"cannot write {type(field).__name__} as an image")
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc
    return path


def _netpbm_header(raw: bytes, count: int, path):
    # whitespace-separated tokens after the magic; returns (tokens, payload offset)
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos)
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated image header")
        tokens.append(raw[start:pos])
    return tokens, pos + 1


def read_pbm(path) -> BitField:
    raw = Path(path).read_bytes()
    (magic, w, h), off = _netpbm_header(raw, 3, path)
    if magic != b"P4":
        raise FormatError(f"{path}: not a binary PBM")
    w, h = int(w), int(h)
    stride = (w + 7) // 8
    payload = np.frombuffer(raw, np.uint8, count=stride * h, offset=off).reshape(h, stride)
    return BitField(np.unpackbits(payload, axis=1, bitorder="big")[:, :w].astype(bool))


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (magic, w, h, maxval), off = _netpbm_header(raw, 4, path)
    if magic != b"P5" or int(maxval) != 255:
        raise FormatError(f"{path}: not an 8-bit binary PGM")
    w, h = int(w), int(h)
    return np.frombuffer(raw, np.uint8, count=w * h, offset=off).reshape(h, w).copy()


# -- key = value configs ------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    optical: OpticalConfig
    threads: int = 1
    seed: int = 0


def _bool(v: str) -> bool:
    t = v.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v: str) -> Optional[float]:
    return None if v.strip().lower() in ("none", "") else float(v)


def _w_cap(v: str):
    t = v.strip().lower()
    if t in ("none", ""):
        return None
    if t == "auto":
        return "auto"
    return float(v)


# config key -> (OpticalConfig field or run field, parser)
_KEYS = {
    "wavelength": ("wavelength", float),
    "pitch": ("pitch", float),
    "n_w": ("n_w", int),
    "n_h": ("n_h", int),
    "z_min": ("z_min", float),
    "z_max": ("z_max", float),
    "n_z": ("n_z", int),
    "gamma": ("gamma", float),
    "level": ("level", int),
    "filter": ("filter_name", str),
    "ref_x": ("ref_x", float),
    "ref_y": ("ref_y", float),
    "ref_z": ("ref_z", float),
    "dz_override": ("dz_override", _opt_float),
    "keep_all": ("keep_all", _bool),
    "w_cap": ("w_cap", _w_cap),
    "offset_mode": ("offset_mode", str),
    "reference_kind": ("reference_kind", str),
    "threads": ("threads", int),
    "seed": ("seed", int),
}


def _parse_lines(text: str, source: str) -> dict[str, object]:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {body!r}")
        key, val = (p.strip() for p in body.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}; valid keys: {', '.join(sorted(_KEYS))}")
        name, conv = _KEYS[key]
        if name in values:
            raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        try:
            values[name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return values


def parse_config(text: str, source: str = "<config>", overrides: Sequence[str] = ()) -> RunConfig:
    """Strict ``key = value`` parser; unknown or repeated keys are errors.

    ``overrides`` are further ``key=value`` items that replace file values.
    """
    values = _parse_lines(text, source)
    values.update(_parse_lines("\n".join(overrides), "--set"))
    threads = values.pop("threads", 1)
    seed = values.pop("seed", 0)
    if threads < 1:
        raise ConfigError(f"{source}: threads must be >= 1, got {threads}")
    ref = list(OpticalConfig().reference_pos)
    for i, k in enumerate(("ref_x", "ref_y", "ref_z")):
        if k in values:
            ref[i] = values.pop(k)
    optical = OpticalConfig(reference_pos=tuple(ref), **values)
    return RunConfig(optical, threads, seed)


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def format_config(run: Union[RunConfig, OpticalConfig]) -> str:
    if isinstance(run, OpticalConfig):
        run = RunConfig(run)
    cfg = run.optical
    out = []
    for key, (name, _) in _KEYS.items():
        if name in ("ref_x", "ref_y", "ref_z"):
            v = cfg.reference_pos[("ref_x", "ref_y", "ref_z").index(name)]
        elif name in ("threads", "seed"):
            v = getattr(run, name)
        else:
            v = getattr(cfg, name)
        if isinstance(v, float):
            v = repr(v)
        out.append(f"{key} = {v}")
    return "\n".join(out) + "\n"
