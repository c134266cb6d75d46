"""Command-line front end: ``wasabi-cgh <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import bench as bench_mod
from .direct import PsfTable, compute_full_direct
from .encode import BitField, binarize, complex_hologram, interfere, reconstruct, reference_wave
from .engine import compute_full
from .field import ComplexField, ConfigError, OpticalConfig, TileIndex
from .fileio import atomic_open
from .formats import (
    FormatError,
    RunConfig,
    format_config,
    load_points,
    parse_config,
    read_field,
    read_header,
    read_pbm,
    write_image,
)
from .lut import build_lut, read_lut, write_lut
from .sinks import HfldFileSink, TileDirSink

log = logging.getLogger("wasabi_cgh")


def _run_config(args) -> RunConfig:
    text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
    run = parse_config(text, args.config or "<defaults>", args.set or ())
    if getattr(args, "threads", None):
        run = RunConfig(run.optical, args.threads, run.seed)
    return run


def _sink(args, cfg: OpticalConfig):
    if args.tile_dir:
        return TileDirSink(args.tile_dir, cfg)
    if not args.out:
        raise ConfigError("give --out FILE.hfld or --tile-dir DIR")
    return HfldFileSink(args.out, cfg)


def _finish(sink) -> None:
    if isinstance(sink, HfldFileSink):
        sink.close()


def cmd_build_lut(args) -> int:
    run = _run_config(args)
    t0 = time.perf_counter()
    lut = build_lut(run.optical)
    write_lut(args.out, lut)
    print(f"wrote {args.out}: {lut.total_entries} coefficients in {lut.n_classes} lists "
          f"({lut.nbytes / 2**20:.1f} MiB) in {time.perf_counter() - t0:.2f} s")
    return 0


def cmd_wasabi(args) -> int:
    run = _run_config(args)
    cfg = run.optical
    lut = read_lut(args.lut, cfg)
    points = load_points(args.points)
    sink = _sink(args, cfg)
    try:
        stats = compute_full(points, cfg, lut, sink, run.threads)
    except BaseException:
        if isinstance(sink, HfldFileSink):
            sink.abort()
        raise
    _finish(sink)
    print(f"{len(points)} points, {cfg.n_tiles} tile(s), {stats.ops} accumulations, "
          f"{stats.dropped} dropped, {stats.skipped_points} skipped, {stats.wall_s:.2f} s")
    return 0


def cmd_direct(args) -> int:
    run = _run_config(args)
    cfg = run.optical
    lut = read_lut(args.lut, cfg) if args.variant == "shrunk" else None
    points = load_points(args.points)
    sink = _sink(args, cfg)
    try:
        stats = compute_full_direct(points, cfg, PsfTable(cfg, lut), sink, args.variant, run.threads)
    except BaseException:
        if isinstance(sink, HfldFileSink):
            sink.abort()
        raise
    _finish(sink)
    print(f"{len(points)} points, {cfg.n_tiles} tile(s), {stats.ops} pixel updates, {stats.wall_s:.2f} s")
    return 0


def cmd_encode(args) -> int:
    """Binarize a full object-wave HFLD file into a PBM, one tile row at a time."""
    run = _run_config(args)
    cfg = run.optical
    u = read_field(args.field, mmap=True)
    if u.shape != (cfg.n_w, cfg.n_w):
        raise FormatError(f"{args.field}: field is {u.shape}, configuration expects {(cfg.n_w, cfg.n_w)}")
    nh, n = cfg.n_h, cfg.tiles_per_side
    with atomic_open(args.out) as f:
        f.write(f"P4\n{cfg.n_w} {cfg.n_w}\n".encode())
        for t in range(n):
            band = np.empty((nh, cfg.n_w), dtype=bool)
            for s in range(n):
                tile = TileIndex(s, t)
                part = ComplexField(np.asarray(u.data[t * nh:(t + 1) * nh, s * nh:(s + 1) * nh]), cfg.pitch)
                band[:, s * nh:(s + 1) * nh] = binarize(interfere(part, reference_wave(tile, cfg)), args.rule).data
            f.write(np.packbits(band, axis=1, bitorder="big").tobytes())
    print(f"wrote {args.out} ({cfg.n_w} x {cfg.n_w} bits, {args.rule} rule)")
    return 0


def _tile_arg(text: str) -> TileIndex:
    s, t = (int(v) for v in text.split(","))
    return TileIndex(s, t)


def cmd_reconstruct(args) -> int:
    run = _run_config(args)
    cfg = run.optical
    tile = TileIndex(*args.tile).check(cfg)
    nh = cfg.n_h
    x0, y0 = tile.origin(cfg)
    if args.field.endswith(".pbm"):
        bits = read_pbm(args.field).data
        holo = BitField(bits[y0:y0 + nh, x0:x0 + nh], cfg.pitch)
    else:
        u = read_field(args.field, mmap=True)
        part = ComplexField(np.array(u.data[y0:y0 + nh, x0:x0 + nh]), cfg.pitch)
        # HFLD inputs hold the object wave; reconstruct its complex hologram
        holo = complex_hologram(part, reference_wave(tile, cfg))
    img = reconstruct(holo, args.z, cfg, tile)
    write_image(args.out, img)
    print(f"wrote {args.out} (tile {tuple(tile)}, z = {args.z!r} m)")
    return 0


def cmd_bench(args) -> int:
    run = _run_config(args)
    cfg = run.optical
    if args.points:
        points = load_points(args.points)
    else:
        points = bench_mod.desk_scenario(cfg, args.n_points, run.seed)
    lut = read_lut(args.lut, cfg) if args.lut else None
    report = bench_mod.run_bench(cfg, points, run.threads, lut=lut, baseline=not args.no_baseline,
                                 encode=not args.no_encode)
    sys.stdout.write(report.to_text())
    sys.stdout.write("\n[report]\n")
    sys.stdout.write(report.to_kv())
    if args.report:
        with atomic_open(args.report, "w") as f:
            f.write(report.to_kv())
    return 0


def cmd_compare(args) -> int:
    ha, hb = read_header(args.a), read_header(args.b)
    if (ha.width, ha.height) != (hb.width, hb.height):
        raise FormatError(f"size mismatch: {ha.width}x{ha.height} vs {hb.width}x{hb.height}")
    a = read_field(args.a, mmap=True).data
    b = read_field(args.b, mmap=True).data
    size = args.tile_size or ha.width
    worst = 0.0
    for y in range(0, ha.height, size):
        for x in range(0, ha.width, size):
            err = bench_mod.relative_l2(np.asarray(a[y:y + size, x:x + size]), np.asarray(b[y:y + size, x:x + size]),
                                        args.margin)
            worst = max(worst, err)
            print(f"tile {x // size},{y // size} rel_l2={err!r}")
    print(f"max rel_l2={worst!r}")
    return 0


def cmd_show_config(args) -> int:
    sys.stdout.write(format_config(_run_config(args)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wasabi-cgh", description="Wavelet-domain point-cloud hologram synthesis.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, threads=True):
        sp.add_argument("--config", help="key = value configuration file (defaults: printed-hologram setup)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
        if threads:
            sp.add_argument("--threads", type=int, help="worker threads (overrides the config)")

    sp = sub.add_parser("build-lut", help="pre-compute the wavelet-domain PSF table")
    common(sp, threads=False)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_build_lut)

    for name, func, help_ in (("wasabi", cmd_wasabi, "compute the object wave in the wavelet domain"),
                              ("direct", cmd_direct, "compute the object wave by stamping space-domain PSFs")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--points", required=True)
        sp.add_argument("--lut", default="psf.wlut")
        sp.add_argument("--out", help="full hologram as one HFLD file")
        sp.add_argument("--tile-dir", help="write one HFLD file per tile instead")
        if name == "direct":
            sp.add_argument("--variant", choices=("exact", "shrunk"), default="exact")
        sp.set_defaults(func=func)

    sp = sub.add_parser("encode", help="binarize an object wave into a PBM hologram")
    common(sp, threads=False)
    sp.add_argument("--field", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--rule", choices=("sign", "median"), default="sign")
    sp.set_defaults(func=cmd_encode)

    sp = sub.add_parser("reconstruct", help="numerically reconstruct one tile at depth z")
    common(sp, threads=False)
    sp.add_argument("--field", required=True, help="object-wave HFLD file or binary PBM hologram")
    sp.add_argument("--z", type=float, required=True, help="reconstruction depth in meters")
    sp.add_argument("--tile", type=_tile_arg, default=TileIndex(0, 0), help="s,t")
    sp.add_argument("--out", required=True, help="output PGM")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("bench", help="time WASABI against the N-LUT baseline")
    common(sp)
    sp.add_argument("--points", help="point file (default: random desk scenario)")
    sp.add_argument("--n-points", type=int, default=10000)
    sp.add_argument("--lut", help="reuse a pre-built LUT instead of timing a build")
    sp.add_argument("--no-baseline", action="store_true")
    sp.add_argument("--no-encode", action="store_true")
    sp.add_argument("--report", help="also write the key=value report to this file")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("compare", help="per-tile relative L2 error between two HFLD files")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.add_argument("--margin", type=int, default=0, help="edge pixels ignored per tile")
    sp.add_argument("--tile-size", type=int, help="tile side in pixels (default: whole field)")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("show-config", help="print the effective configuration")
    common(sp, threads=False)
    sp.set_defaults(func=cmd_show_config)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError, ValueError, KeyError, OSError) as exc:
        print(f"wasabi-cgh {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
