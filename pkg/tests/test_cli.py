import subprocess
import sys

import numpy as np
import pytest

from wasabi_cgh.cli import main
from wasabi_cgh.field import PointCloud
from wasabi_cgh.formats import read_field, read_pbm, read_pgm, save_points

CONFIG = """\
n_w = 512
n_h = 256
z_min = -0.001
z_max = 0.001
n_z = 5
gamma = 0.2
w_cap = auto
"""


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "run.cfg").write_text(CONFIG)
    rng = np.random.default_rng(2)
    n = 30
    save_points(d / "pts.txt", PointCloud(rng.uniform(-2e-4, 2e-4, n), rng.uniform(-2e-4, 2e-4, n),
                                          rng.uniform(-1e-3, 1e-3, n), np.ones(n)))
    assert main(["build-lut", "--config", str(d / "run.cfg"), "--out", str(d / "psf.wlut")]) == 0
    return d


def _args(work, *rest):
    return ["--config", str(work / "run.cfg"), *rest]


def test_wasabi_direct_compare(work, capsys):
    assert main(["wasabi", *_args(work, "--points", str(work / "pts.txt"), "--lut", str(work / "psf.wlut"),
                                  "--out", str(work / "w.hfld"), "--threads", "2")]) == 0
    assert main(["direct", *_args(work, "--points", str(work / "pts.txt"), "--lut", str(work / "psf.wlut"),
                                  "--out", str(work / "d.hfld"), "--variant", "shrunk")]) == 0
    assert read_field(work / "w.hfld").shape == (512, 512)
    capsys.readouterr()
    assert main(["compare", str(work / "w.hfld"), str(work / "w.hfld")]) == 0
    assert "max rel_l2=0.0" in capsys.readouterr().out
    assert main(["compare", str(work / "w.hfld"), str(work / "d.hfld"), "--tile-size", "256",
                 "--margin", "96"]) == 0
    out = capsys.readouterr().out
    worst = float(out.strip().splitlines()[-1].split("=")[1])
    assert worst < 1e-9 and out.count("tile ") == 4


def test_tile_dir_and_encode_and_reconstruct(work):
    assert main(["wasabi", *_args(work, "--points", str(work / "pts.txt"), "--lut", str(work / "psf.wlut"),
                                  "--tile-dir", str(work / "tiles"))]) == 0
    assert len(list((work / "tiles").glob("tile_*.hfld"))) == 4
    assert main(["wasabi", *_args(work, "--points", str(work / "pts.txt"), "--lut", str(work / "psf.wlut"),
                                  "--out", str(work / "e.hfld"))]) == 0
    assert main(["encode", *_args(work, "--field", str(work / "e.hfld"), "--out", str(work / "h.pbm"),
                                  "--rule", "median")]) == 0
    bits = read_pbm(work / "h.pbm")
    assert bits.data.shape == (512, 512)
    for src in ("h.pbm", "e.hfld"):
        assert main(["reconstruct", *_args(work, "--field", str(work / src), "--z", "0.0005",
                                           "--tile", "1,1", "--out", str(work / "r.pgm"))]) == 0
        assert read_pgm(work / "r.pgm").shape == (256, 256)


def test_missing_lut_message(work, capsys):
    code = main(["wasabi", *_args(work, "--points", str(work / "pts.txt"), "--lut", str(work / "nope.wlut"),
                                  "--out", str(work / "x.hfld"))])
    assert code == 2
    assert "build-lut" in capsys.readouterr().err
    assert not (work / "x.hfld").exists()


def test_errors_leave_no_partial_output(work, capsys):
    bad = work / "bad.txt"
    bad.write_text("0 0 0.5 1\n")  # far outside the depth range
    code = main(["wasabi", *_args(work, "--points", str(bad), "--lut", str(work / "psf.wlut"),
                                  "--out", str(work / "y.hfld"))])
    assert code == 2 and "outside" in capsys.readouterr().err
    assert not list(work.glob("y.hfld*")) and not list(work.glob(".y.hfld*"))
    assert main(["show-config", "--set", "colour=red"]) == 2
    assert main(["wasabi", "--set", "gamma=0.3", *_args(work, "--points", str(work / "pts.txt"), "--lut",
                                                        str(work / "psf.wlut"), "--out", str(work / "z.hfld"))]) == 2
    assert "different configuration" in capsys.readouterr().err


def test_show_config_and_entry_point(work):
    proc = subprocess.run([sys.executable, "-m", "wasabi_cgh.cli", "show-config", "--set", "n_z=7"],
                          capture_output=True, text=True, check=True)
    assert "n_z = 7" in proc.stdout and "n_w = 65536" in proc.stdout


def test_bench_command(work, tmp_path, capsys):
    report = tmp_path / "r.txt"
    assert main(["bench", *_args(work, "--n-points", "20", "--lut", str(work / "psf.wlut"),
                                 "--report", str(report))]) == 0
    out = capsys.readouterr().out
    assert "speedup" in out and "10533 s -> 354 s" in out
    kv = dict(line.split("=", 1) for line in report.read_text().splitlines())
    assert kv["n_points"] == "20" and float(kv["baseline_s"]) > 0
