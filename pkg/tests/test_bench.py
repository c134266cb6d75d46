import numpy as np

from wasabi_cgh.bench import desk_config, desk_scenario, relative_l2, run_bench
from wasabi_cgh.engine import plan_tile
from wasabi_cgh.field import OpticalConfig
from wasabi_cgh.lut import build_lut
from wasabi_cgh.sinks import MemorySink


def test_desk_defaults():
    cfg = desk_config()
    assert (cfg.n_w, cfg.n_h, cfg.n_z, cfg.gamma) == (4096, 4096, 29, 0.05)
    assert (cfg.z_min, cfg.z_max) == (-3e-3, 3e-3)
    pts = desk_scenario(cfg, 100, seed=4)
    assert len(pts) == 100 and np.all(np.abs(pts.x) <= 2.048e-3)
    assert np.array_equal(pts.z, desk_scenario(cfg, 100, seed=4).z)


def test_relative_l2():
    b = np.ones((10, 10))
    a = b.copy()
    a[0, 0] = 2
    assert relative_l2(a, b, margin=1) == 0.0
    assert relative_l2(a, b) == 0.1
    assert relative_l2(np.zeros(3), np.zeros(3)) == 0.0


def test_run_bench_small():
    cfg = OpticalConfig(n_w=512, n_h=256, z_min=-1e-3, z_max=1e-3, n_z=5, w_cap="auto", gamma=0.2)
    lut = build_lut(cfg)
    pts = desk_scenario(cfg, 50, seed=1)
    sink = MemorySink(cfg)
    rep = run_bench(cfg, pts, workers=2, lut=lut, sink=sink)
    assert sink.complete
    want = sum(lut.specs[s].n_r for tile in cfg.tiles() for s in plan_tile(pts, tile, cfg, lut).slice)
    assert rep.ops == want
    assert rep.baseline_s > 0 and rep.wasabi_s > 0 and rep.speedup > 0
    assert rep.encode_s > 0 and rep.peak_mem_bytes > 0
    assert "speedup=" in rep.to_kv()
    quick = run_bench(cfg, pts, lut=lut, baseline=False, encode=False)
    assert quick.baseline_s is None and quick.speedup is None and quick.encode_s == 0.0
    assert quick.ops == rep.ops
