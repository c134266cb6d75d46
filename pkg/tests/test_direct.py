import numpy as np
import pytest

from wasabi_cgh.bench import relative_l2
from wasabi_cgh.direct import PsfTable, compute_full_direct, direct_tile, naive_pixelwise
from wasabi_cgh.engine import compute_tile
from wasabi_cgh.field import OpticalConfig, PointCloud, TileIndex
from wasabi_cgh.lut import build_lut
from wasabi_cgh.sinks import MemorySink


@pytest.fixture(scope="module")
def setup():
    cfg = OpticalConfig(n_w=512, n_h=256, z_min=-1e-3, z_max=1e-3, n_z=5, w_cap="auto", gamma=0.2)
    return cfg, build_lut(cfg)


@pytest.fixture(scope="module")
def cloud():
    rng = np.random.default_rng(7)
    n = 40
    return PointCloud(rng.uniform(-256e-6, 256e-6, n), rng.uniform(-256e-6, 256e-6, n),
                      rng.uniform(-1e-3, 1e-3, n), rng.uniform(0.2, 1.0, n))


def test_exact_matches_naive(setup, cloud):
    cfg, _ = setup
    table = PsfTable(cfg)
    for tile in cfg.tiles():
        got = direct_tile(cloud, tile, cfg, table)[0].data
        want = naive_pixelwise(cloud, tile, cfg).data
        assert np.max(np.abs(got - want)) <= 1e-12 * max(1.0, np.abs(want).max())


def test_shrunk_matches_wasabi_interior(setup, cloud):
    cfg, lut = setup
    table = PsfTable(cfg, lut)
    for tile in cfg.tiles():
        a = direct_tile(cloud, tile, cfg, table, "shrunk")[0].data
        b = compute_tile(cloud, tile, cfg, lut)[0].data
        assert relative_l2(b, a, margin=96) < 1e-9


def test_chunking_and_cache_do_not_change_result(setup, cloud):
    cfg, lut = setup
    ref = direct_tile(cloud, TileIndex(0, 1), cfg, PsfTable(cfg, lut), "shrunk")[0].data
    tiny = PsfTable(cfg, lut, cache_bytes=0)
    got = direct_tile(cloud, TileIndex(0, 1), cfg, tiny, "shrunk", chunk_bytes=1)[0].data
    assert np.array_equal(ref, got)
    ex = direct_tile(cloud, TileIndex(0, 1), cfg, PsfTable(cfg))[0].data
    ex2 = direct_tile(cloud, TileIndex(0, 1), cfg, PsfTable(cfg), chunk_bytes=1)[0].data
    assert np.array_equal(ex, ex2)


@pytest.mark.parametrize("variant", ["exact", "shrunk"])
def test_strip_workers_bitwise(setup, cloud, variant):
    cfg, lut = setup
    table = PsfTable(cfg, lut)
    ref = direct_tile(cloud, TileIndex(1, 0), cfg, table, variant)[0].data
    for workers in (2, 3, 8):
        assert np.array_equal(direct_tile(cloud, TileIndex(1, 0), cfg, table, variant, workers)[0].data, ref)


def test_full_direct_and_ops(setup, cloud):
    cfg, _ = setup
    table = PsfTable(cfg)
    sink = MemorySink(cfg)
    stats = compute_full_direct(cloud, cfg, table, sink, workers=2)
    assert sink.complete and stats.ops > 0
    tile = sink.data[256:, :256]
    assert np.array_equal(tile, direct_tile(cloud, TileIndex(0, 1), cfg, table)[0].data)


def test_errors(setup, cloud):
    cfg, _ = setup
    with pytest.raises(ValueError, match="variant"):
        direct_tile(cloud, TileIndex(0, 0), cfg, PsfTable(cfg), "fast")
    with pytest.raises(ValueError, match="look-up table"):
        direct_tile(cloud, TileIndex(0, 0), cfg, PsfTable(cfg), "shrunk")
