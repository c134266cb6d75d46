import numpy as np
import pytest

from wasabi_cgh.field import ComplexField, OpticalConfig, TileIndex
from wasabi_cgh.formats import read_field
from wasabi_cgh.sinks import DuplicateTileError, HfldFileSink, MemorySink, TileDirSink

CFG = OpticalConfig(n_w=64, n_h=32, z_min=-1e-4, z_max=1e-4, n_z=3)


def _tile(tile):
    return ComplexField(np.full((32, 32), complex(tile.s, tile.t)))


def test_memory_sink_any_order():
    sink = MemorySink(CFG)
    for tile in reversed(CFG.tiles()):
        sink(tile, _tile(tile))
    assert sink.complete
    assert sink.data[40, 5] == complex(0, 1) and sink.data[3, 50] == complex(1, 0)
    with pytest.raises(DuplicateTileError):
        sink(TileIndex(0, 0), _tile(TileIndex(0, 0)))
    with pytest.raises(ValueError):
        MemorySink(CFG)(TileIndex(0, 0), ComplexField(np.zeros((4, 4))))


def test_tile_dir_sink(tmp_path):
    sink = TileDirSink(tmp_path / "tiles", CFG)
    sink(TileIndex(1, 0), _tile(TileIndex(1, 0)))
    f = read_field(tmp_path / "tiles" / "tile_1_0.hfld")
    assert np.all(f.data == 1)


def test_hfld_file_sink(tmp_path):
    out = tmp_path / "h.hfld"
    with HfldFileSink(out, CFG) as sink:
        for tile in CFG.tiles():
            sink(tile, _tile(tile))
    f = read_field(out)
    assert f.data[40, 50] == complex(1, 1)
    assert list(tmp_path.iterdir()) == [out]


def test_hfld_sink_incomplete_leaves_nothing(tmp_path):
    out = tmp_path / "h.hfld"
    sink = HfldFileSink(out, CFG)
    sink(TileIndex(0, 0), _tile(TileIndex(0, 0)))
    with pytest.raises(RuntimeError, match="1 of 4"):
        sink.close()
    assert list(tmp_path.iterdir()) == []
    with pytest.raises(KeyError):
        with HfldFileSink(out, CFG):
            raise KeyError("boom")
    assert list(tmp_path.iterdir()) == []
