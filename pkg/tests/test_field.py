import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wasabi_cgh.field import (
    ComplexField,
    ConfigError,
    DepthRangeError,
    OpticalConfig,
    PointCloud,
    PointSource,
    TileIndex,
    quantize_depth,
    quantize_depths,
    to_pixel,
)


def test_defaults_are_the_printed_hologram():
    cfg = OpticalConfig()
    assert (cfg.n_w, cfg.n_h, cfg.n_z) == (65536, 8192, 29)
    assert cfg.pitch == 1e-6
    assert cfg.reference_pos == (0.0, 30e-3, -400e-3)
    assert cfg.n_tiles == 64 and cfg.tiles_per_side == 8


@pytest.mark.parametrize("kw", [
    dict(wavelength=0),
    dict(pitch=-1e-6),
    dict(n_z=0),
    dict(z_min=1e-3, z_max=-1e-3),
    dict(z_min=0.0, z_max=0.0, n_z=3),
    dict(n_w=1000),
    dict(n_h=3000),
    dict(n_w=1024, n_h=2048),
    dict(n_h=4, n_w=64, level=3),
    dict(gamma=0.0),
    dict(gamma=1.5),
    dict(dz_override=-1.0),
    dict(offset_mode="nearest"),
    dict(reference_kind="planar"),
    dict(w_cap="big"),
])
def test_invalid_configs_rejected(kw):
    with pytest.raises(ConfigError):
        OpticalConfig(**kw)


def test_single_slice_config():
    cfg = OpticalConfig(z_min=2e-3, z_max=2e-3, n_z=1)
    assert cfg.dz == 0.0
    assert quantize_depth(2e-3, cfg) == 0


def test_quantize_examples():
    cfg = OpticalConfig()
    assert math.isclose(cfg.dz, 30e-3 / 28, rel_tol=1e-15)
    assert quantize_depth(-15e-3, cfg) == 0
    assert quantize_depth(cfg.z_min + 1.6 * cfg.dz, cfg) == 2
    assert quantize_depth(15e-3, cfg) == 28


def test_quantize_tie_goes_low():
    cfg = OpticalConfig(z_min=0.0, z_max=4e-3, n_z=5)
    assert quantize_depth(0.5e-3, cfg) == 0
    assert quantize_depth(1.5e-3, cfg) == 1


def test_quantize_range_error_names_value():
    cfg = OpticalConfig()
    with pytest.raises(DepthRangeError, match="0.02"):
        quantize_depth(0.02, cfg)
    # half a slice beyond the ends is still accepted
    assert quantize_depth(-15e-3 - 0.49 * cfg.dz, cfg) == 0


def test_slice_centers_exact_and_symmetric():
    cfg = OpticalConfig()
    zc = cfg.slice_centers()
    assert zc[0] == -15e-3 and zc[-1] == 15e-3 and zc[14] == 0.0
    np.testing.assert_allclose(np.diff(zc), cfg.dz, rtol=1e-12)


def test_dz_override_lattice():
    cfg = OpticalConfig(dz_override=30e-3 / 29)
    zc = cfg.slice_centers()
    assert cfg.dz == 30e-3 / 29
    np.testing.assert_allclose(np.diff(zc), 30e-3 / 29, rtol=1e-12)
    assert abs(zc[14]) < 1e-18
    assert [quantize_depth(z, cfg) for z in zc] == list(range(29))


@given(st.lists(st.floats(-15e-3, 15e-3), min_size=2, max_size=30))
def test_quantize_monotone(zs):
    cfg = OpticalConfig()
    zs = sorted(zs)
    idx = quantize_depths(np.array(zs), cfg)
    assert np.all(np.diff(idx) >= 0)
    zc = cfg.slice_centers()
    assert np.all(np.abs(np.array(zs) - zc[idx]) <= cfg.dz / 2 * (1 + 1e-9))


def test_to_pixel_examples():
    cfg = OpticalConfig(n_w=1024, n_h=1024)
    assert to_pixel(PointSource(0.0, 0.0, 0.0), cfg) == (512, 512)
    assert to_pixel(PointSource(3e-6, -2e-6, 0.0), cfg) == (515, 510)
    assert to_pixel(PointSource(0.4e-6, 0.0, 0.0), cfg) == (512, 512)
    # ties round toward +inf
    assert to_pixel(PointSource(0.5e-6, -0.5e-6, 0.0), cfg) == (513, 512)


@given(st.integers(-1600, 1600), st.integers(-100, 100))
def test_to_pixel_translation(j, k):
    # sub-pixel positions on a dyadic grid keep x + k*pitch exact
    cfg = OpticalConfig(n_w=1024, n_h=1024, pitch=2.0 ** -20)
    x = j * 2.0 ** -22
    ix, iy = to_pixel(PointSource(x, x, 0.0), cfg)
    jx, jy = to_pixel(PointSource(x + k * cfg.pitch, x - k * cfg.pitch, 0.0), cfg)
    assert (jx - ix, jy - iy) == (k, -k)


def test_point_cloud_validation_and_order():
    pts = [PointSource(1e-6 * i, 0.0, 1e-3, 0.5) for i in range(5)]
    cloud = PointCloud.from_points(pts)
    assert len(cloud) == cloud.count == 5
    assert cloud.points == pts
    assert cloud[3] == pts[3]
    with pytest.raises(ValueError, match="negative"):
        PointCloud.from_points([PointSource(0, 0, 0, -1.0)])
    with pytest.raises(ValueError, match="non-finite"):
        PointCloud.from_points([PointSource(float("nan"), 0, 0, 1.0)])
    assert len(PointCloud.empty()) == 0


def test_point_cloud_does_not_alias_caller_arrays():
    x = np.zeros(3)
    cloud = PointCloud(x, x, x, np.ones(3))
    x[0] = 7.0
    assert cloud.x[0] == 0.0
    assert x.flags.writeable
    with pytest.raises(ValueError):
        cloud.x[0] = 1.0


def test_complex_field_and_tiles():
    f = ComplexField.zeros(8, 4)
    assert (f.width, f.height) == (8, 4) and f.data.dtype == np.complex128
    with pytest.raises(ValueError):
        ComplexField(np.zeros(5))
    cfg = OpticalConfig(n_w=256, n_h=64)
    assert TileIndex(3, 1).origin(cfg) == (192, 64)
    with pytest.raises(ValueError):
        TileIndex(4, 0).check(cfg)
    assert cfg.tiles()[:3] == [TileIndex(0, 0), TileIndex(1, 0), TileIndex(2, 0)]


def test_config_hash_tracks_lut_fields_only():
    a = OpticalConfig()
    assert len(a.config_hash()) == 32
    assert a.config_hash() == OpticalConfig().config_hash()
    assert a.config_hash() != OpticalConfig(gamma=0.1).config_hash()
    assert a.config_hash() != OpticalConfig(keep_all=True).config_hash()
    assert a.config_hash() == OpticalConfig(reference_pos=(0, 0, -1.0), n_w=8192).config_hash()
