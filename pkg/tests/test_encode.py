import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasabi_cgh.encode import (
    BitField,
    RealField,
    angular_spectrum,
    binarize,
    complex_hologram,
    interfere,
    ncc,
    reconstruct,
    reference_wave,
)
from wasabi_cgh.field import ComplexField, OpticalConfig, TileIndex
from wasabi_cgh.lut import psf_patch
from wasabi_cgh.wavelet import DimensionError

CFG = OpticalConfig(n_w=512, n_h=256, z_min=-1e-3, z_max=1e-3, n_z=5)


def test_reference_unit_modulus_and_pointwise():
    ref = reference_wave(TileIndex(1, 0), CFG)
    assert np.max(np.abs(np.abs(ref.data) - 1)) < 1e-14
    xr, yr, zr = CFG.reference_pos
    k = 2 * math.pi / CFG.wavelength
    for row, col in [(0, 0), (13, 200), (255, 255)]:
        x = (col + 256 - 256) * 1e-6
        y = (row - 256) * 1e-6
        want = complex(math.cos(k * math.dist((x, y, 0), (xr, yr, zr))),
                       math.sin(k * math.dist((x, y, 0), (xr, yr, zr))))
        assert abs(ref.data[row, col] - want) < 1e-9


def test_reference_tiles_agree_with_single_tile_frame():
    whole = reference_wave(TileIndex(0, 0), OpticalConfig(n_w=512, n_h=512))
    for tile in CFG.tiles():
        x0, y0 = tile.origin(CFG)
        part = reference_wave(tile, CFG).data
        assert np.array_equal(part, whole.data[y0:y0 + 256, x0:x0 + 256])


def test_reference_phase_stationary_at_source_foot():
    cfg = OpticalConfig(n_w=256, n_h=256, reference_pos=(0.0, 0.0, -0.4))
    phase = np.unwrap(np.angle(reference_wave(TileIndex(0, 0), cfg).data[128]))
    grad = np.abs(np.diff(phase))
    assert int(np.argmin(grad)) in (127, 128)
    conv = reference_wave(TileIndex(0, 0), OpticalConfig(n_w=256, n_h=256, reference_kind="converging"))
    div = reference_wave(TileIndex(0, 0), OpticalConfig(n_w=256, n_h=256))
    assert np.allclose(conv.data, np.conj(div.data), atol=1e-15)
    with pytest.raises(ValueError):
        reference_wave(TileIndex(0, 0), OpticalConfig(n_w=256, n_h=256, reference_pos=(0, 0, 0)))


def test_interfere_examples(rng):
    ref = reference_wave(TileIndex(0, 0), CFG)
    assert np.allclose(interfere(ref, ref).data, 1.0, atol=1e-14)
    assert np.allclose(interfere(ComplexField(1j * ref.data), ref).data, 0.0, atol=1e-14)
    u = ComplexField(rng.normal(size=(256, 256)) + 1j * rng.normal(size=(256, 256)))
    got = interfere(u, ref).data
    r, c = 17, 99
    z = u.data[r, c] * ref.data[r, c].conjugate()
    assert abs(got[r, c] - z.real) < 1e-14
    assert np.array_equal(complex_hologram(u, ref).data.real, got)
    with pytest.raises(DimensionError):
        interfere(ComplexField(np.zeros((4, 4))), ref)


def test_binarize_rules(rng):
    assert binarize(RealField(np.ones((4, 4)))).count() == 16
    data = rng.normal(size=(33, 17))
    b = binarize(RealField(data), "median")
    assert b.count() == math.ceil(data.size / 2)
    sign = binarize(RealField(data), "sign")
    assert np.array_equal(sign.data, data >= 0)
    again = binarize(RealField(sign.data.astype(float) - 0.5))
    assert np.array_equal(again.data, sign.data)
    with pytest.raises(ValueError):
        binarize(RealField(data), "otsu")
    with pytest.raises(ValueError):
        RealField(np.array([[np.nan]]))


def test_angular_spectrum_identity_and_inverse(rng):
    f = ComplexField(rng.normal(size=(128, 128)) + 1j * rng.normal(size=(128, 128)))
    assert np.array_equal(angular_spectrum(f, 0.0, CFG).data, f.data)
    # band-limit first so that forward and back are exact inverses
    g = angular_spectrum(angular_spectrum(f, 1e-3, CFG), -1e-3, CFG)
    gg = angular_spectrum(angular_spectrum(g, 2e-3, CFG), -2e-3, CFG)
    assert np.max(np.abs(gg.data - g.data)) < 1e-10
    e0 = np.vdot(g.data, g.data).real
    e1 = np.vdot(angular_spectrum(g, 5e-3, CFG).data, angular_spectrum(g, 5e-3, CFG).data).real
    assert abs(e1 - e0) < 1e-10 * e0
    with pytest.raises(DimensionError):
        angular_spectrum(ComplexField(np.zeros((96, 96))), 1e-3, CFG)


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1), st.integers(-40, 40), st.integers(-40, 40))
def test_angular_spectrum_linear_and_shift_equivariant(seed, dy, dx):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    b = rng.normal(size=(64, 64))
    d = 0.3e-3
    pa = angular_spectrum(ComplexField(a), d, CFG).data
    pb = angular_spectrum(ComplexField(b), d, CFG).data
    pab = angular_spectrum(ComplexField(2 * a - 3j * b), d, CFG).data
    assert np.max(np.abs(pab - (2 * pa - 3j * pb))) < 1e-11
    rolled = angular_spectrum(ComplexField(np.roll(a, (dy, dx), (0, 1))), d, CFG).data
    assert np.max(np.abs(rolled - np.roll(pa, (dy, dx), (0, 1)))) < 1e-11


def test_point_psf_focuses():
    cfg = OpticalConfig(n_w=256, n_h=256)
    z, r = 0.2e-3, 60
    u = np.zeros((256, 256), complex)
    u[120 - r: 120 + r + 1, 140 - r: 140 + r + 1] = psf_patch(z, r, cfg)
    ref = reference_wave(TileIndex(0, 0), cfg)
    img = reconstruct(complex_hologram(ComplexField(u), ref), z, cfg, normalize=False).data
    assert np.unravel_index(np.argmax(img), img.shape) == (120, 140)
    side = img.copy()
    side[117:124, 137:144] = 0
    assert img.max() / side.max() > 10
    norm = reconstruct(complex_hologram(ComplexField(u), ref), z, cfg).data
    assert norm.max() == 1.0
    with pytest.raises(DimensionError):
        reconstruct(BitField(np.zeros((8, 8), bool)), z, cfg)


def test_ncc():
    a = np.arange(12.0).reshape(3, 4)
    assert math.isclose(ncc(a, 3 * a + 1), 1.0)
    assert math.isclose(ncc(a, -a), -1.0)
    assert ncc(a, np.ones_like(a)) == 0.0
    with pytest.raises(DimensionError):
        ncc(a, np.zeros(5))
