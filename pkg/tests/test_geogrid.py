import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carbonlens.geogrid import (
    AffineTransform,
    GeoGrid,
    GridError,
    Window,
    bilinear_resample,
    blank_mask,
    coregister,
    coregister_mass,
    lonlat_to_utm,
    mass_conserving_resample,
    pixel_to_world,
    read_window,
    world_to_pixel,
)
from conftest import UTM18, utm_grid


def test_identity_transform_origin():
    g = GeoGrid(np.zeros((2, 2)))
    assert pixel_to_world(g, 0, 0) == (0, 0)


def test_pixel_to_world_arithmetic():
    g = GeoGrid(np.zeros((2, 2)), AffineTransform(10, 0, 600000, 0, -10, 5090220), UTM18)
    assert pixel_to_world(g, 1, 1) == (600010, 5090210)


def test_world_to_pixel_round_trip(rng):
    t = AffineTransform(10.0, 0.3, 600000.0, -0.2, -10.0, 5090220.0)
    g = GeoGrid(np.zeros((4, 4)), t, UTM18)
    pts = rng.uniform(-500, 500, size=(100, 2))
    for col, row in pts:
        c2, r2 = world_to_pixel(g, *pixel_to_world(g, col, row))
        assert c2 == pytest.approx(col, abs=1e-9)
        assert r2 == pytest.approx(row, abs=1e-9)


def test_singular_transform_rejected():
    with pytest.raises(GridError):
        AffineTransform(1, 2, 0, 2, 4, 0)


def test_geogrid_is_immutable():
    g = utm_grid(np.ones((3, 3)))
    with pytest.raises(ValueError):
        g.values[0, 0, 0] = 5


def test_read_window_full_copy(rng):
    g = utm_grid(rng.random((2, 5, 7)))
    w = read_window(g, Window(0, 0, 7, 5))
    assert w == g


def test_read_window_outside_is_nodata(rng):
    g = utm_grid(rng.random((5, 5)), nodata=-9999)
    w = read_window(g, Window(20, 20, 3, 3))
    assert np.all(w.values == -9999)


def test_read_window_straddles_right_edge(rng):
    vals = rng.random((2, 6, 8)).astype(np.float32)
    g = utm_grid(vals)
    win = Window(5, 1, 6, 4)
    out = read_window(g, win)
    assert out.shape == (2, 4, 6)
    for c in range(2):
        for r in range(4):
            for k in range(6):
                sr, sc = win.row_off + r, win.col_off + k
                if 0 <= sr < 6 and 0 <= sc < 8:
                    assert out.values[c, r, k] == vals[c, sr, sc]
                else:
                    assert np.isnan(out.values[c, r, k])
    assert out.transform.apply(0, 0) == g.transform.apply(5, 1)


@given(
    st.integers(-4, 10), st.integers(-4, 10), st.integers(1, 12), st.integers(1, 12),
    st.integers(-3, 8), st.integers(-3, 8), st.integers(1, 6), st.integers(1, 6),
)
def test_nested_windows_compose(c0, r0, w0, h0, c1, r1, w1, h1):
    vals = np.arange(2 * 9 * 11, dtype=np.float32).reshape(2, 9, 11)
    g = utm_grid(vals)
    nested = read_window(read_window(g, Window(c0, r0, w0, h0)), Window(c1, r1, w1, h1))
    direct = read_window(g, Window(c0 + c1, r0 + r1, w1, h1))
    # pixels outside the outer window are nodata in the nested read
    inside = np.zeros((h1, w1), bool)
    for r in range(h1):
        for c in range(w1):
            inside[r, c] = 0 <= c1 + c < w0 and 0 <= r1 + r < h0
    assert nested.transform == direct.transform
    np.testing.assert_array_equal(nested.values[:, inside], direct.values[:, inside])
    assert np.all(np.isnan(nested.values[:, ~inside]))


def test_bilinear_constant_field():
    g = utm_grid(np.ones((5, 3)))
    for w, h in [(1, 1), (7, 2), (10, 13)]:
        assert np.all(bilinear_resample(g, w, h).values == 1.0)


def test_bilinear_row_upsample():
    g = utm_grid([[0.0, 1.0]])
    out = bilinear_resample(g, 4, 1)
    np.testing.assert_allclose(out.values[0, 0], [0, 0.25, 0.75, 1.0], atol=1e-7)


def test_bilinear_down_up_constant():
    g = utm_grid(np.full((16, 16), 3.5))
    out = bilinear_resample(bilinear_resample(g, 4, 4), 16, 16)
    assert np.all(out.values == 3.5)


def test_bilinear_preserves_world_extent():
    g = utm_grid(np.zeros((10, 20)))
    out = bilinear_resample(g, 7, 3)
    assert out.transform.apply(0, 0) == g.transform.apply(0, 0)
    np.testing.assert_allclose(out.transform.apply(7, 3), g.transform.apply(20, 10))


def test_bilinear_zero_size_rejected():
    with pytest.raises(GridError):
        bilinear_resample(utm_grid(np.ones((2, 2))), 0, 3)


def test_bilinear_skips_nodata():
    g = utm_grid([[1.0, np.nan], [1.0, 1.0]])
    out = bilinear_resample(g, 4, 4)
    assert np.all(out.values == 1.0)
    g = utm_grid(np.full((2, 2), np.nan))
    assert np.all(np.isnan(bilinear_resample(g, 3, 3).values))


@given(st.integers(1, 9), st.integers(1, 9), st.integers(1, 20), st.integers(1, 20),
       st.integers(0, 2**31))
def test_bilinear_range_property(h, w, oh, ow, seed):
    vals = np.random.default_rng(seed).normal(size=(2, h, w))
    out = bilinear_resample(utm_grid(vals), ow, oh).values
    for c in range(2):
        lo, hi = vals[c].min(), vals[c].max()
        assert out[c].min() >= np.float32(lo) - 1e-5
        assert out[c].max() <= np.float32(hi) + 1e-5


def test_mass_conserving_uniform_split():
    out = mass_conserving_resample(utm_grid(np.ones((2, 2))), 4, 4)
    np.testing.assert_allclose(out.values, 0.25)
    assert out.values.sum() == pytest.approx(4.0)


def test_mass_conserving_zero_grid():
    out = mass_conserving_resample(utm_grid(np.zeros((3, 3))), 5, 5)
    assert np.all(out.values == 0)


def test_mass_conserving_random_upsample(rng):
    vals = rng.random((8, 8)) * 100
    out = mass_conserving_resample(utm_grid(vals), 32, 32)
    total_in = sum(float(v) for v in np.float32(vals).ravel())
    total_out = sum(float(v) for v in out.values.ravel())
    assert abs(total_out - total_in) / total_in <= 1e-6


def test_mass_conserving_rejects_negative():
    with pytest.raises(GridError):
        mass_conserving_resample(utm_grid([[1.0, -1.0]]), 4, 2)


@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 40), st.integers(1, 40),
       st.integers(0, 2**31))
def test_mass_conservation_property(h, w, oh, ow, seed):
    vals = np.random.default_rng(seed).exponential(size=(h, w))
    out = mass_conserving_resample(utm_grid(vals), ow, oh)
    total = np.float32(vals).sum(dtype=np.float64)
    assert abs(out.values.sum(dtype=np.float64) - total) <= 1e-6 * total


def test_coregister_identity(rng):
    g = utm_grid(rng.random((2, 6, 6)))
    for mode in ("nearest", "bilinear"):
        assert coregister(g, g, mode) == g


def test_coregister_aligned_copy_without_shortcut(rng):
    g = utm_grid(rng.random((6, 6)))
    shifted = utm_grid(np.zeros((6, 6)), nodata=-1)
    out = coregister(g, shifted, "bilinear")
    np.testing.assert_array_equal(out.values, g.values)


def test_coregister_single_coarse_cell_broadcasts():
    lon0, lat0 = -75.0, 41.0
    coarse = GeoGrid(np.array([[410.3]]), AffineTransform.from_origin(lon0, lat0, 1.0, 1.0))
    e, n = lonlat_to_utm(-74.5, 40.5, 18)
    ref = utm_grid(np.zeros((32, 32)), x0=e, y0=n)
    for mode in ("nearest", "bilinear"):
        out = coregister(coarse, ref, mode)
        assert np.all(out.values == np.float32(410.3))


def test_coregister_half_shifted_source(rng):
    ref = utm_grid(np.zeros((6, 8)))
    src = utm_grid(rng.random((6, 8)), x0=600000.0 + 40.0)
    out = coregister(src, ref, "nearest")
    sx0 = src.transform.c
    for r in range(6):
        for c in range(8):
            x, _ = ref.transform.apply(c + 0.5, r + 0.5)
            covered = sx0 <= x < sx0 + 80.0
            assert np.isnan(out.values[0, r, c]) != covered
    np.testing.assert_array_equal(out.values[0, :, 4:], src.values[0, :, :4])


def test_coregister_unsupported_crs():
    g = GeoGrid(np.ones((2, 2)), crs="EPSG:3857")
    with pytest.raises(GridError):
        coregister(g, utm_grid(np.ones((2, 2))))


def test_coregister_mass_aligned_total(rng):
    src = utm_grid(rng.random((4, 4)) * 50, res=80.0)
    ref = utm_grid(np.zeros((24, 24)), x0=600000.0 + 40.0, y0=5090220.0 - 80.0, res=10.0)
    out = coregister_mass(src, ref)
    # footprint: cols 40..280 m, rows 80..320 m below the origin
    expected = 0.0
    for r in range(4):
        for c in range(4):
            ox = max(0.0, min(c * 80 + 80, 280) - max(c * 80, 40)) / 80
            oy = max(0.0, min(r * 80 + 80, 320) - max(r * 80, 80)) / 80
            expected += float(src.values[0, r, c]) * ox * oy
    assert out.values.sum(dtype=np.float64) == pytest.approx(expected, rel=1e-6)


def test_blank_mask_cases():
    assert np.all(blank_mask(utm_grid(np.zeros((3, 4, 4)))).values == 0)
    assert np.all(blank_mask(utm_grid(np.ones((3, 4, 4)))).values == 1)
    vals = np.ones((3, 4, 6))
    vals[:, :, :3] = 0
    vals[1, 2, 1] = np.nan
    m = blank_mask(utm_grid(vals)).values[0]
    for r in range(4):
        for c in range(6):
            assert m[r, c] == (0 if c < 3 else 1)


def test_blank_mask_partial_channels():
    vals = np.zeros((3, 2, 2))
    vals[2, 0, 0] = 5
    m = blank_mask(utm_grid(vals)).values[0]
    assert m[0, 0] == 1 and m.sum() == 1
