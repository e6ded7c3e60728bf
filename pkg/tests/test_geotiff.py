import numpy as np
import pytest

from carbonlens.geogrid import AffineTransform, GeoGrid, GridError, read_geotiff, write_geotiff
from conftest import utm_grid


def test_round_trip_float(tmp_path, rng):
    g = utm_grid(rng.random((3, 9, 7)) * 100)
    back = read_geotiff(write_geotiff(tmp_path / "a.tif", g))
    assert back == g
    assert back.transform == g.transform and back.crs == g.crs


def test_round_trip_lonlat_single_band(tmp_path):
    g = GeoGrid(np.array([[410.3, 411.0]]), AffineTransform.from_origin(-75.0, 41.0, 1.0, 1.0))
    back = read_geotiff(write_geotiff(tmp_path / "b.tif", g))
    assert back == g and back.crs == "EPSG:4326"


def test_round_trip_rotated(tmp_path, rng):
    t = AffineTransform(10.0, 0.5, 600000.0, 0.25, -10.0, 5090220.0)
    g = GeoGrid(rng.random((4, 4)), t, "EPSG:32618", nodata=-1.0)
    back = read_geotiff(write_geotiff(tmp_path / "c.tif", g))
    assert back.transform == t and back.nodata == -1.0


def test_integer_dtype_rounds_and_clips(tmp_path):
    g = utm_grid([[0.4, 1.6, 70000.0, -5.0]], nodata=0)
    back = read_geotiff(write_geotiff(tmp_path / "d.tif", g, dtype=np.uint16))
    np.testing.assert_array_equal(back.values[0, 0], [0, 2, 65535, 0])
    assert back.nodata == 0


def test_tiled_write(tmp_path, rng):
    g = utm_grid(rng.random((2, 40, 48)))
    assert read_geotiff(write_geotiff(tmp_path / "e.tif", g, tile=16)) == g


def test_missing_and_corrupt(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_geotiff(tmp_path / "nope.tif")
    bad = tmp_path / "bad.tif"
    bad.write_bytes(b"not a tiff at all")
    with pytest.raises(GridError):
        read_geotiff(bad)
