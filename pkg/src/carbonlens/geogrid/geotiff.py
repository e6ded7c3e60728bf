"""Minimal GeoTIFF reader/writer on top of tifffile.

Only the tags the pipeline needs are handled: ModelPixelScale + ModelTiepoint
(or ModelTransformation for rotated grids), the GeoKey CRS code and GDAL_NODATA.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import tifffile

from .grid import LONLAT, AffineTransform, GeoGrid, GridError
from .utm import parse_crs

TAG_PIXEL_SCALE = 33550
TAG_TIEPOINT = 33922
TAG_TRANSFORMATION = 34264
TAG_GEOKEYS = 34735
TAG_NODATA = 42113

KEY_MODEL_TYPE = 1024
KEY_RASTER_TYPE = 1025
KEY_GEOGRAPHIC_TYPE = 2048
KEY_PROJECTED_TYPE = 3072


def _geokeys(crs: str) -> tuple[int, ...]:
    parse_crs(crs)
    code = int(crs.split(":")[1])
    if crs == LONLAT:
        keys = [(KEY_MODEL_TYPE, 2), (KEY_RASTER_TYPE, 1), (KEY_GEOGRAPHIC_TYPE, code)]
    else:
        keys = [(KEY_MODEL_TYPE, 1), (KEY_RASTER_TYPE, 1), (KEY_PROJECTED_TYPE, code)]
    out = [1, 1, 0, len(keys)]
    for key, value in keys:
        out += [key, 0, 1, value]
    return tuple(out)


def _crs_from_geokeys(keys) -> str:
    keys = list(keys)
    entries = {keys[i]: keys[i + 3] for i in range(4, 4 + 4 * keys[3], 4) if keys[i + 1] == 0}
    if KEY_PROJECTED_TYPE in entries:
        crs = f"EPSG:{entries[KEY_PROJECTED_TYPE]}"
    elif KEY_GEOGRAPHIC_TYPE in entries:
        crs = f"EPSG:{entries[KEY_GEOGRAPHIC_TYPE]}"
    else:
        raise GridError("GeoTIFF has no EPSG code in its GeoKey directory")
    parse_crs(crs)
    return crs


def write_geotiff(path, grid: GeoGrid, dtype=np.float32, tile: int | None = None) -> Path:
    """Write ``grid``; integer ``dtype`` rounds and clips values to its range."""
    path = Path(path)
    t = grid.transform
    if t.is_axis_aligned:
        georef = [
            (TAG_PIXEL_SCALE, "d", 3, (t.a, -t.e, 0.0), True),
            (TAG_TIEPOINT, "d", 6, (0.0, 0.0, 0.0, t.c, t.f, 0.0), True),
        ]
    else:
        matrix = (t.a, t.b, 0.0, t.c, t.d, t.e, 0.0, t.f, 0, 0, 0, 0, 0, 0, 0, 1.0)
        georef = [(TAG_TRANSFORMATION, "d", 16, matrix, True)]
    keys = _geokeys(grid.crs)
    extratags = georef + [
        (TAG_GEOKEYS, "H", len(keys), keys, True),
        (TAG_NODATA, "s", 0, _format_nodata(grid.nodata), True),
    ]

    data = grid.values
    dtype = np.dtype(dtype)
    if dtype.kind in "iu":
        info = np.iinfo(dtype)
        data = np.clip(np.rint(np.nan_to_num(data, nan=0.0)), info.min, info.max)
    data = data.astype(dtype)
    kwargs = {}
    if tile:
        kwargs["tile"] = (tile, tile)
    if grid.channels == 1:
        data = data[0]
    else:
        kwargs["planarconfig"] = "separate"
    tifffile.imwrite(
        path, data, photometric="minisblack", extratags=extratags, metadata=None, **kwargs
    )
    return path


def _format_nodata(nodata: float) -> str:
    if math.isnan(nodata):
        return "nan"
    # integral sentinels as plain integers: readers parse them for integer rasters
    if float(nodata).is_integer():
        return str(int(nodata))
    return repr(float(nodata))


def read_geotiff(path) -> GeoGrid:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    try:
        with tifffile.TiffFile(path) as tf:
            page = tf.pages[0]
            tags = {tag.code: tag.value for tag in page.tags}
            data = page.asarray()
            planar_separate = page.planarconfig == tifffile.PLANARCONFIG.SEPARATE
            samples = page.samplesperpixel
    except (tifffile.TiffFileError, ValueError, OSError) as exc:
        raise GridError(f"{path}: unreadable GeoTIFF ({exc})") from exc

    if data.ndim == 2:
        data = data[None]
    elif data.ndim == 3 and samples > 1 and not planar_separate:
        data = np.moveaxis(data, -1, 0)
    values = data.astype(np.float32)

    if TAG_TRANSFORMATION in tags:
        m = tags[TAG_TRANSFORMATION]
        transform = AffineTransform(m[0], m[1], m[3], m[4], m[5], m[7])
    elif TAG_PIXEL_SCALE in tags and TAG_TIEPOINT in tags:
        sx, sy = tags[TAG_PIXEL_SCALE][:2]
        i, j, _, x, y, _ = tags[TAG_TIEPOINT][:6]
        transform = AffineTransform(sx, 0.0, x - i * sx, 0.0, -sy, y + j * sy)
    else:
        raise GridError(f"{path}: missing georeferencing tags")
    if TAG_GEOKEYS not in tags:
        raise GridError(f"{path}: missing GeoKey directory")
    crs = _crs_from_geokeys(tags[TAG_GEOKEYS])
    nodata = float(str(tags.get(TAG_NODATA, "nan")).strip("\x00 ") or "nan")
    return GeoGrid(values, transform, crs, nodata)
