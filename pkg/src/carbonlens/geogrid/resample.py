"""Resampling kernels: pixel-centre bilinear, mass-conserving and cross-CRS coregistration."""

from __future__ import annotations

import numpy as np

from .grid import GeoGrid, GridError
from .utm import transform_coords

_SNAP = 1e-6


def _snap(u: np.ndarray) -> np.ndarray:
    r = np.rint(u)
    return np.where(np.abs(u - r) < _SNAP, r, u)


def sample_bilinear(grid: GeoGrid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample every channel at continuous pixel-index positions ``(u, v)``.

    ``u``/``v`` index pixel centres (0 is the centre of the first pixel) and are
    clamped to the grid. Nodata neighbours are dropped and the remaining weights
    renormalised; a position with no valid neighbour yields nodata.
    """
    h, w = grid.height, grid.width
    u = np.clip(_snap(np.asarray(u, dtype=np.float64)), 0, w - 1)
    v = np.clip(_snap(np.asarray(v, dtype=np.float64)), 0, h - 1)
    u0 = np.floor(u).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = u - u0
    fv = v - v0

    values = grid.values.astype(np.float64)
    valid = grid.valid()
    corners = (
        (v0, u0, (1 - fu) * (1 - fv)),
        (v0, u1, fu * (1 - fv)),
        (v1, u0, (1 - fu) * fv),
        (v1, u1, fu * fv),
    )
    acc = np.zeros((grid.channels,) + u.shape)
    wsum = np.zeros_like(acc)
    nvalid = np.zeros_like(acc)
    vsum = np.zeros_like(acc)
    for rows, cols, weight in corners:
        ok = valid[:, rows, cols]
        val = np.where(ok, values[:, rows, cols], 0.0)
        acc += weight * val
        wsum += weight * ok
        nvalid += ok
        vsum += val

    out = np.full(acc.shape, grid.nodata, dtype=np.float64)
    has_weight = wsum > 1e-12
    out[has_weight] = acc[has_weight] / wsum[has_weight]
    # all weight landed on nodata corners: fall back to the mean of the valid ones
    fallback = ~has_weight & (nvalid > 0)
    out[fallback] = vsum[fallback] / nvalid[fallback]
    return out


def bilinear_resample(grid: GeoGrid, out_w: int, out_h: int) -> GeoGrid:
    """Resample to ``out_w`` x ``out_h`` keeping the world extent (pixel-centre alignment)."""
    if out_w <= 0 or out_h <= 0:
        raise GridError(f"output size must be positive, got {out_w}x{out_h}")
    sx = grid.width / out_w
    sy = grid.height / out_h
    u = (np.arange(out_w) + 0.5) * sx - 0.5
    v = (np.arange(out_h) + 0.5) * sy - 0.5
    uu, vv = np.meshgrid(u, v)
    out = sample_bilinear(grid, uu, vv)
    return GeoGrid(out, grid.transform.scaled(sx, sy), grid.crs, grid.nodata)


def _valid_sum(grid: GeoGrid) -> float:
    return float(np.sum(grid.values, where=grid.valid(), dtype=np.float64))


def mass_conserving_resample(grid: GeoGrid, out_w: int, out_h: int) -> GeoGrid:
    """Bilinear resample of a count layer, rescaled so the valid total is unchanged."""
    valid = grid.valid()
    if np.any(grid.values[valid] < 0):
        raise GridError("mass-conserving resample requires non-negative values")
    inter = bilinear_resample(grid, out_w, out_h)
    total_in = _valid_sum(grid)
    total_mid = _valid_sum(inter)
    ok = inter.valid()
    out = inter.values.astype(np.float64)
    if total_mid == 0:
        out[ok] = 0.0
    else:
        out[ok] *= total_in / total_mid
    return inter.replace(values=out)


def _ref_to_src_pixels(src: GeoGrid, ref: GeoGrid, col: np.ndarray, row: np.ndarray):
    x, y = ref.transform.apply(col, row)
    x, y = transform_coords(x, y, ref.crs, src.crs)
    return src.transform.inverse().apply(x, y)


def _ref_centres(ref: GeoGrid):
    return np.meshgrid(np.arange(ref.width) + 0.5, np.arange(ref.height) + 0.5)


def coregister(src: GeoGrid, ref: GeoGrid, mode: str = "bilinear") -> GeoGrid:
    """Resample ``src`` onto ``ref``'s pixel grid.

    Each ``ref`` pixel centre is carried into ``src`` pixel space; centres falling
    outside ``src`` become nodata.
    """
    if mode not in ("nearest", "bilinear"):
        raise GridError(f"unknown resampling mode {mode!r}")
    if src.same_grid(ref):
        return src.replace()
    cols, rows = _ref_centres(ref)
    px, py = _ref_to_src_pixels(src, ref, cols, rows)
    px = _snap(px)
    py = _snap(py)
    inside = (px >= 0) & (px < src.width) & (py >= 0) & (py < src.height)

    if mode == "nearest":
        ci = np.clip(np.floor(px).astype(np.intp), 0, src.width - 1)
        ri = np.clip(np.floor(py).astype(np.intp), 0, src.height - 1)
        out = src.values[:, ri, ci].astype(np.float64)
    else:
        out = sample_bilinear(src, px - 0.5, py - 0.5)
    out[:, ~inside] = src.nodata
    return GeoGrid(out, ref.transform, ref.crs, src.nodata)


def pixel_area_ratio(src: GeoGrid, ref: GeoGrid) -> np.ndarray:
    """Area of each ``ref`` pixel measured in ``src`` pixels (local Jacobian)."""
    if src.same_grid(ref):
        return np.ones((ref.height, ref.width))
    cols, rows = _ref_centres(ref)
    pxe, pye = _ref_to_src_pixels(src, ref, cols + 0.5, rows)
    pxw, pyw = _ref_to_src_pixels(src, ref, cols - 0.5, rows)
    pxs, pys = _ref_to_src_pixels(src, ref, cols, rows + 0.5)
    pxn, pyn = _ref_to_src_pixels(src, ref, cols, rows - 0.5)
    return np.abs((pxe - pxw) * (pys - pyn) - (pye - pyw) * (pxs - pxn))


def coregister_total(src: GeoGrid, ref: GeoGrid) -> GeoGrid:
    """Turn a per-``src``-pixel total layer into per-``ref``-pixel totals.

    Bilinear coregistration scaled by the pixel-area ratio, so a layer of
    1 km^2 cell totals becomes totals per 10 m pixel.
    """
    out = coregister(src, ref, "bilinear")
    ok = out.valid()
    values = out.values.astype(np.float64)
    values[ok] *= np.broadcast_to(pixel_area_ratio(src, ref), values.shape)[ok]
    return out.replace(values=values)


def coregister_mass(src: GeoGrid, ref: GeoGrid) -> GeoGrid:
    """Coregister a count layer so the tile total matches the source region total.

    The source total over the ``ref`` footprint is the area-weighted sum of the
    source cells under each ``ref`` pixel; the bilinear per-pixel totals are then
    rescaled to it, mirroring :func:`mass_conserving_resample`.
    """
    valid_src = src.valid()
    if np.any(src.values[valid_src] < 0):
        raise GridError("mass-conserving coregistration requires non-negative values")
    area = pixel_area_ratio(src, ref)
    near = coregister(src, ref, "nearest")
    near_ok = near.valid()
    region_total = np.sum(
        np.where(near_ok, near.values.astype(np.float64) * area, 0.0), axis=(1, 2)
    )
    out = coregister_total(src, ref)
    ok = out.valid()
    values = out.values.astype(np.float64)
    for ch in range(values.shape[0]):
        mid = values[ch][ok[ch]].sum()
        if mid == 0:
            values[ch][ok[ch]] = 0.0
        else:
            values[ch][ok[ch]] *= region_total[ch] / mid
    return out.replace(values=values)
