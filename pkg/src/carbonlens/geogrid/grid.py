"""Georeferenced raster model: affine transforms, windows and the GeoGrid container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LONLAT = "EPSG:4326"


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class AffineTransform:
    """Pixel (col, row) -> world (x, y): x = a*col + b*row + c, y = d*col + e*row + f."""

    a: float
    b: float
    c: float
    d: float
    e: float
    f: float

    def __post_init__(self):
        if self.determinant == 0:
            raise GridError("affine transform is not invertible")

    @classmethod
    def identity(cls) -> AffineTransform:
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def from_origin(cls, x0: float, y0: float, xres: float, yres: float) -> AffineTransform:
        """North-up transform with top-left corner at (x0, y0)."""
        return cls(xres, 0.0, x0, 0.0, -yres, y0)

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    @property
    def is_axis_aligned(self) -> bool:
        return self.b == 0 and self.d == 0

    def apply(self, col, row):
        return (self.a * col + self.b * row + self.c, self.d * col + self.e * row + self.f)

    def inverse(self) -> AffineTransform:
        det = self.determinant
        ia = self.e / det
        ib = -self.b / det
        id_ = -self.d / det
        ie = self.a / det
        return AffineTransform(
            ia, ib, -(ia * self.c + ib * self.f), id_, ie, -(id_ * self.c + ie * self.f)
        )

    def translated(self, dcol: float, drow: float) -> AffineTransform:
        """Transform whose pixel (0, 0) is this transform's pixel (dcol, drow)."""
        x, y = self.apply(dcol, drow)
        return AffineTransform(self.a, self.b, x, self.d, self.e, y)

    def scaled(self, sx: float, sy: float) -> AffineTransform:
        """Transform for pixels sx by sy times larger than this one's."""
        return AffineTransform(self.a * sx, self.b * sy, self.c, self.d * sx, self.e * sy, self.f)

    def to_tuple(self) -> tuple[float, ...]:
        return (self.a, self.b, self.c, self.d, self.e, self.f)


@dataclass(frozen=True)
class Window:
    col_off: int
    row_off: int
    width: int
    height: int

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise GridError(f"window must have positive size, got {self.width}x{self.height}")


@dataclass(frozen=True, eq=False)
class GeoGrid:
    """Immutable raster with shape (channels, height, width) in float32.

    ``crs`` is either ``"EPSG:4326"`` (lon/lat degrees) or a WGS-84 UTM code
    ``"EPSG:326zz"`` / ``"EPSG:327zz"``.
    """

    values: np.ndarray
    transform: AffineTransform = field(default_factory=AffineTransform.identity)
    crs: str = LONLAT
    nodata: float = float("nan")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3:
            raise GridError(f"values must be 2-D or 3-D, got {v.ndim}-D")
        if v.shape[1] == 0 or v.shape[2] == 0 or v.shape[0] == 0:
            raise GridError(f"grid has an empty dimension: {v.shape}")
        if not v.flags.c_contiguous:
            v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "nodata", float(self.nodata))

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def valid(self) -> np.ndarray:
        """Boolean array, False where a value equals the nodata sentinel."""
        if np.isnan(self.nodata):
            return ~np.isnan(self.values)
        return self.values != np.float32(self.nodata)

    def replace(self, values=None, transform=None, crs=None, nodata=None) -> GeoGrid:
        return GeoGrid(
            self.values if values is None else values,
            self.transform if transform is None else transform,
            self.crs if crs is None else crs,
            self.nodata if nodata is None else nodata,
        )

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Values as a writable float32 copy with nodata replaced by ``fill``."""
        out = np.array(self.values, dtype=np.float32)
        out[~self.valid()] = fill
        return out

    def same_grid(self, other: GeoGrid) -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and self.transform == other.transform
            and self.crs == other.crs
        )

    def __eq__(self, other):
        if not isinstance(other, GeoGrid):
            return NotImplemented
        return (
            self.shape == other.shape
            and self.transform == other.transform
            and self.crs == other.crs
            and (self.nodata == other.nodata or (np.isnan(self.nodata) and np.isnan(other.nodata)))
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    __hash__ = None


def pixel_to_world(grid: GeoGrid, col, row):
    return grid.transform.apply(col, row)


def world_to_pixel(grid: GeoGrid, x, y):
    return grid.transform.inverse().apply(x, y)


def read_window(grid: GeoGrid, w: Window) -> GeoGrid:
    """Cut ``w`` out of ``grid``; pixels beyond the grid bounds become nodata."""
    out = np.full((grid.channels, w.height, w.width), grid.nodata, dtype=np.float32)
    c0 = max(w.col_off, 0)
    r0 = max(w.row_off, 0)
    c1 = min(w.col_off + w.width, grid.width)
    r1 = min(w.row_off + w.height, grid.height)
    if c1 > c0 and r1 > r0:
        out[:, r0 - w.row_off : r1 - w.row_off, c0 - w.col_off : c1 - w.col_off] = grid.values[
            :, r0:r1, c0:c1
        ]
    return GeoGrid(out, grid.transform.translated(w.col_off, w.row_off), grid.crs, grid.nodata)


def blank_mask(rgb: GeoGrid) -> GeoGrid:
    """1 where any channel holds a valid non-zero value, else 0."""
    informative = rgb.valid() & (rgb.values != 0)
    mask = informative.any(axis=0).astype(np.float32)
    return GeoGrid(mask, rgb.transform, rgb.crs, rgb.nodata)


def stack(grids) -> GeoGrid:
    """Concatenate co-registered grids along the channel axis."""
    grids = list(grids)
    if not grids:
        raise GridError("nothing to stack")
    ref = grids[0]
    for g in grids[1:]:
        if not ref.same_grid(g):
            raise GridError("cannot stack grids with different georeferencing")
    return GeoGrid(
        np.concatenate([g.values for g in grids], axis=0), ref.transform, ref.crs, ref.nodata
    )
