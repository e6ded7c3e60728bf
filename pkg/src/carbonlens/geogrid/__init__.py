from .geotiff import read_geotiff, write_geotiff
from .grid import (
    LONLAT,
    AffineTransform,
    GeoGrid,
    GridError,
    Window,
    blank_mask,
    pixel_to_world,
    read_window,
    stack,
    world_to_pixel,
)
from .resample import (
    bilinear_resample,
    coregister,
    coregister_mass,
    coregister_total,
    mass_conserving_resample,
    pixel_area_ratio,
)
from .utm import lonlat_to_utm, parse_crs, utm_crs, utm_to_lonlat, zone_for_lon

__all__ = [
    "LONLAT",
    "AffineTransform",
    "GeoGrid",
    "GridError",
    "Window",
    "bilinear_resample",
    "blank_mask",
    "coregister",
    "coregister_mass",
    "coregister_total",
    "lonlat_to_utm",
    "mass_conserving_resample",
    "parse_crs",
    "pixel_area_ratio",
    "pixel_to_world",
    "read_geotiff",
    "read_window",
    "stack",
    "utm_crs",
    "utm_to_lonlat",
    "world_to_pixel",
    "write_geotiff",
    "zone_for_lon",
]
