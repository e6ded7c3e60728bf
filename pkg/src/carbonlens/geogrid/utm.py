"""WGS-84 UTM <-> lon/lat using Krüger's n-series to sixth order.

Accurate to well under a millimetre inside a UTM zone, which is far beyond what
the raster pipeline needs.
"""

from __future__ import annotations

import re

import numpy as np

from .grid import LONLAT, GridError

A_WGS84 = 6378137.0
F_WGS84 = 1 / 298.257223563
K0 = 0.9996
FALSE_EASTING = 500000.0
FALSE_NORTHING_SOUTH = 10000000.0
MAX_LAT = 84.0

_n = F_WGS84 / (2 - F_WGS84)
_E = np.sqrt(F_WGS84 * (2 - F_WGS84))
_A = A_WGS84 / (1 + _n) * (1 + _n**2 / 4 + _n**4 / 64 + _n**6 / 256)

_ALPHA = np.array([
    _n / 2 - 2 * _n**2 / 3 + 5 * _n**3 / 16 + 41 * _n**4 / 180 - 127 * _n**5 / 288
    + 7891 * _n**6 / 37800,
    13 * _n**2 / 48 - 3 * _n**3 / 5 + 557 * _n**4 / 1440 + 281 * _n**5 / 630
    - 1983433 * _n**6 / 1935360,
    61 * _n**3 / 240 - 103 * _n**4 / 140 + 15061 * _n**5 / 26880 + 167603 * _n**6 / 181440,
    49561 * _n**4 / 161280 - 179 * _n**5 / 168 + 6601661 * _n**6 / 7257600,
    34729 * _n**5 / 80640 - 3418889 * _n**6 / 1995840,
    212378941 * _n**6 / 319334400,
])
_BETA = np.array([
    _n / 2 - 2 * _n**2 / 3 + 37 * _n**3 / 96 - _n**4 / 360 - 81 * _n**5 / 512
    + 96199 * _n**6 / 604800,
    _n**2 / 48 + _n**3 / 15 - 437 * _n**4 / 1440 + 46 * _n**5 / 105 - 1118711 * _n**6 / 3870720,
    17 * _n**3 / 480 - 37 * _n**4 / 840 - 209 * _n**5 / 4480 + 5569 * _n**6 / 90720,
    4397 * _n**4 / 161280 - 11 * _n**5 / 504 - 830251 * _n**6 / 7257600,
    4583 * _n**5 / 161280 - 108847 * _n**6 / 3991680,
    20648693 * _n**6 / 638668800,
])
_J2 = 2 * np.arange(1, 7)

_UTM_RE = re.compile(r"^EPSG:32([67])(\d\d)$")


def central_meridian(zone: int) -> float:
    return -183.0 + 6.0 * zone


def zone_for_lon(lon: float) -> int:
    return int(np.floor((lon + 180.0) / 6.0)) % 60 + 1


def utm_crs(zone: int, south: bool = False) -> str:
    _check_zone(zone)
    return f"EPSG:{327 if south else 326}{zone:02d}"


def parse_crs(crs: str):
    """Return ``None`` for lon/lat, else ``(zone, south)``; unsupported codes raise."""
    if crs == LONLAT:
        return None
    m = _UTM_RE.match(crs)
    if m is None or not 1 <= int(m.group(2)) <= 60:
        raise GridError(f"unsupported CRS {crs!r}: only EPSG:4326 and WGS-84 UTM zones")
    return int(m.group(2)), m.group(1) == "7"


def _check_zone(zone):
    if not 1 <= int(zone) <= 60:
        raise GridError(f"UTM zone must be in [1, 60], got {zone}")


def _tauprime(tau):
    sig = np.sinh(_E * np.arctanh(_E * tau / np.hypot(1.0, tau)))
    return tau * np.hypot(1.0, sig) - sig * np.hypot(1.0, tau)


def lonlat_to_utm(lon, lat, zone: int, south: bool | None = None):
    """Project lon/lat degrees into ``zone``; ``south`` defaults to ``lat < 0``.

    Works elementwise on arrays; ``south`` must then be given explicitly if the
    points straddle the equator.
    """
    _check_zone(zone)
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    if np.any(np.abs(lat) >= MAX_LAT) or np.any(~np.isfinite(lat)):
        raise GridError(f"latitude must satisfy |lat| < {MAX_LAT}")
    if south is None:
        south = bool(np.all(lat < 0)) if lat.ndim else bool(lat < 0)

    lam = np.radians(lon - central_meridian(zone))
    lam = (lam + np.pi) % (2 * np.pi) - np.pi
    tau = np.tan(np.radians(lat))
    taup = _tauprime(tau)
    xip = np.arctan2(taup, np.cos(lam))
    etap = np.arcsinh(np.sin(lam) / np.hypot(taup, np.cos(lam)))

    xi = xip + np.sum(
        _ALPHA[:, None] * np.sin(_J2[:, None] * xip.ravel()) * np.cosh(_J2[:, None] * etap.ravel()),
        axis=0,
    ).reshape(xip.shape)
    eta = etap + np.sum(
        _ALPHA[:, None] * np.cos(_J2[:, None] * xip.ravel()) * np.sinh(_J2[:, None] * etap.ravel()),
        axis=0,
    ).reshape(etap.shape)

    easting = FALSE_EASTING + K0 * _A * eta
    northing = K0 * _A * xi + (FALSE_NORTHING_SOUTH if south else 0.0)
    return _unwrap(easting), _unwrap(northing)


def utm_to_lonlat(easting, northing, zone: int, south: bool = False):
    _check_zone(zone)
    easting = np.asarray(easting, dtype=np.float64)
    northing = np.asarray(northing, dtype=np.float64)
    xi = (northing - (FALSE_NORTHING_SOUTH if south else 0.0)) / (K0 * _A)
    eta = (easting - FALSE_EASTING) / (K0 * _A)

    xr, er = xi.ravel(), eta.ravel()
    xip = xi - np.sum(
        _BETA[:, None] * np.sin(_J2[:, None] * xr) * np.cosh(_J2[:, None] * er), axis=0
    ).reshape(xi.shape)
    etap = eta - np.sum(
        _BETA[:, None] * np.cos(_J2[:, None] * xr) * np.sinh(_J2[:, None] * er), axis=0
    ).reshape(eta.shape)

    taup = np.sin(xip) / np.hypot(np.sinh(etap), np.cos(xip))
    lam = np.arctan2(np.sinh(etap), np.cos(xip))

    e2m = 1 - _E**2
    tau = taup / e2m
    for _ in range(8):
        tp = _tauprime(tau)
        dtau = (taup - tp) / np.hypot(1.0, tp) * (1 + e2m * tau**2) / (e2m * np.hypot(1.0, tau))
        tau = tau + dtau
        if np.all(np.abs(dtau) < 1e-14 * np.maximum(1.0, np.abs(tau))):
            break

    lat = np.degrees(np.arctan(tau))
    lon = np.degrees(lam) + central_meridian(zone)
    lon = (lon + 180.0) % 360.0 - 180.0
    if np.any(np.abs(lat) >= MAX_LAT):
        raise GridError(f"point maps outside |lat| < {MAX_LAT}")
    return _unwrap(lon), _unwrap(lat)


def _unwrap(a):
    return float(a) if np.ndim(a) == 0 else a


def transform_coords(x, y, src_crs: str, dst_crs: str):
    """Move coordinates between lon/lat and UTM zones (via lon/lat)."""
    src = parse_crs(src_crs)
    dst = parse_crs(dst_crs)
    if src == dst:
        return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if src is None:
        lon, lat = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    else:
        lon, lat = utm_to_lonlat(x, y, src[0], src[1])
    if dst is None:
        return np.asarray(lon), np.asarray(lat)
    e, n = lonlat_to_utm(lon, lat, dst[0], dst[1])
    return np.asarray(e), np.asarray(n)
