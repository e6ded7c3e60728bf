"""Tile sampling over swaths, temporal swath selection and tuple filtering."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass

import numpy as np

from .geogrid import GeoGrid, Window

# June 1st and September 30th as non-leap day-of-year
SUMMER = (152, 273)


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    grid_n: int = 11
    tile: int = 1024
    max_swaths: int = 5
    date_window: tuple[int, int] = SUMMER

    def __post_init__(self):
        if self.grid_n < 1:
            raise SamplerError("grid_n must be >= 1")
        if self.tile < 1:
            raise SamplerError("tile must be >= 1")
        if self.max_swaths < 1:
            raise SamplerError("max_swaths must be >= 1")
        object.__setattr__(self, "date_window", tuple(self.date_window))


@dataclass(frozen=True)
class TileSpec:
    swath_id: str
    window: Window
    grid_index: tuple[int, int]
    offset: tuple[int, int]


def systematic_unaligned_tiles(
    swath_w: int,
    swath_h: int,
    cfg: SamplerConfig,
    rng: np.random.Generator,
    swath_id: str = "",
    offsets=None,
) -> list[TileSpec]:
    """One tile per cell of a ``grid_n`` x ``grid_n`` grid, each jittered by its own offset.

    Offsets are drawn uniformly from ``[0, tile)`` per axis unless ``offsets`` (an
    array of shape ``(grid_n, grid_n, 2)`` indexed ``[i, j]``) is supplied. Origins
    are clamped so every window stays inside the swath.
    """
    if cfg.tile > swath_w or cfg.tile > swath_h:
        raise SamplerError(f"tile {cfg.tile} larger than swath {swath_w}x{swath_h}")
    n = cfg.grid_n
    if offsets is None:
        offsets = rng.integers(0, cfg.tile, size=(n, n, 2))
    offsets = np.asarray(offsets, dtype=np.int64)
    specs = []
    for j in range(n):
        for i in range(n):
            ax = (i * swath_w) // n
            ay = (j * swath_h) // n
            dx, dy = int(offsets[i, j, 0]), int(offsets[i, j, 1])
            x0 = min(ax + dx, swath_w - cfg.tile)
            y0 = min(ay + dy, swath_h - cfg.tile)
            specs.append(TileSpec(swath_id, Window(x0, y0, cfg.tile, cfg.tile), (i, j), (dx, dy)))
    return specs


def _day_of_year(date: dt.date) -> int:
    doy = date.timetuple().tm_yday
    leap = date.year % 4 == 0 and (date.year % 100 != 0 or date.year % 400 == 0)
    if leap and date.month > 2:
        doy -= 1
    return doy


def _as_date(d) -> dt.date:
    if isinstance(d, dt.datetime):
        return d.date()
    if isinstance(d, dt.date):
        return d
    return dt.date.fromisoformat(str(d)[:10])


def temporal_select(candidates, cfg: SamplerConfig) -> list[str]:
    """Swath ids sensed inside the date window, earliest first, capped at ``max_swaths``."""
    start, end = cfg.date_window
    dated = [(sid, _as_date(d)) for sid, d in candidates]
    kept = [(d, sid) for sid, d in dated if start <= _day_of_year(d) <= end]
    kept.sort(key=lambda pair: pair[0])
    return [sid for _, sid in kept[: cfg.max_swaths]]


class FilterDecision(enum.Enum):
    KEEP = "keep"
    TARGET_INVALID = "target_invalid"
    IMAGE_EMPTY = "image_empty"
    READ_ERROR = "read_error"

    @property
    def keep(self) -> bool:
        return self is FilterDecision.KEEP


TARGET_INVALID_LIMIT = 0.5
IMAGE_EMPTY_LIMIT = 0.2


def filter_tile_tuple(
    image_empty_fraction: float, target_invalid_fraction: float, read_error: bool = False
) -> FilterDecision:
    """Drop when the target is at least half invalid, the image more than 20% empty, or unreadable."""
    if target_invalid_fraction >= TARGET_INVALID_LIMIT:
        return FilterDecision.TARGET_INVALID
    if image_empty_fraction > IMAGE_EMPTY_LIMIT:
        return FilterDecision.IMAGE_EMPTY
    if read_error:
        return FilterDecision.READ_ERROR
    return FilterDecision.KEEP


def apply_blank_mask(
    inputs: GeoGrid, target: GeoGrid, mask: GeoGrid, image_channels: int = 3
) -> tuple[GeoGrid, GeoGrid]:
    """Zero auxiliary channels and the target where ``mask`` is 0; image channels pass through."""
    shape = (inputs.height, inputs.width)
    for name, g in (("target", target), ("mask", mask)):
        if (g.height, g.width) != shape:
            raise SamplerError(
                f"{name} shape {g.height}x{g.width} does not match inputs {shape[0]}x{shape[1]}"
            )
    m = mask.values[0]
    values = np.array(inputs.values)
    values[image_channels:] *= m
    return inputs.replace(values=values), target.replace(values=target.values * m)
