"""Dataset partitioning by city and assembly of co-registered tile tuples."""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geogrid import (
    GeoGrid,
    GridError,
    Window,
    blank_mask,
    coregister,
    coregister_mass,
    coregister_total,
    read_geotiff,
    read_window,
    stack,
    write_geotiff,
)
from .roadraster import load_road_segments, rasterize_roads
from .sampler import TileSpec, apply_blank_mask

EARTH_RADIUS_KM = 6371.0088
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
REFLECTANCE_SCALE = 10000.0

CHANNEL_WIDTHS = {"image_rgb": 3, "roads": 3, "landscan": 1, "oco2": 1, "carbontracker": 1}


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CityRecord:
    name: str
    state: str
    lat: float
    lon: float
    population: int

    def __post_init__(self):
        if abs(self.lat) > 90 or abs(self.lon) > 180:
            raise CorpusError(f"{self.name}, {self.state}: coordinates out of range")
        if self.population < 0:
            raise CorpusError(f"{self.name}, {self.state}: negative population")

    @property
    def key(self) -> str:
        return f"{self.state}:{self.name}"


def haversine_km(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlam = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0, 1)))


def load_cities(path) -> list[CityRecord]:
    with open(path, newline="") as fh:
        return [
            CityRecord(r["name"], r["state"], float(r["lat"]), float(r["lon"]),
                       int(float(r["population"])))
            for r in csv.DictReader(fh)
        ]


def load_airports(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        return [(float(r["lat"]), float(r["lon"])) for r in csv.DictReader(fh)]


def _by_rank(c: CityRecord):
    return (c.state, c.name)


def assign_validation_cities(cities, airports) -> set[CityRecord]:
    """Nearest city to each airport, then the most populous city of any uncovered state."""
    cities = list(cities)
    if not cities or not airports:
        raise CorpusError("need at least one city and one airport")
    lat = np.array([c.lat for c in cities])
    lon = np.array([c.lon for c in cities])
    chosen = set()
    for alat, alon in airports:
        d = haversine_km(alat, alon, lat, lon)
        best = min(range(len(cities)), key=lambda i: (d[i], _by_rank(cities[i])))
        chosen.add(cities[best])

    covered = {c.state for c in chosen}
    by_state = defaultdict(list)
    for c in cities:
        by_state[c.state].append(c)
    for state, members in by_state.items():
        if state not in covered:
            chosen.add(min(members, key=lambda c: (-c.population, c.name)))
    return chosen


def build_train_split(
    cities, val_cities, radius_km: float = 120.0, per_state=(35, 35, 30), rng=None
) -> list[CityRecord]:
    """Cities farther than ``radius_km`` from every validation city, down-selected per state.

    Each state keeps its most and least populous cities plus a random draw from
    the rest; states with fewer eligible cities than the total quota keep all.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    val = list(val_cities)
    val_set = set(val)
    vlat = np.array([c.lat for c in val])
    vlon = np.array([c.lon for c in val])
    eligible = []
    for c in cities:
        if c in val_set:
            continue
        if val and np.min(haversine_km(c.lat, c.lon, vlat, vlon)) <= radius_km:
            continue
        eligible.append(c)

    n_top, n_bottom, n_random = per_state
    by_state = defaultdict(list)
    for c in eligible:
        by_state[c.state].append(c)
    kept = []
    for state in sorted(by_state):
        members = sorted(by_state[state], key=lambda c: (-c.population, c.name))
        if len(members) < n_top + n_bottom + n_random:
            kept.extend(members)
            continue
        top = members[:n_top]
        bottom = members[len(members) - n_bottom :]
        rest = members[n_top : len(members) - n_bottom]
        pick = rng.choice(len(rest), size=n_random, replace=False)
        kept.extend(top + bottom + [rest[i] for i in sorted(pick)])
    return sorted(kept, key=_by_rank)


def write_split_manifest(path, train, validation) -> Path:
    path = Path(path)
    doc = {
        "train": sorted(c.key for c in train),
        "validation": sorted(c.key for c in validation),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


@dataclass(frozen=True)
class ChannelConfig:
    channels: tuple[str, ...] = ("image_rgb", "roads")

    def __post_init__(self):
        chans = tuple(self.channels)
        object.__setattr__(self, "channels", chans)
        if not chans:
            raise CorpusError("channel list is empty")
        unknown = [c for c in chans if c not in CHANNEL_WIDTHS]
        if unknown:
            raise CorpusError(f"unknown channels {unknown}; choose from {list(CHANNEL_WIDTHS)}")
        if len(set(chans)) != len(chans):
            raise CorpusError("duplicate channels")
        if "image_rgb" in chans and chans[0] != "image_rgb":
            raise CorpusError("image_rgb must come first")

    @property
    def n_channels(self) -> int:
        return sum(CHANNEL_WIDTHS[c] for c in self.channels)

    @property
    def image_channels(self) -> int:
        return 3 if "image_rgb" in self.channels else 0


@dataclass
class SceneSources:
    """Layers for one swath. ``image`` is the swath's RGB in reflectance x 10000."""

    image: GeoGrid
    target: GeoGrid | None = None
    roads: list | None = None
    landscan: GeoGrid | None = None
    oco2: GeoGrid | None = None
    carbontracker: GeoGrid | None = None
    swath_id: str = ""
    date: str = ""
    location: str = ""


@dataclass
class TileTuple:
    inputs: GeoGrid
    target: GeoGrid | None
    valid_mask: GeoGrid
    meta: dict = field(default_factory=dict)

    @property
    def tuple_id(self) -> str:
        w = self.meta["window"]
        return f"{self.meta['swath_id']}_{w[0]:05d}_{w[1]:05d}"


def normalize_image(raw: np.ndarray) -> np.ndarray:
    """Reflectance x 10000 -> [0, 1] -> per-channel ImageNet standardisation."""
    x = np.clip(raw.astype(np.float64) / REFLECTANCE_SCALE, 0.0, 1.0)
    mean = np.asarray(IMAGENET_MEAN)[:, None, None]
    std = np.asarray(IMAGENET_STD)[:, None, None]
    return (x - mean) / std


def assemble_tile_tuple(
    spec: TileSpec, sources: SceneSources, cfg: ChannelConfig, with_target: bool = True
) -> TileTuple:
    """Cut a tile and bring every configured layer onto its grid.

    The blank mask from the raw RGB zeroes auxiliaries and the target; the
    valid mask is blank mask AND target validity.
    """
    raw = read_window(sources.image, spec.window)
    mask = blank_mask(raw)
    grid = raw.replace(values=np.zeros((1, raw.height, raw.width), np.float32))

    layers = []
    for name in cfg.channels:
        if name == "image_rgb":
            layers.append(raw.replace(values=normalize_image(raw.filled(0.0)), nodata=np.nan))
            continue
        src = getattr(sources, name)
        if src is None:
            raise CorpusError(f"source layer {name!r} is configured but missing")
        if name == "roads":
            layers.append(rasterize_roads(src, grid))
        elif name == "landscan":
            layers.append(_filled(coregister_mass(src, grid)))
        else:
            layers.append(_filled(coregister(src, grid, "bilinear")))
    inputs = stack([g.replace(nodata=np.nan) for g in layers])

    image_empty = 1.0 - float(mask.values.mean())
    meta = {
        "swath_id": sources.swath_id or spec.swath_id,
        "window": [spec.window.col_off, spec.window.row_off, spec.window.width, spec.window.height],
        "grid_index": list(spec.grid_index),
        "offset": list(spec.offset),
        "date": sources.date,
        "location": sources.location,
        "channels": list(cfg.channels),
        "image_empty_fraction": image_empty,
    }

    if not with_target:
        zero_target = grid.replace(nodata=np.nan)
        inputs, _ = apply_blank_mask(inputs, zero_target, mask, cfg.image_channels)
        return TileTuple(inputs, None, mask.replace(nodata=np.nan), meta)

    if sources.target is None:
        raise CorpusError("source layer 'target' is missing")
    tgt = coregister_total(sources.target, grid)
    target_valid = tgt.valid() & (np.nan_to_num(tgt.values, nan=-1.0) >= 0)
    target = tgt.replace(values=np.where(target_valid, tgt.values, 0.0), nodata=np.nan)
    inputs, target = apply_blank_mask(inputs, target, mask, cfg.image_channels)
    valid = (mask.values > 0) & target_valid
    meta["target_invalid_fraction"] = 1.0 - float(target_valid.mean())
    return TileTuple(inputs, target, mask.replace(values=valid.astype(np.float32), nodata=np.nan), meta)


def _filled(g: GeoGrid) -> GeoGrid:
    return g.replace(values=g.filled(0.0), nodata=np.nan)


LAYER_FILES = {"inputs": "inputs.tif", "target": "target.tif", "valid_mask": "mask.tif"}


class TupleFormatError(CorpusError):
    pass


def save_tuple(t: TileTuple, root) -> Path:
    """Write ``t`` as ``root/<tuple_id>/`` holding one GeoTIFF per layer plus ``meta.json``."""
    d = Path(root) / t.tuple_id
    d.mkdir(parents=True, exist_ok=True)
    write_geotiff(d / LAYER_FILES["inputs"], t.inputs)
    if t.target is not None:
        write_geotiff(d / LAYER_FILES["target"], t.target)
    write_geotiff(d / LAYER_FILES["valid_mask"], t.valid_mask)
    (d / "meta.json").write_text(json.dumps(t.meta, indent=2, sort_keys=True) + "\n")
    return d


def load_tuple(path) -> TileTuple:
    d = Path(path)
    try:
        meta = json.loads((d / "meta.json").read_text())
    except (OSError, ValueError) as exc:
        raise TupleFormatError(f"{d}: field 'meta' unreadable ({exc})") from exc
    layers = {}
    for name, fname in LAYER_FILES.items():
        f = d / fname
        if name == "target" and not f.exists():
            layers[name] = None
            continue
        try:
            layers[name] = read_geotiff(f)
        except (OSError, GridError) as exc:
            raise TupleFormatError(f"{d}: field {name!r} unreadable ({exc})") from exc
    return TileTuple(layers["inputs"], layers["target"], layers["valid_mask"], meta)


def list_tuples(root) -> list[Path]:
    root = Path(root)
    if not root.exists():
        return []
    return sorted(p.parent for p in root.glob("*/meta.json"))


def load_tuples(root) -> list[TileTuple]:
    return [load_tuple(p) for p in list_tuples(root)]


def split_monitor(tiles, size: int, seed: int):
    """Fixed random subset of ``size`` tiles for per-epoch monitoring; returns (monitor, test)."""
    tiles = list(tiles)
    if len(tiles) <= size:
        return tiles, []
    rng = np.random.default_rng(seed)
    pick = set(rng.choice(len(tiles), size=size, replace=False).tolist())
    monitor = [t for i, t in enumerate(tiles) if i in pick]
    test = [t for i, t in enumerate(tiles) if i not in pick]
    return monitor, test


@dataclass(frozen=True)
class SwathEntry:
    id: str
    date: str
    layers: dict
    location: str = ""
    split: str | None = None


def load_manifest(path) -> tuple[list[SwathEntry], Path]:
    """Read a swath manifest; layer paths are resolved against the manifest's directory."""
    path = Path(path)
    doc = json.loads(path.read_text())
    entries = []
    for i, s in enumerate(doc.get("swaths", [])):
        try:
            entries.append(SwathEntry(s["id"], s["date"], dict(s["layers"]),
                                      s.get("location", ""), s.get("split")))
        except KeyError as exc:
            raise CorpusError(f"{path}: swath #{i} lacks field {exc}") from exc
    return entries, path.parent


_GRID_CACHE: dict = {}


def load_sources(entry: SwathEntry, base: Path, cfg: ChannelConfig, with_target=True) -> SceneSources:
    """Load the layers ``cfg`` needs for one swath (shared rasters are cached by path)."""

    def raster(name):
        p = (base / entry.layers[name]).resolve()
        if p not in _GRID_CACHE:
            _GRID_CACHE[p] = read_geotiff(p)
        return _GRID_CACHE[p]

    needed = {"image"} | {c for c in cfg.channels if c != "image_rgb"}
    if with_target:
        needed.add("target")
    missing = sorted(n for n in needed if n not in entry.layers)
    if missing:
        raise CorpusError(f"swath {entry.id}: manifest lacks layers {missing}")
    src = SceneSources(image=read_geotiff(base / entry.layers["image"]), swath_id=entry.id,
                       date=entry.date, location=entry.location)
    if with_target:
        src.target = read_geotiff(base / entry.layers["target"])
    for name in needed - {"image", "target"}:
        if name == "roads":
            src.roads = list(load_road_segments(base / entry.layers["roads"]))
        else:
            setattr(src, name, raster(name))
    return src


def clear_cache():
    _GRID_CACHE.clear()


def window_from_meta(meta) -> Window:
    return Window(*meta["window"])
