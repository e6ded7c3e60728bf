"""Procedural desk-scale scenes with a known emissions law.

Emissions are a blurred sum of per-class road presence rasters, so a network fed
roads (and imagery showing the roads) can in principle recover them exactly.
Some local roads are left out of the exported road map but still drawn in the
imagery and still emit, which gives the image channels information the road
channels lack.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from .geogrid import (
    LONLAT,
    AffineTransform,
    GeoGrid,
    bilinear_resample,
    utm_crs,
    utm_to_lonlat,
    write_geotiff,
)
from .roadraster import RoadClass, RoadSegment, rasterize_roads, save_road_segments

GSD = 10.0
ZONE = 18
ORIGIN = (300000.0, 4400000.0)
CLASS_WEIGHTS = {
    RoadClass.PRIMARY: 0.12,
    RoadClass.RAMP: 0.06,
    RoadClass.SECONDARY: 0.30,
    RoadClass.LOCAL: 0.52,
}


@dataclass(frozen=True)
class SceneParams:
    size: int = 512
    road_count: int = 24
    # kg CO2 per road pixel per year for the (primary+ramp, secondary, local) channels
    emission_factor_per_class: tuple[float, float, float] = (400.0, 150.0, 50.0)
    blur_radius: float = 4.0
    noise_level: float = 0.01
    seed: int = 0
    unmapped_fraction: float = 0.3
    blank_fraction: float = 0.0
    population_per_road_pixel: float = 40.0

    def __post_init__(self):
        if self.size <= 0 or self.size % 32:
            raise ValueError(f"size must be a positive multiple of 32, got {self.size}")
        values = (
            self.road_count, self.blur_radius, self.noise_level, self.seed,
            self.unmapped_fraction, self.blank_fraction, self.population_per_road_pixel,
            *self.emission_factor_per_class,
        )
        if any(v < 0 for v in values):
            raise ValueError("scene parameters must be non-negative")
        if len(self.emission_factor_per_class) != 3:
            raise ValueError("need three emission factors")
        if self.unmapped_fraction > 1 or self.blank_fraction > 1:
            raise ValueError("fractions must be <= 1")


@dataclass(frozen=True)
class Scene:
    rgb: GeoGrid
    roads: tuple[RoadSegment, ...]
    population: GeoGrid
    emissions: GeoGrid
    unmapped: frozenset = field(default_factory=frozenset)

    @property
    def mapped_roads(self) -> list[RoadSegment]:
        return [r for r in self.roads if r.id not in self.unmapped]


def blur_matrix(n: int, sigma: float) -> sparse.csr_matrix:
    """Column-stochastic 1-D Gaussian: each input pixel spreads over +-3 sigma, clipped and renormalised."""
    if sigma <= 0:
        return sparse.identity(n, format="csr")
    radius = int(np.ceil(3 * sigma))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    cols = np.repeat(np.arange(n), offsets.size)
    rows = cols + np.tile(offsets, n)
    w = np.tile(kernel, n)
    keep = (rows >= 0) & (rows < n)
    mat = sparse.csc_matrix((w[keep], (rows[keep], cols[keep])), shape=(n, n))
    colsum = np.asarray(mat.sum(axis=0)).ravel()
    return (mat @ sparse.diags(1.0 / colsum)).tocsr()


def gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    """Mass-conserving separable blur of a 2-D array."""
    h, w = a.shape
    rows = blur_matrix(h, sigma) @ a.astype(np.float64)
    return (blur_matrix(w, sigma) @ rows.T).T


def scene_transform(size: int, index: int = 0) -> AffineTransform:
    x0 = ORIGIN[0] + index * (size + 64) * GSD
    return AffineTransform.from_origin(x0, ORIGIN[1] + size * GSD, GSD, GSD)


def _random_roads(p: SceneParams, transform: AffineTransform, rng) -> list[RoadSegment]:
    classes = list(CLASS_WEIGHTS)
    probs = np.array(list(CLASS_WEIGHTS.values()))
    roads = []
    extent = p.size * GSD
    for k in range(p.road_count):
        cls = classes[rng.choice(len(classes), p=probs / probs.sum())]
        legs = 2 if cls is RoadClass.RAMP else int(rng.integers(3, 9))
        leg_len = extent * (0.04 if cls is RoadClass.RAMP else rng.uniform(0.08, 0.25))
        x, y = transform.apply(*rng.uniform(0, p.size, size=2))
        heading = rng.uniform(0, 2 * np.pi)
        pts = [(x, y)]
        for _ in range(legs):
            heading += rng.normal(0, 0.35)
            x += leg_len * np.cos(heading)
            y += leg_len * np.sin(heading)
            pts.append((x, y))
        roads.append(RoadSegment(tuple(pts), cls, f"r{k}"))
    return roads


def _value_noise(size: int, cells: int, rng) -> np.ndarray:
    coarse = GeoGrid(rng.random((cells, cells)))
    return bilinear_resample(coarse, size, size).values[0].astype(np.float64)


def generate_scene(p: SceneParams, index: int = 0) -> Scene:
    """Build one co-registered scene; ``index`` only shifts its georeference."""
    rng = np.random.default_rng(p.seed)
    transform = scene_transform(p.size, index)
    crs = utm_crs(ZONE)
    ref = GeoGrid(np.zeros((1, p.size, p.size), np.float32), transform, crs)

    roads = _random_roads(p, transform, rng)
    local = [r.id for r in roads if r.cls is RoadClass.LOCAL]
    n_unmapped = int(round(p.unmapped_fraction * len(local)))
    unmapped = frozenset(rng.permutation(local)[:n_unmapped].tolist()) if local else frozenset()

    presence = rasterize_roads(roads, ref).values.astype(np.float64)
    factors = np.asarray(p.emission_factor_per_class, dtype=np.float64)
    emissions = gaussian_blur(np.tensordot(factors, presence, axes=1), p.blur_radius)
    density = gaussian_blur(presence.max(axis=0), 3 * p.blur_radius)
    population = np.rint(density * p.population_per_road_pixel)

    # reflectance x 10000: smooth land cover, darker roads, sensor noise
    cover = _value_noise(p.size, 6, rng)
    detail = _value_noise(p.size, 24, rng)
    base = 600 + 1800 * cover[None] + 300 * detail[None]
    tint = np.array([1.0, 1.1, 0.85])[:, None, None]
    rgb = base * tint
    road_any = presence.max(axis=0) > 0
    rgb[:, road_any] = 350 + 150 * rgb[:, road_any] / rgb.max()
    rgb += rng.normal(0, p.noise_level * 10000, size=rgb.shape)
    rgb = np.clip(rgb, 1, 10000)
    if p.blank_fraction > 0:
        rgb[:, :, : int(round(p.blank_fraction * p.size))] = 0

    return Scene(
        GeoGrid(rgb, transform, crs, 0.0),
        tuple(roads),
        GeoGrid(population, transform, crs),
        GeoGrid(emissions, transform, crs),
        unmapped,
    )


def aggregate_sum(grid: GeoGrid, factor: int) -> GeoGrid:
    h, w = grid.height // factor, grid.width // factor
    v = grid.values.astype(np.float64)[:, : h * factor, : w * factor]
    v = v.reshape(grid.channels, h, factor, w, factor).sum(axis=(2, 4))
    return GeoGrid(v, grid.transform.scaled(factor, factor), grid.crs, grid.nodata)


def concentration_field(bounds_lonlat, base_ppm: float, rng, cell_deg: float = 0.05) -> GeoGrid:
    """Smooth lon/lat CO2 mole-fraction field (ppm) covering ``(lon0, lat0, lon1, lat1)``."""
    lon0, lat0, lon1, lat1 = bounds_lonlat
    lon0, lat0 = np.floor(lon0 / cell_deg) * cell_deg, np.floor(lat0 / cell_deg) * cell_deg
    w = max(int(np.ceil((lon1 - lon0) / cell_deg)), 1)
    h = max(int(np.ceil((lat1 - lat0) / cell_deg)), 1)
    yy, xx = np.mgrid[0:h, 0:w]
    phase = rng.uniform(0, 2 * np.pi, size=2)
    field_ = base_ppm + 1.5 * np.sin(0.7 * xx + phase[0]) * np.cos(0.5 * yy + phase[1])
    transform = AffineTransform.from_origin(lon0, lat0 + h * cell_deg, cell_deg, cell_deg)
    return GeoGrid(field_, transform, LONLAT)


@dataclass(frozen=True)
class CorpusParams:
    scenes: int = 40
    val_scenes: int = 8
    scene: SceneParams = field(default_factory=SceneParams)
    population_cell: int = 8
    seed: int = 0
    year: int = 2017


def write_synthetic_corpus(out_dir, cp: CorpusParams) -> Path:
    """Write scenes as GeoTIFF/JSON-lines layers plus a swath manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cp.seed)
    seeds = np.random.SeedSequence(cp.seed).generate_state(cp.scenes)
    swaths = []
    corners = []
    for k in range(cp.scenes):
        params = _with_seed(cp.scene, int(seeds[k]))
        scene = generate_scene(params, index=k)
        sid = f"synth{k:03d}"
        sdir = out / "scenes" / sid
        sdir.mkdir(parents=True, exist_ok=True)
        write_geotiff(sdir / "image.tif", scene.rgb, dtype=np.uint16)
        write_geotiff(sdir / "target.tif", scene.emissions)
        write_geotiff(sdir / "landscan.tif", aggregate_sum(scene.population, cp.population_cell))
        save_road_segments(sdir / "roads.jsonl", scene.mapped_roads)
        day = dt.date(cp.year, 6, 1) + dt.timedelta(days=int(rng.integers(0, 122)))
        split = "validation" if k >= cp.scenes - cp.val_scenes else "train"
        swaths.append({
            "id": sid,
            "date": day.isoformat(),
            "location": f"SY:City{k:03d}",
            "split": split,
            "layers": {
                "image": f"scenes/{sid}/image.tif",
                "target": f"scenes/{sid}/target.tif",
                "landscan": f"scenes/{sid}/landscan.tif",
                "roads": f"scenes/{sid}/roads.jsonl",
                "oco2": "oco2.tif",
                "carbontracker": "carbontracker.tif",
            },
        })
        t = scene.rgb.transform
        for c, r in ((0, 0), (scene.rgb.width, scene.rgb.height)):
            corners.append(utm_to_lonlat(*t.apply(c, r), ZONE))

    lons, lats = zip(*corners)
    bounds = (min(lons) - 0.05, min(lats) - 0.05, max(lons) + 0.05, max(lats) + 0.05)
    write_geotiff(out / "oco2.tif", concentration_field(bounds, 405.0, rng))
    write_geotiff(out / "carbontracker.tif", concentration_field(bounds, 408.0, rng, 0.1))
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"swaths": swaths}, indent=2) + "\n")
    return manifest


def _with_seed(p: SceneParams, seed: int) -> SceneParams:
    return SceneParams(**{**p.__dict__, "seed": seed})
