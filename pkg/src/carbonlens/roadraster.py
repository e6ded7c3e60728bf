"""Road vectors: JSON-lines ingestion and 3-channel presence rasterization."""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geogrid import GeoGrid

log = logging.getLogger(__name__)


class RoadClass(enum.Enum):
    PRIMARY = "S1100"
    RAMP = "S1630"
    SECONDARY = "S1200"
    LOCAL = "S1400"

    @property
    def channel(self) -> int:
        return CLASS_CHANNEL[self]


# primary + ramp share red, secondary is green, local is blue
CLASS_CHANNEL = {
    RoadClass.PRIMARY: 0,
    RoadClass.RAMP: 0,
    RoadClass.SECONDARY: 1,
    RoadClass.LOCAL: 2,
}


class RoadFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RoadSegment:
    points: tuple[tuple[float, float], ...]
    cls: RoadClass
    id: str | None = field(default=None, compare=False)

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 2:
            raise ValueError("a road segment needs at least two points")
        for p, q in zip(pts, pts[1:]):
            if p == q:
                raise ValueError(f"consecutive duplicate point {p}")
        object.__setattr__(self, "points", pts)


@dataclass
class RoadLoadResult:
    segments: list[RoadSegment]
    skipped: int = 0

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    def __getitem__(self, i):
        return self.segments[i]


def load_road_segments(path) -> RoadLoadResult:
    """Read one ``{"mtfcc": ..., "coordinates": [[x, y], ...]}`` object per line.

    Classes other than the four used road codes are skipped and counted.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"road file not found: {path}")
    codes = {c.value: c for c in RoadClass}
    segments = []
    skipped = 0
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                code = rec["mtfcc"]
                coords = rec["coordinates"]
                if code not in codes:
                    skipped += 1
                    continue
                segments.append(RoadSegment(tuple(map(tuple, coords)), codes[code], rec.get("id")))
            except (ValueError, KeyError, TypeError) as exc:
                raise RoadFormatError(f"{path}:{lineno}: malformed road record ({exc})") from exc
    if skipped:
        log.info("skipped %d road records with unused MTFCC codes", skipped)
    return RoadLoadResult(segments, skipped)


def save_road_segments(path, segments) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        for seg in segments:
            rec = {"mtfcc": seg.cls.value, "coordinates": [list(p) for p in seg.points]}
            if seg.id is not None:
                rec["id"] = seg.id
            fh.write(json.dumps(rec) + "\n")
    return path


def _leg_pixels(c0, r0, c1, r1, width, height):
    """Pixels hit by a line walk over pixel centres along the major axis.

    Pixel k on the major axis is visited when its centre ``k + 0.5`` lies on the
    leg; legs too short to cover any centre burn the pixel under their midpoint.
    """
    dc, dr = c1 - c0, r1 - r0
    if abs(dc) >= abs(dr):
        lo, hi = sorted((c0, c1))
        ks = np.arange(max(np.ceil(lo - 0.5), -1), min(np.floor(hi - 0.5), width) + 1)
        if ks.size == 0:
            return _midpoint(c0, r0, c1, r1)
        t = (ks + 0.5 - c0) / dc
        return ks.astype(np.int64), np.floor(r0 + t * dr).astype(np.int64)
    lo, hi = sorted((r0, r1))
    ks = np.arange(max(np.ceil(lo - 0.5), -1), min(np.floor(hi - 0.5), height) + 1)
    if ks.size == 0:
        return _midpoint(c0, r0, c1, r1)
    t = (ks + 0.5 - r0) / dr
    return np.floor(c0 + t * dc).astype(np.int64), ks.astype(np.int64)


def _midpoint(c0, r0, c1, r1):
    return (
        np.array([np.floor((c0 + c1) / 2)], dtype=np.int64),
        np.array([np.floor((r0 + r1) / 2)], dtype=np.int64),
    )


def rasterize_roads(segments, ref: GeoGrid) -> GeoGrid:
    """Burn segments 1 pixel wide into a (3, H, W) presence raster on ``ref``'s grid."""
    out = np.zeros((3, ref.height, ref.width), dtype=np.float32)
    inv = ref.transform.inverse()
    for seg in segments:
        pts = np.asarray(seg.points)
        cols, rows = inv.apply(pts[:, 0], pts[:, 1])
        plane = out[seg.cls.channel]
        for i in range(len(pts) - 1):
            cc, rr = _leg_pixels(
                cols[i], rows[i], cols[i + 1], rows[i + 1], ref.width, ref.height
            )
            keep = (cc >= 0) & (cc < ref.width) & (rr >= 0) & (rr < ref.height)
            plane[rr[keep], cc[keep]] = 1.0
    return GeoGrid(out, ref.transform, ref.crs, ref.nodata)
