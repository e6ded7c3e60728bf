"""Scene-scale inference, spatial aggregation and metric reports."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import objectives
from .corpus import ChannelConfig, SceneSources, TileTuple, assemble_tile_tuple
from .geogrid import GeoGrid, GridError, Window
from .sampler import TileSpec
from .trainloop import predict, tiles_to_tensors


def tile_origins(size: int, tile: int, stride: int) -> list[int]:
    """Window origins along one axis; the last window is pinned to the far edge."""
    if stride > tile:
        raise ValueError(f"stride {stride} exceeds tile {tile}")
    if size < tile:
        raise ValueError(f"scene side {size} smaller than tile {tile}")
    origins = list(range(0, size - tile + 1, stride))
    if origins[-1] != size - tile:
        origins.append(size - tile)
    return origins


def predict_scene(
    model,
    sources: SceneSources,
    cfg: ChannelConfig,
    tile: int = 1024,
    stride: int = 512,
    jobs: int | None = 1,
) -> GeoGrid:
    """Overlapping-tile inference averaged by overlap count (kg CO2 per pixel per year)."""
    if cfg.n_channels != model.config.in_channels:
        raise ValueError(
            f"channel config yields {cfg.n_channels} channels, model expects {model.config.in_channels}"
        )
    out_stride = model.config.output_stride
    if tile % out_stride or stride % out_stride:
        raise ValueError(f"tile and stride must be multiples of the output stride {out_stride}")
    scene = sources.image
    xs = tile_origins(scene.width, tile, stride)
    ys = tile_origins(scene.height, tile, stride)
    specs = [
        TileSpec(sources.swath_id, Window(x, y, tile, tile), (i, j), (0, 0))
        for j, y in enumerate(ys)
        for i, x in enumerate(xs)
    ]

    h, w = scene.height // out_stride, scene.width // out_stride
    acc = np.zeros((h, w))
    count = np.zeros((h, w))
    ot = tile // out_stride

    def assemble(spec):
        return assemble_tile_tuple(spec, sources, cfg, with_target=False)

    model.eval()
    with ThreadPoolExecutor(max_workers=max(jobs or 1, 1)) as pool:
        for spec, tt in zip(specs, pool.map(assemble, specs)):
            x = torch.from_numpy(np.array(tt.inputs.values))[None]
            with torch.no_grad():
                pred = model(x)[0, 0].numpy().astype(np.float64)
            r0 = spec.window.row_off // out_stride
            c0 = spec.window.col_off // out_stride
            acc[r0 : r0 + ot, c0 : c0 + ot] += pred
            count[r0 : r0 + ot, c0 : c0 + ot] += 1

    transform = scene.transform.scaled(out_stride, out_stride)
    return GeoGrid(acc / count, transform, scene.crs, float("nan"))


def aggregate(grid: GeoGrid, factor: int, mode: str = "sum") -> GeoGrid:
    """Reduce ``factor`` x ``factor`` blocks by compensated sum (or mean) of their valid pixels."""
    if mode not in ("sum", "mean"):
        raise ValueError(f"mode must be 'sum' or 'mean', got {mode!r}")
    if factor < 1 or grid.width % factor or grid.height % factor:
        raise GridError(f"factor {factor} does not divide {grid.width}x{grid.height}")
    if factor == 1:
        return grid.replace()
    c, h, w = grid.channels, grid.height // factor, grid.width // factor
    valid = grid.valid().reshape(c, h, factor, w, factor)
    vals = np.where(valid, grid.values.astype(np.float64).reshape(c, h, factor, w, factor), 0.0)

    # Kahan summation across the factor**2 members of each block
    total = np.zeros((c, h, w))
    comp = np.zeros((c, h, w))
    for i in range(factor):
        for j in range(factor):
            y = vals[:, :, i, :, j] - comp
            t = total + y
            comp = (t - total) - y
            total = t
    n = valid.sum(axis=(2, 4))
    out = total / np.maximum(n, 1) if mode == "mean" else total
    out = np.where(n > 0, out, grid.nodata)
    return GeoGrid(out, grid.transform.scaled(factor, factor), grid.crs, grid.nodata)


@dataclass
class MetricsRow:
    label: str
    rmsle: float
    mae: float
    mape: float


@dataclass
class MetricsReport:
    rows: list[MetricsRow]
    tile_count: int
    pixel_count: int
    global_pixel: dict = field(default_factory=dict)

    def __post_init__(self):
        for r in self.rows:
            for v in (r.rmsle, r.mae, r.mape):
                if not (math.isfinite(v) and v >= 0):
                    raise ValueError(f"row {r.label!r} has an invalid metric value {v}")

    def to_text(self) -> str:
        width = max([len("Method")] + [len(r.label) for r in self.rows])
        lines = [f"{'Method':<{width}}  {'RMSLE':>7}  {'MAE':>9}  {'MAPE':>7}"]
        lines.append("-" * len(lines[0]))
        for r in self.rows:
            lines.append(f"{r.label:<{width}}  {r.rmsle:>7.3f}  {r.mae:>9.1f}  {r.mape:>6.0f}%")
        lines.append(f"({self.tile_count} tiles, {self.pixel_count} valid pixels; "
                     "MAE in kg CO2 per pixel)")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": [asdict(r) for r in self.rows],
            "tile_count": self.tile_count,
            "pixel_count": self.pixel_count,
            "reduction": "tile_mean",
            "global_pixel": self.global_pixel,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir, stem: str = "report") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        txt, js = out / f"{stem}.txt", out / f"{stem}.json"
        txt.write_text(self.to_text())
        js.write_text(self.to_json())
        return txt, js


def evaluate(model, tuples, label: str = "model", batch_size: int = 4) -> MetricsReport:
    """Masked metrics per tile, averaged over tiles; the pooled-pixel variant rides along."""
    tuples = list(tuples)
    if not tuples:
        raise ValueError("evaluate needs at least one tile tuple")
    data = tiles_to_tensors(tuples, model.config.output_stride)
    pred = predict(model, data.inputs, batch_size).numpy()
    return report_from_predictions(pred, data.targets.numpy(), data.masks.numpy(), label)


def report_from_predictions(pred, target, mask, label="model") -> MetricsReport:
    per_tile = {name: [] for name in objectives.METRICS}
    for i in range(len(pred)):
        if not mask[i].any():
            continue
        for name, fn in objectives.METRICS.items():
            per_tile[name].append(fn(pred[i], target[i], mask[i]))
    if not per_tile["rmsle"]:
        raise ValueError("no tile has valid pixels")
    pooled = {name: fn(pred, target, mask) for name, fn in objectives.METRICS.items()}
    row = MetricsRow(label, *(float(np.mean(per_tile[k])) for k in ("rmsle", "mae", "mape")))
    return MetricsReport([row], len(per_tile["rmsle"]), int(np.asarray(mask).sum()), pooled)


def render_panels(tt: TileTuple, prediction: np.ndarray, path) -> Path:
    """Side-by-side PNG: RGB input, road channels, target and prediction."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .corpus import IMAGENET_MEAN, IMAGENET_STD

    chans = tt.meta.get("channels", [])
    panels = []
    offset = 0
    for name in chans:
        width = 3 if name in ("image_rgb", "roads") else 1
        block = tt.inputs.values[offset : offset + width]
        if name == "image_rgb":
            rgb = block * np.asarray(IMAGENET_STD)[:, None, None] + np.asarray(IMAGENET_MEAN)[:, None, None]
            panels.append(("Imagery", np.clip(np.moveaxis(rgb, 0, -1) * 3, 0, 1), None))
        elif name == "roads":
            panels.append(("Roads", np.moveaxis(block, 0, -1), None))
        offset += width
    vmax = None
    if tt.target is not None:
        vmax = float(np.nanmax(tt.target.values)) or None
        panels.append(("Ground truth", tt.target.values[0], "viridis"))
    panels.append(("Predicted", np.asarray(prediction).squeeze(), "viridis"))

    fig, axes = plt.subplots(1, len(panels), figsize=(4 * len(panels), 4))
    for ax, (title, img, cmap) in zip(np.atleast_1d(axes), panels):
        im = ax.imshow(img, cmap=cmap, vmin=0 if cmap else None, vmax=vmax if cmap else None)
        if cmap:
            fig.colorbar(im, ax=ax, fraction=0.046, label="kg CO2 / pixel")
        ax.set_title(title)
        ax.axis("off")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path
