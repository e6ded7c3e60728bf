"""Command-line entry point: ``carbonlens <subcommand> ...``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import corpus, mapmaker, synthgen
from .config import STORE_ENV, ConfigError, config_to_dict, load_config
from .geogrid import GridError, Window, write_geotiff
from .netzoo import build_model, load_checkpoint, save_checkpoint
from .roadraster import RoadFormatError
from .sampler import (
    FilterDecision,
    TileSpec,
    filter_tile_tuple,
    systematic_unaligned_tiles,
    temporal_select,
)
from .trainloop import history_to_json, train

log = logging.getLogger("carbonlens")

SPLITS = ("train", "validation")
MONITOR_FILE = "monitor.json"


class UsageError(Exception):
    pass


def _config(args, **overrides):
    return load_config(getattr(args, "config", None), overrides)


def cmd_partition(args) -> int:
    cities = corpus.load_cities(args.cities)
    airports = corpus.load_airports(args.airports)
    val = corpus.assign_validation_cities(cities, airports)
    train_cities = corpus.build_train_split(
        cities, val, radius_km=args.radius_km, rng=np.random.default_rng(args.seed)
    )
    corpus.write_split_manifest(args.out, train_cities, val)
    print(f"validation cities: {len(val)}; training cities: {len(train_cities)} -> {args.out}")
    return 0


def _swath_split(entry, splits):
    if entry.split is not None:
        return entry.split
    if splits is None:
        return None
    for name in SPLITS:
        if entry.location in splits.get(name, ()):
            return name
    return None


def cmd_build_tiles(args) -> int:
    cfg = _config(
        args,
        sources={"manifest": args.manifest, "splits": args.splits},
        sampler={"grid_n": args.grid_n, "tile": args.tile},
        output={"store": args.store},
    )
    if cfg.sources.manifest is None:
        raise UsageError("build-tiles needs --manifest (or sources.manifest in --config)")
    entries, base = corpus.load_manifest(cfg.sources.manifest)
    splits = json.loads(Path(cfg.sources.splits).read_text()) if cfg.sources.splits else None
    store = cfg.store_root

    by_location = defaultdict(list)
    for e in entries:
        by_location[e.location].append(e)
    selected = []
    for loc in sorted(by_location):
        group = {e.id: e for e in by_location[loc]}
        for sid in temporal_select([(e.id, e.date) for e in by_location[loc]], cfg.sampler):
            selected.append(group[sid])

    counts = Counter()
    kept_by_split = defaultdict(list)
    for k, entry in enumerate(selected):
        split = _swath_split(entry, splits)
        if split not in SPLITS:
            log.info("swath %s (%s) is in no split; skipped", entry.id, entry.location)
            continue
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, k]))
        try:
            src = corpus.load_sources(entry, base, cfg.channels)
        except (OSError, GridError, RoadFormatError, corpus.CorpusError) as exc:
            log.warning("swath %s unreadable: %s", entry.id, exc)
            counts["inspected"] += cfg.sampler.grid_n**2
            counts[FilterDecision.READ_ERROR.value] += cfg.sampler.grid_n**2
            continue
        specs = systematic_unaligned_tiles(
            src.image.width, src.image.height, cfg.sampler, rng, entry.id
        )

        def work(spec, src=src):
            try:
                t = corpus.assemble_tile_tuple(spec, src, cfg.channels)
            except (OSError, GridError) as exc:
                log.warning("tile %s read error: %s", spec.window, exc)
                return None, filter_tile_tuple(0.0, 0.0, read_error=True)
            decision = filter_tile_tuple(
                t.meta["image_empty_fraction"], t.meta["target_invalid_fraction"]
            )
            return t, decision

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(work, specs))
        for t, decision in results:
            counts["inspected"] += 1
            if decision.keep:
                t.meta["split"] = split
                corpus.save_tuple(t, store / split)
                kept_by_split[split].append(t.tuple_id)
                counts["kept"] += 1
            else:
                counts[decision.value] += 1

    val_ids = sorted(kept_by_split["validation"])
    monitor, test = corpus.split_monitor(val_ids, cfg.train.monitor_subset_size, args.seed)
    (store / "validation").mkdir(parents=True, exist_ok=True)
    (store / "validation" / MONITOR_FILE).write_text(
        json.dumps({"monitor": sorted(monitor), "test": sorted(test)}, indent=2) + "\n"
    )
    summary = {
        "inspected": counts["inspected"],
        "kept": counts["kept"],
        "dropped": {d.value: counts[d.value] for d in FilterDecision if not d.keep},
        "per_split": {s: len(kept_by_split[s]) for s in SPLITS},
    }
    store.mkdir(parents=True, exist_ok=True)
    (store / "build_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"inspected {summary['inspected']} tiles, kept {summary['kept']}")
    for reason, n in summary["dropped"].items():
        print(f"  dropped {reason}: {n}")
    for s in SPLITS:
        print(f"  {s}: {summary['per_split'][s]} tiles")
    print(f"store: {store}")
    return 0


def _load_split(store: Path, split: str):
    if split in SPLITS:
        return corpus.load_tuples(store / split)
    monitor_file = store / "validation" / MONITOR_FILE
    if not monitor_file.exists():
        raise FileNotFoundError(f"{monitor_file} missing; run build-tiles first")
    ids = json.loads(monitor_file.read_text())[split]
    if split == "test" and not ids:
        ids = json.loads(monitor_file.read_text())["monitor"]
    return [corpus.load_tuple(store / "validation" / i) for i in ids]


def cmd_train(args) -> int:
    cfg = _config(
        args,
        train={"epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed},
        model={"seed": args.seed, "kind": args.model, "base_width": args.base_width,
               "encoder_stages": args.encoder_stages},
        output={"store": args.store, "checkpoint": args.checkpoint, "history": args.history},
    )
    store = cfg.store_root
    train_tiles = _load_split(store, "train")
    monitor_tiles = _load_split(store, "monitor")
    if not train_tiles:
        raise RuntimeError(f"no training tiles under {store / 'train'}")
    stored = train_tiles[0].meta.get("channels")
    if stored and tuple(stored) != cfg.channels.channels:
        raise ConfigError(
            f"tuple store holds channels {stored}, config asks for {list(cfg.channels.channels)}"
        )
    model = build_model(cfg.model)
    model, history = train(model, train_tiles, monitor_tiles, cfg.train)
    hist = history_to_json(history)
    save_checkpoint(cfg.output.checkpoint, model, hist,
                    {"run_config": config_to_dict(cfg)})
    Path(cfg.output.history).write_text(json.dumps(hist, indent=2) + "\n")
    best = min(hist, key=lambda r: (r["val_rmsle"], r["epoch"]))
    print(f"best epoch {best['epoch']}: monitor RMSLE {best['val_rmsle']:.4f}")
    print(f"checkpoint: {cfg.output.checkpoint}")
    return 0


def cmd_eval(args) -> int:
    store = Path(args.store or os.environ.get(STORE_ENV) or "carbonlens-store")
    model, _ = load_checkpoint(args.checkpoint)
    tuples = _load_split(store, args.split)
    report = mapmaker.evaluate(model, tuples, label=args.label)
    txt, js = report.write(args.out_dir, args.stem)
    sys.stdout.write(report.to_text())
    print(f"report: {txt}, {js}")
    return 0


def cmd_infer(args) -> int:
    model, payload = load_checkpoint(args.checkpoint)
    run_cfg = payload.get("extra", {}).get("run_config", {})
    channels = corpus.ChannelConfig(tuple(args.channels or run_cfg.get("channels") or
                                          corpus.ChannelConfig().channels))
    entries, base = corpus.load_manifest(args.manifest)
    matches = [e for e in entries if e.id == args.swath] if args.swath else entries[:1]
    if not matches:
        raise UsageError(f"swath {args.swath!r} not found in {args.manifest}")
    src = corpus.load_sources(matches[0], base, channels, with_target=False)
    emap = mapmaker.predict_scene(model, src, channels, args.tile, args.stride, args.jobs)
    write_geotiff(args.out, emap)
    print(f"emissions map: {args.out} ({emap.width}x{emap.height}, total {np.nansum(emap.values):.1f} kg)")
    if args.aggregate:
        agg = mapmaker.aggregate(emap, args.aggregate)
        agg_path = Path(args.out).with_suffix(f".x{args.aggregate}.tif")
        write_geotiff(agg_path, agg)
        print(f"aggregated map: {agg_path}")
    if args.png:
        spec = TileSpec(src.swath_id, Window(0, 0, args.tile, args.tile), (0, 0), (0, 0))
        full = corpus.load_sources(matches[0], base, channels, with_target="target" in matches[0].layers)
        tt = corpus.assemble_tile_tuple(spec, full, channels, with_target=full.target is not None)
        s = model.config.output_stride
        mapmaker.render_panels(tt, emap.values[0, : args.tile // s, : args.tile // s], args.png)
        print(f"panels: {args.png}")
    return 0


def cmd_synth_gen(args) -> int:
    scene = synthgen.SceneParams(size=args.size, road_count=args.road_count,
                                 blur_radius=args.blur_radius, seed=args.seed)
    cp = synthgen.CorpusParams(scenes=args.scenes, val_scenes=args.val_scenes, scene=scene,
                               seed=args.seed)
    manifest = synthgen.write_synthetic_corpus(args.out, cp)
    print(f"synthetic corpus: {args.scenes} scenes -> {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="carbonlens", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=0, help="seed for all randomness")
        sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="parallel tile workers (default: cores)")
        if config:
            sp.add_argument("--config", help="YAML run configuration")

    sp = sub.add_parser("partition", help="cities + airports -> split manifest")
    sp.add_argument("--cities", required=True)
    sp.add_argument("--airports", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--radius-km", type=float, default=120.0)
    common(sp, config=False)
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("build-tiles", help="swath manifest -> tile tuple store")
    sp.add_argument("--manifest")
    sp.add_argument("--splits", help="split manifest from `partition`")
    sp.add_argument("--store", help="tuple store root (default $CARBONLENS_CACHE)")
    sp.add_argument("--grid-n", type=int)
    sp.add_argument("--tile", type=int)
    common(sp)
    sp.set_defaults(func=cmd_build_tiles)

    sp = sub.add_parser("train", help="tuple store -> checkpoint + history")
    sp.add_argument("--store")
    sp.add_argument("--checkpoint")
    sp.add_argument("--history")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--batch-size", type=int)
    sp.add_argument("--model", choices=["UNet", "ReducedUNet", "MANet"])
    sp.add_argument("--base-width", type=int)
    sp.add_argument("--encoder-stages", type=int)
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="checkpoint + tuple store -> metrics report")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--store")
    sp.add_argument("--split", default="test", choices=["test", "monitor", "validation", "train"])
    sp.add_argument("--out-dir", default="reports")
    sp.add_argument("--stem", default="report")
    sp.add_argument("--label", default="MA-Net")
    common(sp, config=False)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("infer", help="checkpoint + scene -> emissions GeoTIFF")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--swath", help="swath id (default: first in manifest)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--tile", type=int, default=1024)
    sp.add_argument("--stride", type=int, default=512)
    sp.add_argument("--channels", nargs="+")
    sp.add_argument("--aggregate", type=int, help="also write a block-summed map")
    sp.add_argument("--png", help="write input/target/prediction panels for the first tile")
    common(sp, config=False)
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("synth-gen", help="write a synthetic corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--scenes", type=int, default=10)
    sp.add_argument("--val-scenes", type=int, default=2)
    sp.add_argument("--size", type=int, default=512)
    sp.add_argument("--road-count", type=int, default=24)
    sp.add_argument("--blur-radius", type=float, default=4.0)
    common(sp, config=False)
    sp.set_defaults(func=cmd_synth_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"carbonlens {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        log.debug("failure", exc_info=True)
        print(f"carbonlens {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


run = main

if __name__ == "__main__":
    sys.exit(main())
