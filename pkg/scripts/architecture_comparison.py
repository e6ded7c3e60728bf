"""UNet vs ReducedUNet vs MA-Net on the synthetic desk corpus (image + roads).

ReducedUNet predicts 8x8-pixel block totals, so its MAE is on a coarser grid
and not directly comparable with the full-resolution models.

    python scripts/architecture_comparison.py --epochs 8
"""

import argparse

import torch

from carbonlens.corpus import ChannelConfig
from carbonlens.experiments import DeskCorpusConfig, build_desk_tiles
from carbonlens.mapmaker import MetricsReport, evaluate
from carbonlens.netzoo import ModelConfig, ModelKind, build_model, count_parameters
from carbonlens.trainloop import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--base-width", type=int, default=8)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--report-dir", default="reports")
    args = ap.parse_args()
    torch.set_num_threads(1)

    ch = ChannelConfig(("image_rgb", "roads"))
    train_tiles, val_tiles = build_desk_tiles(DeskCorpusConfig(seed=args.seed), ch)
    rows = []
    for kind in ModelKind:
        model = build_model(ModelConfig(kind, ch.n_channels, base_width=args.base_width))
        model, _ = train(model, train_tiles, val_tiles, TrainConfig(epochs=args.epochs))
        rep = evaluate(model, val_tiles, label=kind.value)
        rows += rep.rows
        print(f"{kind.value}: {count_parameters(model)} params, RMSLE {rep.rows[0].rmsle:.3f}")
    report = MetricsReport(rows, rep.tile_count, rep.pixel_count)
    print(report.to_text())
    report.write(args.report_dir, "architectures")


if __name__ == "__main__":
    main()
