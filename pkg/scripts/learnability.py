"""Desk-scale learnability: MA-Net on synthetic tiles vs the best constant predictor.

Trains once with imagery + roads and once with roads only on the same tiles and
seed, then prints both best monitor RMSLEs next to the constant baseline.

    python scripts/learnability.py --epochs 12 --out learnability.json
"""

import argparse
import json
import logging
import time

import torch

from carbonlens.experiments import DeskCorpusConfig, run_learnability
from carbonlens.trainloop import TrainConfig, history_to_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--batch-size", type=int, default=4)
    ap.add_argument("--base-width", type=int, default=8)
    ap.add_argument("--seed", type=int, default=7, help="corpus seed")
    ap.add_argument("--model-seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", help="write results as JSON")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    torch.set_num_threads(args.threads)

    corpus = DeskCorpusConfig(seed=args.seed)
    train_cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size, seed=args.model_seed)
    results = {}
    for channels in [("image_rgb", "roads"), ("roads",)]:
        t0 = time.perf_counter()
        res = run_learnability(channels, corpus, train_cfg, base_width=args.base_width,
                               model_seed=args.model_seed)
        name = "+".join(channels)
        results[name] = {
            "parameters": res.parameters,
            "best_rmsle": res.best_rmsle,
            "baseline_rmsle": res.baseline_rmsle,
            "ratio": res.ratio,
            "seconds": time.perf_counter() - t0,
            "history": history_to_json(res.history),
        }
        print(f"{name:>16}: best RMSLE {res.best_rmsle:.4f}  constant {res.baseline_rmsle:.4f}  "
              f"ratio {res.ratio:.3f}  ({res.parameters} params)")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
