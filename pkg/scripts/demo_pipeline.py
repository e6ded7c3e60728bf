"""Run the whole CLI pipeline on a small synthetic corpus in a scratch directory.

    python scripts/demo_pipeline.py /tmp/carbonlens-demo
"""

import sys
from pathlib import Path

from carbonlens.cli import main as cli


def step(*argv):
    print("$ carbonlens", " ".join(argv))
    code = cli(list(argv))
    if code:
        sys.exit(code)


def main():
    root = Path(sys.argv[1] if len(sys.argv) > 1 else "carbonlens-demo")
    corpus, store = root / "corpus", root / "store"
    ckpt = root / "model.pt"
    step("synth-gen", "--out", str(corpus), "--scenes", "6", "--val-scenes", "2", "--size", "512")
    step("build-tiles", "--manifest", str(corpus / "manifest.json"), "--store", str(store),
         "--grid-n", "3", "--tile", "256")
    step("train", "--store", str(store), "--checkpoint", str(ckpt),
         "--history", str(root / "history.json"), "--epochs", "3", "--base-width", "8")
    step("eval", "--checkpoint", str(ckpt), "--store", str(store), "--out-dir", str(root / "reports"))
    step("infer", "--checkpoint", str(ckpt), "--manifest", str(corpus / "manifest.json"),
         "--swath", "synth005", "--out", str(root / "synth005_emissions.tif"), "--tile", "256",
         "--stride", "128", "--aggregate", "8", "--png", str(root / "synth005_panels.png"))


if __name__ == "__main__":
    main()
