import json

import numpy as np
import pytest

from carbonlens.cli import main
from carbonlens.geogrid import read_geotiff
from conftest import airport_fixture, city_fixture


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    for cmd in ("partition", "build-tiles", "train", "eval", "infer", "synth-gen"):
        assert main([cmd, "--help"]) == 0
        assert "--seed" in capsys.readouterr().out


def test_usage_errors(tmp_path):
    assert main(["eval"]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["build-tiles", "--store", str(tmp_path)]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("train: {nope: 1}\n")
    assert main(["train", "--config", str(bad)]) == 2


def test_runtime_error_exit_one(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.pt"), "--store", str(tmp_path)]) == 1


def test_partition(tmp_path):
    cities = tmp_path / "cities.csv"
    rows = ["name,state,lat,lon,population"]
    rows += [f"{c.name},{c.state},{c.lat},{c.lon},{c.population}" for c in city_fixture()]
    cities.write_text("\n".join(rows) + "\n")
    airports = tmp_path / "airports.csv"
    airports.write_text("lat,lon\n" + "".join(f"{a},{o}\n" for a, o in airport_fixture()))
    out = tmp_path / "split.json"
    assert main(["partition", "--cities", str(cities), "--airports", str(airports),
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["validation"] and doc["train"]
    assert not set(doc["train"]) & set(doc["validation"])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    manifest = root / "corpus" / "manifest.json"
    store = root / "store"
    assert main(["synth-gen", "--out", str(root / "corpus"), "--scenes", "3", "--val-scenes", "1",
                 "--size", "128", "--road-count", "8", "--seed", "1"]) == 0
    assert main(["build-tiles", "--manifest", str(manifest), "--store", str(store),
                 "--grid-n", "2", "--tile", "64", "--jobs", "2"]) == 0
    ckpt = root / "model.pt"
    assert main(["train", "--store", str(store), "--checkpoint", str(ckpt),
                 "--history", str(root / "hist.json"), "--epochs", "2", "--batch-size", "4",
                 "--base-width", "4", "--encoder-stages", "3"]) == 0
    return root, manifest, store, ckpt


def test_build_tiles_store(pipeline):
    root, _, store, _ = pipeline
    summary = json.loads((store / "build_summary.json").read_text())
    assert summary["inspected"] == 12
    assert summary["kept"] + sum(summary["dropped"].values()) == 12
    assert summary["per_split"]["train"] == len(list((store / "train").glob("*/meta.json")))
    monitor = json.loads((store / "validation" / "monitor.json").read_text())
    assert sorted(monitor["monitor"] + monitor["test"]) == sorted(
        p.parent.name for p in (store / "validation").glob("*/meta.json"))


def test_train_outputs(pipeline):
    root, *_ = pipeline
    hist = json.loads((root / "hist.json").read_text())
    assert [r["epoch"] for r in hist] == [1, 2]


def test_eval(pipeline, capsys):
    root, _, store, ckpt = pipeline
    out = root / "reports"
    assert main(["eval", "--checkpoint", str(ckpt), "--store", str(store),
                 "--out-dir", str(out), "--split", "monitor"]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["rows"][0]["label"] == "MA-Net" and doc["rows"][0]["rmsle"] >= 0
    assert "RMSLE" in capsys.readouterr().out


def test_infer(pipeline):
    root, manifest, _, ckpt = pipeline
    out = root / "map.tif"
    assert main(["infer", "--checkpoint", str(ckpt), "--manifest", str(manifest),
                 "--swath", "synth002", "--out", str(out), "--tile", "64", "--stride", "32",
                 "--aggregate", "8", "--png", str(root / "p.png")]) == 0
    emap = read_geotiff(out)
    image = read_geotiff(root / "corpus" / "scenes" / "synth002" / "image.tif")
    assert emap.shape == (1, 128, 128) and emap.transform == image.transform
    agg = read_geotiff(out.with_suffix(".x8.tif"))
    assert agg.values.sum(dtype=np.float64) == pytest.approx(
        emap.values.sum(dtype=np.float64), rel=1e-6)
    assert (root / "p.png").exists()
    assert main(["infer", "--checkpoint", str(ckpt), "--manifest", str(manifest),
                 "--swath", "nope", "--out", str(out)]) == 2
