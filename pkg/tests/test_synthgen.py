import json

import numpy as np
import pytest

from carbonlens.corpus import load_manifest
from carbonlens.geogrid import read_geotiff
from carbonlens.roadraster import RoadClass, load_road_segments, rasterize_roads
from carbonlens.synthgen import (
    CorpusParams,
    SceneParams,
    aggregate_sum,
    blur_matrix,
    gaussian_blur,
    generate_scene,
    write_synthetic_corpus,
)


def test_blur_matrix_column_stochastic():
    m = blur_matrix(40, 2.5).toarray()
    np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-12)
    assert (m >= 0).all()
    # truncated at 3 sigma
    assert m[0, 9] == 0 and m[0, 8] > 0


def test_blur_conserves_mass(rng):
    a = rng.exponential(size=(37, 53))
    assert gaussian_blur(a, 3.0).sum() == pytest.approx(a.sum(), rel=1e-12)
    assert np.array_equal(gaussian_blur(a, 0), a)


def test_zero_roads_zero_emissions():
    s = generate_scene(SceneParams(size=64, road_count=0))
    assert not s.emissions.values.any() and not s.population.values.any()
    assert s.roads == ()


def test_deterministic_per_seed():
    p = SceneParams(size=64, seed=9)
    a, b = generate_scene(p), generate_scene(p)
    assert a.rgb == b.rgb and a.emissions == b.emissions and a.roads == b.roads
    assert generate_scene(SceneParams(size=64, seed=10)).emissions != a.emissions


def test_emission_total_matches_road_law():
    p = SceneParams(size=128, seed=3, road_count=10)
    s = generate_scene(p)
    presence = rasterize_roads(s.roads, s.emissions).values.astype(np.float64)
    want = float(np.tensordot(p.emission_factor_per_class, presence, axes=1).sum())
    assert s.emissions.values.sum(dtype=np.float64) == pytest.approx(want, rel=1e-5)


def test_unmapped_roads_are_local_and_still_emit():
    p = SceneParams(size=128, seed=1, road_count=30, unmapped_fraction=1.0)
    s = generate_scene(p)
    assert s.unmapped and all(r.cls is RoadClass.LOCAL for r in s.roads if r.id in s.unmapped)
    assert len(s.mapped_roads) == len(s.roads) - len(s.unmapped)
    mapped = rasterize_roads(s.mapped_roads, s.emissions).values[2]
    everything = rasterize_roads(s.roads, s.emissions).values[2]
    assert everything.sum() > mapped.sum()


def test_blank_fraction_zeroes_image():
    s = generate_scene(SceneParams(size=64, blank_fraction=0.25))
    assert not s.rgb.values[:, :, :16].any() and s.rgb.values[:, :, 16:].all()


def test_scene_params_validation():
    with pytest.raises(ValueError):
        SceneParams(size=50)
    with pytest.raises(ValueError):
        SceneParams(noise_level=-1)


def test_aggregate_sum(rng):
    g = generate_scene(SceneParams(size=64)).emissions
    agg = aggregate_sum(g, 8)
    assert agg.shape == (1, 8, 8)
    assert agg.values.sum(dtype=np.float64) == pytest.approx(g.values.sum(dtype=np.float64), rel=1e-6)
    assert agg.transform.apply(8, 8) == g.transform.apply(64, 64)


def test_corpus_on_disk(tmp_path):
    cp = CorpusParams(scenes=3, val_scenes=1, scene=SceneParams(size=64, road_count=6))
    manifest = write_synthetic_corpus(tmp_path, cp)
    entries, base = load_manifest(manifest)
    assert [e.split for e in entries] == ["train", "train", "validation"]
    e = entries[0]
    img = read_geotiff(base / e.layers["image"])
    tgt = read_geotiff(base / e.layers["target"])
    assert img.shape == (3, 64, 64) and tgt.transform == img.transform
    assert read_geotiff(base / e.layers["landscan"]).shape == (1, 8, 8)
    oco2 = read_geotiff(base / e.layers["oco2"])
    assert oco2.crs == "EPSG:4326" and np.all(np.abs(oco2.values - 405) < 2)
    load_road_segments(base / e.layers["roads"])
    assert json.loads(manifest.read_text())["swaths"][0]["date"].startswith("2017-")
