import json
from pathlib import Path

import numpy as np
import pytest

import crisisfilter as cf

DATA = Path(__file__).resolve().parent.parent / "data"


def test_golden_hash():
    img = cf.read_image(DATA / "golden.pgm")
    assert img.dtype == np.uint8 and img.ndim == 2
    h = cf.phash(img)
    assert cf.to_hex(h) == "5af1e7ad090b56c4"
    assert cf.phash_file(DATA / "golden.pgm") == h
    assert bin(h).count("1") == 32


def test_encode_decode_round_trip():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(20, 30, 3), dtype=np.uint8)
    back = cf.decode_image(cf.encode_image(img))
    assert np.array_equal(back, img)
    with pytest.raises(ValueError):
        cf.decode_image(b"P5\n4 4\n65535\n")


def test_features_shape():
    img = np.full((32, 32, 3), 128, dtype=np.uint8)
    assert cf.extract_features(img).shape == (112,)


def test_window(tmp_path):
    w = cf.HashWindow(threshold=10, capacity=2, engine="bktree")
    assert w.check_and_insert(0x00000000FFFFFFFF, "a")["duplicate"] is False
    r = w.check_and_insert(0x00000001FFFFFFFE, "b")
    assert r == {"duplicate": True, "matched_id": "a", "distance": 2}
    w.check_and_insert(0xFFFFFFFF00000000, "c")
    w.check_and_insert(0xFFFF0000FFFF0000, "d")
    assert len(w) == 2
    assert [i for _, i in w.entries()] == ["c", "d"]
    w.save(tmp_path / "w.bin")
    again = cf.HashWindow.load(tmp_path / "w.bin")
    assert again.entries() == w.entries() and again.capacity == 2
    assert cf.hamming(0, 0xFF) == 8


def test_train_predict_evaluate(tmp_path):
    rng = np.random.default_rng(1)
    x = np.vstack([rng.normal(-1, 0.3, (50, 4)), rng.normal(1, 0.3, (50, 4))])
    y = [0] * 50 + [1] * 50
    model = cf.train(x, y, ["neg", "pos"], epochs=200)
    pred = [model.predict(row) for row in x]
    scores = np.array([model.score(row) for row in x])
    rep = cf.evaluate(y, pred, ["neg", "pos"], scores)
    assert rep["macro"]["f1"] > 0.95
    model.save(tmp_path / "m.bin")
    assert cf.Model.load(tmp_path / "m.bin") == model


def test_metrics():
    assert cf.auc_pr([1, 0, 1], [0.9, 0.8, 0.7]) == pytest.approx(5 / 6, abs=1e-12)
    res = cf.permutation_test([0, 1, 1], [0, 1, 0], [0, 1, 1], [0, 1, 0], ["a", "b"], 100, 7)
    assert res["observed_diff"] == 0.0 and res["p_value"] == 1.0
    t = cf.tune_threshold([0, 2, 30, 40], [True, True, False, False], 0, 20)
    assert t["best_d"] == 2 and len(t["curve"]) == 21


def test_corpus_pipeline_and_cli(tmp_path):
    spec = {"seed": 5, "n_severe": 20, "n_mild": 10, "n_none": 20, "n_irrelevant": 0, "duplicate_rate": 0.3}
    info = cf.generate_corpus(spec, tmp_path / "c")
    assert info["violations"] == 0
    res = cf.run_pipeline(tmp_path / "c" / "manifest.jsonl")
    assert len(res["outcomes"]) == info["records"]
    assert res["report"]["total"]["after_dedup"] == len(res["kept"])

    status, out, err = cf.cli(["hash", str(DATA / "golden.pgm")])
    assert (status, out, err) == (0, "5af1e7ad090b56c4\n", "")
    status, out, _ = cf.cli(["pipeline", "run", "--input", str(tmp_path / "c" / "manifest.jsonl")])
    assert status == 0 and json.loads(out) == res["report"]
    assert cf.cli(["nope"])[0] == 1
