import json
import math

import numpy as np
import pytest

import csl


def unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def test_topk_matches_numpy():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = unit_rows(rng, rng.integers(1, 10), 8)
        b = unit_rows(rng, rng.integers(1, 10), 8)
        k = int(rng.integers(1, 6))
        maxima = np.sort((a @ b.T).max(axis=1))[::-1]
        assert csl.topk_cs(a, b, k) == pytest.approx(maxima[:k].mean(), abs=1e-12)


def test_large_k_is_chamfer():
    rng = np.random.default_rng(1)
    a, b = unit_rows(rng, 5, 4), unit_rows(rng, 7, 4)
    assert csl.topk_cs(a, b, 5) == csl.chamfer(a, b)
    assert csl.topk_cs(a, b, 50) == csl.chamfer(a, b)


def test_dot_count():
    rng = np.random.default_rng(2)
    assert csl.dot_count(unit_rows(rng, 3, 4), unit_rows(rng, 5, 4)) == 15


def test_clip_boundaries_pad_the_tail():
    assert csl.clip_boundaries(20) == [(0, 8), (8, 16), (16, 20)]
    with pytest.raises(csl.ContractError):
        csl.clip_boundaries(0)


def test_average_precision():
    assert csl.average_precision(["a", "b", "c"], {"a", "c"}) == pytest.approx(5 / 6)


def test_store_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    videos = {"v1": unit_rows(rng, 3, 16).astype(np.float32), "v0": unit_rows(rng, 1, 16).astype(np.float32)}
    path = tmp_path / "s.csf"
    csl.write_store(videos, path)
    back = csl.read_store(path)
    assert sorted(back) == ["v0", "v1"]
    for k in videos:
        np.testing.assert_array_equal(back[k], videos[k])
    data = csl.encode_store(videos)
    assert data == path.read_bytes()
    with pytest.raises(csl.FormatError):
        csl.decode_store(data[:-3])


def test_rank_and_evaluate():
    rng = np.random.default_rng(4)
    q = unit_rows(rng, 4, 8).astype(np.float32)
    near = q + 0.01 * rng.normal(size=q.shape)
    near = (near / np.linalg.norm(near, axis=1, keepdims=True)).astype(np.float32)
    videos = {"q": q, "near": near, "far": unit_rows(rng, 4, 8).astype(np.float32)}
    ranked = csl.rank_query("q", videos)
    assert ranked[0][0] == "near"
    ann = json.dumps({"queries": {"q": {"near": "ND"}}})
    m, per_query = csl.evaluate(videos, ann, "DSVR")
    assert m == 1.0 and per_query == {"q": 1.0}


def test_tube_mask_counts():
    mask = csl.tube_mask(16, 0.9, 5)
    assert len(mask) == 16 and sum(mask) == 14
    assert mask == csl.tube_mask(16, 0.9, 5)


def test_shotmix_overlap():
    for seed in range(100):
        s = csl.shotmix_sample(40, 8, seed)
        assert 0.7 < s["overlap_ratio"] < 1.0
        assert s["overlap"] == math.ceil(s["overlap_ratio"] * 8)
        assert abs(s["anchor_start"] - s["positive_start"]) == 8 - s["overlap"]
        assert s["cut_length"] <= math.floor((1 - s["overlap_ratio"]) * 8)


def test_losses():
    sims = np.array([[1.0, 0.5, 0.5]])
    value, grad = csl.ms_loss(sims, [[".", "+", "-"]], epsilon=-0.1)
    half = math.log(1 + math.exp(-2 * (0.5 - 1))) / 2 + math.log(1 + math.exp(50 * (0.5 - 1))) / 50
    assert value == pytest.approx(half, rel=1e-12)
    assert grad.shape == (1, 3) and grad[0, 0] == 0.0
    x = np.eye(2)
    assert csl.fcs_loss(x, x, x) == pytest.approx(0.1)
    with pytest.raises(csl.ConfigError):
        csl.ms_loss(sims, [[".", "+", "-"]], alpha=-1.0)
