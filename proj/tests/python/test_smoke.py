import json
import math

import pytest

import citl


def tiny(tmp_path):
    return {
        "data_dir": str(tmp_path / "data"),
        "out_dir": str(tmp_path / "out"),
        "n_maps_seen": 3,
        "n_maps_unseen": 2,
        "grid_seen": 4,
        "grid_unseen": 4,
        "episodes_per_map": 3,
        "dim": 8,
        "train_steps": 6,
        "batch_size": 3,
        "eval_every": 3,
        "ablation_seeds": 2,
        "threads": 1,
    }


def test_circle_loss_hand_case():
    m, gamma = 0.25, 1.0
    lp = -gamma * max(1 + m - 0.6, 0.0) * (0.6 - (1 - m))
    ln = gamma * max(0.4 + m, 0.0) * (0.4 - m)
    expected = math.log1p(math.exp(ln) * math.exp(lp))
    assert citl.circle_loss([0.6], [0.4], margin=m, gamma=gamma) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.7955, abs=5e-4)


def test_info_nce_two_way_tie():
    assert citl.info_nce([0.3], [0.3], temperature=0.5) == pytest.approx(math.log(2.0), abs=1e-12)


def test_pair_mining_drops_false_negatives():
    r = citl.pair_mining([0.9, 0.5], [0.8, 0.3, -0.9], margin=0.25)
    assert r["false_negatives"] == [0]
    assert r["negatives"] == [1]
    assert not r["skipped"]


def test_graph_paths_and_metrics():
    g = citl.NavGraph.from_json(json.dumps({
        "nodes": [{"id": i, "pos": [2.0 * i, 0.0, 0.0], "landmark": 0} for i in range(4)],
        "edges": [[0, 1], [1, 2], [2, 3]],
    }))
    assert len(g) == 4
    assert g.shortest_path(0, 3) == [0, 1, 2, 3]
    report = g.evaluate([0, 1, 2, 3], [0, 1, 2, 3])
    assert report["SR"] == 1.0 and report["SPL"] == 1.0
    assert report["nDTW"] == pytest.approx(1.0)


def test_config_errors_raise():
    with pytest.raises(citl.ConfigError):
        citl.resolve_config({"alpha_p": 1.6})
    with pytest.raises(citl.ConfigError):
        citl.resolve_config({"colour": "red"})
    assert citl.resolve_config()["gamma"] == 32.0


def test_gen_train_eval_roundtrip(tmp_path):
    cfg = tiny(tmp_path)
    out = citl.gen(cfg)
    assert out["graphs"] == 5 and out["episodes"] == 15
    r = citl.train(cfg)
    assert 0.0 <= r["unseen"]["SPL"] <= r["unseen"]["SR"] <= 1.0
    e = citl.evaluate(cfg, "unseen")
    assert e["SR"] == r["unseen"]["SR"]
    with pytest.raises(citl.ConfigError):
        citl.evaluate(cfg, "test")


def test_check_suite_passes():
    assert all(passed for _, passed, _ in citl.check(seed=3))
