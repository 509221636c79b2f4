import json
import math
from pathlib import Path

import pytest

import simuser

DATA = Path(__file__).resolve().parents[2] / "tests" / "data"
SMOKE = DATA / "configs" / "smoke.json"


def test_dataset_and_split():
    ds = simuser.load_dataset(DATA / "ml100" / "ratings.tsv", DATA / "ml100" / "items.tsv")
    assert len(ds["interactions"]) == 100
    user, item, rating, _ = ds["interactions"][0]
    assert user in ds["users"] and 1 <= rating <= 5
    assert any(i["item_id"] == item for i in ds["items"])

    s = simuser.split(DATA / "ml100" / "ratings.tsv")
    assert [len(s[k]) for k in ("train", "validation", "test")] == [80, 10, 10]
    last_train = max(r[3] for r in s["train"])
    assert all(r[3] >= last_train for r in s["test"])


def test_pickiness_thresholds():
    assert simuser.pickiness(3.49) == "extremely_picky"
    assert simuser.pickiness(3.5) == "moderately_picky"
    assert simuser.pickiness(4.5) == "not_picky"


def test_pathsim_by_hand():
    # x and y share genres a and b; x has one more, y three more
    ents = ["item:x", "item:y"] + [f"genre:{g}" for g in "abcdef"]
    trip = [("item:x", "has_genre", "genre:a"), ("item:x", "has_genre", "genre:b"),
            ("item:y", "has_genre", "genre:a"), ("item:y", "has_genre", "genre:b"),
            ("item:x", "has_genre", "genre:c"), ("item:y", "has_genre", "genre:d"),
            ("item:y", "has_genre", "genre:e"), ("item:y", "has_genre", "genre:f")]
    assert simuser.path_count(ents, trip, "item:x", "item:y", 2) == 2
    assert simuser.pathsim(ents, trip, "item:x", "item:y", 2) == pytest.approx(0.5)
    assert simuser.pathsim(ents, trip, "item:y", "item:x", 2) == simuser.pathsim(ents, trip, "item:x", "item:y", 2)
    assert simuser.blend(0.5, 0.25, 1.0) == pytest.approx(0.75 * 0.45 + 0.25)
    with pytest.raises(simuser.SimuserError):
        simuser.pathsim(["item:p", "item:q"], [], "item:p", "item:q")


def test_metrics():
    m = simuser.engagement_metrics([("a", 8, 2, 1, 2, 3.0), ("b", 4, 0, 0, 5, 8.0)])
    assert m["p_view"] == pytest.approx(0.125)
    assert m["n_exit"] == pytest.approx(3.5)
    e = simuser.error_metrics([3, 3], [1, 5])
    assert e["rmse"] == pytest.approx(2.0) and e["mae"] == 2.0
    c = simuser.classification_metrics([True, True, False, False], [True, False, True, False])
    assert c["accuracy"] == 0.5 and c["f1"] == pytest.approx(0.5)
    r = simuser.ranking_metrics(["a", "b", "c"], {"b"}, 10)
    assert r["ndcg"] == pytest.approx(1 / math.log2(3))
    t = simuser.paired_t_test([3.1, 2.4, 5.0, 4.2, 3.3, 2.9], [2.0, 2.5, 4.1, 3.0, 3.4, 1.8])
    assert t["t"] == pytest.approx(2.723666341659426) and t["n"] == 6
    with pytest.raises(simuser.SimuserError):
        simuser.error_metrics([], [])


def test_run_is_deterministic_and_reportable(tmp_path):
    cfg = simuser.load_config(SMOKE)
    assert cfg["agents"] == 10 and cfg["seed"] == 7

    a = simuser.run(SMOKE, output=tmp_path / "a")
    b = simuser.run(SMOKE, output=tmp_path / "b")
    assert a["failed"] == 0 and len(a["agents"]) == 10
    for name in ("config.json", "personas.jsonl", "traces.jsonl", "interviews.jsonl", "metrics.json"):
        assert (tmp_path / "a" / name).is_file()
    for name in ("traces.jsonl", "metrics.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    report = json.loads(simuser.report(tmp_path / "a", "json"))
    assert report["metrics"]["p_view"] == pytest.approx(a["metrics"]["p_view"], abs=1e-12)
    assert "P_view" in simuser.report(tmp_path / "a")


def test_rating_task(tmp_path):
    results = simuser.task(SMOKE, "rating", output=tmp_path / "t")
    assert results[0]["task"] == "rating"
    assert {"rmse", "mae"} <= set(results[0]["aggregates"])
    assert (tmp_path / "t" / "task_results.json").is_file()
    with pytest.raises(simuser.SimuserError, match="unknown task"):
        simuser.task(SMOKE, "nope", output=tmp_path / "t")
