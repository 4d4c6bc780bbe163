import json
import os
from pathlib import Path

import pytest

import npmtune

DATA = Path(os.environ.get("NPMTUNE_TEST_DATA", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture
def registry():
    return npmtune.load_registry_file(str(DATA / "mock.registry"))


@pytest.fixture
def backend():
    b = npmtune.MockBackend()
    b.add_file(str(DATA / "m1" / "M1.json"))
    b.add_file(str(DATA / "m2" / "M2.json"))
    return b


def test_registry_lookup():
    reg = npmtune.default_registry()
    assert reg.level("gvn") == "function"
    assert "globalopt" in reg
    assert len(npmtune.load_registry("a=function\nb=loop\n")) == 2
    with pytest.raises(npmtune.NpmtuneError):
        reg.level("no-such-pass")


def test_format_and_validate():
    reg = npmtune.default_registry()
    assert npmtune.format_pipeline(" module( globalopt ,function(gvn))", reg) == "module(globalopt,function(gvn))"
    ok, _ = npmtune.validate_pipeline("module(globalopt)", reg)
    assert ok
    ok, message = npmtune.validate_pipeline("loop(licm)", reg)
    assert not ok and "R1" in message
    assert npmtune.leaf_sequence("module(function(gvn,loop(licm)))", reg) == [
        ("gvn", "function"),
        ("licm", "loop"),
    ]


def test_mock_counts(registry, backend):
    m1 = str(DATA / "m1" / "M1.json")
    m2 = str(DATA / "m2" / "M2.json")
    assert backend.original_count(m1) == 100
    assert backend.evaluate(m1, "module(function(a,b))", registry) == 82
    assert backend.evaluate(m1, "module(function(b,a))", registry) == 85
    assert backend.evaluate(m2, "module(function(a,b))", registry) == 80
    assert backend.evaluate(m2, "module(function(a),function(b))", registry) == 73


def test_schedule(registry):
    mock = json.dumps({"functions": [{"name": "f", "base_ic": 5}, {"name": "g", "base_ic": 5}]})
    assert npmtune.schedule("module(function(a,b))", registry, mock) == [
        ("a", "f"), ("b", "f"), ("a", "g"), ("b", "g"),
    ]


def test_mine_search_refine(registry, backend):
    m1 = str(DATA / "m1" / "M1.json")
    graph = json.loads(npmtune.mine([m1], registry, backend))
    assert [(e["from"], e["to"]) for e in graph["edges"]] == [("a", "b")]
    result = npmtune.search(m1, json.dumps(graph), registry, backend,
                            population=8, generations=5, max_length=3, seed=1)
    assert result["best_fitness"] >= 18
    assert result["log"].count("\n") == 6
    report = npmtune.refine(str(DATA / "m2" / "M2.json"), "module(function(a,b))", registry, backend)
    assert report["refined_ic"] == 73


def test_metrics():
    assert npmtune.overoz(450, 372) == pytest.approx(17.3333333333)
    with pytest.raises(npmtune.NpmtuneError):
        npmtune.overoz(0, 1)
    report = npmtune.aggregate([
        {"program": "a", "group": "x", "ic_oz": 100, "ic_tuned": 90},
        {"program": "b", "group": "y", "ic_oz": 100, "ic_tuned": 70},
    ])
    assert report["mean_of_group_means"] == pytest.approx(20.0)
