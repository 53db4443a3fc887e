from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from uqxai.cli import main
from uqxai.config import ConfigError, config_hash, derive_seed, load_config
from uqxai.dataset import make_toy_moons, write_csv

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


def test_defaults_and_overrides(tmp_path):
    cfg = load_config(overrides=["runs=3", "model.knn_k=9", "uncertainty.strategies=[belief]"])
    assert cfg["runs"] == 3 and cfg["model"]["knn_k"] == 9 and cfg["uncertainty"]["strategies"] == ["belief"]
    with pytest.raises(ConfigError, match="unknown"):
        load_config(overrides=["model.nope=1"])
    with pytest.raises(ConfigError):
        load_config(overrides=["runs"])
    with pytest.raises(ConfigError, match="exact_max_features"):
        load_config(overrides=["explanation.exact_max_features=13"])
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("split: {stratified: maybe}\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_dataset_paths_resolve_against_base(tmp_path):
    cfg = load_config(overrides=['datasets=[{path: data/iris.csv}]'], base_dir=ROOT)
    (entry,) = cfg["datasets"]
    assert entry["name"] == "iris" and Path(entry["path"]) == DATA / "iris.csv"


def test_hash_ignores_output_location():
    a = load_config(overrides=["output_dir=x", "workers=4"])
    b = load_config(overrides=["output_dir=y"])
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(load_config(overrides=["seed=1"]))


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(1, 0, "iris") == derive_seed(1, 0, "iris")
    seeds = {derive_seed(1, r, n) for r in range(50) for n in ("iris", "wine")}
    assert len(seeds) == 100 and all(0 <= s < 2**63 for s in seeds)


def _snapshot(out: Path) -> dict:
    keep = ("tables", "curves", "raw", "dossiers")
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file() and p.relative_to(out).parts[0] in keep}


CF_ARGS = ["--dataset", str(DATA / "iris.csv"), "--dataset", str(DATA / "wine.csv"), "--runs", "2", "--seed", "5"]


def test_correlate_cf_is_byte_deterministic(tmp_path, capsys):
    assert main(["correlate-cf", *CF_ARGS, "-o", str(tmp_path / "a")]) == 0
    assert main(["correlate-cf", *CF_ARGS, "-o", str(tmp_path / "b"), "--workers", "2"]) == 0
    a, b = _snapshot(tmp_path / "a"), _snapshot(tmp_path / "b")
    assert a and a == b
    rows = list(csv.DictReader((tmp_path / "a" / "tables" / "correlate_cf.csv").open()))
    assert {r["dataset"] for r in rows} == {"iris", "wine"}
    assert all(r["status"] == "ok" for r in rows)
    assert "iris" in capsys.readouterr().out


def test_correlate_shap_is_byte_deterministic(tmp_path):
    args = ["--dataset", str(DATA / "iris.csv"), "--runs", "1", "--set", "explanation.background_rows=20"]
    assert main(["correlate-shap", *args, "-o", str(tmp_path / "a")]) == 0
    assert main(["correlate-shap", *args, "-o", str(tmp_path / "b")]) == 0
    assert _snapshot(tmp_path / "a") == _snapshot(tmp_path / "b")


def test_reject_demo_and_toy_are_byte_deterministic(tmp_path, capsys):
    args = ["-c", str(ROOT / "configs" / "glass_reject.yaml"), "--dataset", str(DATA / "glass.csv"),
            "--set", "demo.dataset=glass", "--set", "explanation.background_rows=20"]
    assert main(["reject-demo", *args, "-o", str(tmp_path / "a")]) == 0
    assert main(["reject-demo", *args, "-o", str(tmp_path / "b")]) == 0
    assert _snapshot(tmp_path / "a") == _snapshot(tmp_path / "b")
    dossier = json.loads(capsys.readouterr().out.split("\n}\n")[0] + "\n}")
    assert dossier
    toy = ["--set", "toy.grid_size=21", "--set", "toy.n_per_class=80"]
    assert main(["toy-landscape", *toy, "-o", str(tmp_path / "t1")]) == 0
    assert main(["toy-landscape", *toy, "-o", str(tmp_path / "t2")]) == 0
    assert _snapshot(tmp_path / "t1") == _snapshot(tmp_path / "t2")


def test_exit_codes(tmp_path, capsys):
    assert main(["correlate-cf", "--set", "nope=1"]) == 2
    missing = ["--dataset", str(tmp_path / "missing.csv"), "--dataset", str(DATA / "iris.csv"), "--runs", "1"]
    # one dataset fails to load, the other still runs; the verb reports failure
    assert main(["correlate-cf", *missing, "-o", str(tmp_path / "o")]) == 1
    text = (tmp_path / "o" / "tables" / "correlate_cf.csv").read_text()
    assert "iris" in text and "failed" in text
    assert "missing" in capsys.readouterr().err


def test_route_on_toy_moons(tmp_path):
    moons = make_toy_moons(200, 0.2, 2024)
    write_csv(moons, tmp_path / "moons.csv")
    f1, f2 = moons.feature_names
    inst = tmp_path / "inst.csv"
    # far from the data, then between the moons, then deep inside the upper moon
    inst.write_text(f"{f1},{f2}\n6.0,6.0\n0.3,0.0\n-0.95,0.3\nnan,1\n")
    rc = main(["route", str(inst), "--dataset", str(tmp_path / "moons.csv"), "-o", str(tmp_path / "out"),
               "--set", "model.knn_k=15"])
    assert rc == 1  # the unparsable row is reported as a per-instance error
    recs = [json.loads(line) for line in (tmp_path / "out" / "dossiers" / "routed.jsonl").read_text().splitlines()]
    assert [r.get("verdict") for r in recs[:3]] == ["rejected-insufficient-training", "counterfactual", "feature-importance"]
    assert recs[0]["payload"]["type"] == "rejection"
    assert recs[1]["payload"]["type"] == "counterfactual"
    assert len(recs[2]["payload"]["values"]) == 2
    assert "error" in recs[3]
