"""Experiment configuration: YAML documents merged over documented defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

import yaml

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


# Every key that resolves an unstated experimental detail lives here, so a
# resolved config written next to the results carries the full protocol.
DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "runs": 1,
    "workers": 1,
    "output_dir": "results",
    "datasets": [],
    "split": {"train_fraction": 0.7, "stratified": False},
    "normalization": "minmax",
    "model": {
        "knn_k": 7,
        "knn_tie_rule": "lower-index",
        "forest_trees": 100,
        "forest_depth": 4,
        "forest_max_features": "ceil-sqrt",
        "eknn_k": 7,
        "eknn_alpha": 0.95,
        "eknn_gamma_scale": 30.0,
    },
    "uncertainty": {
        "strategies": ["belief", "centroid-rbf", "ensemble-entropy"],
        "centroid_sigma": 1.0,
        "centroid_variant": "softmax-entropy",
        "softmax_temperature": 1.0,
    },
    "explanation": {
        "type": "counterfactual",
        "shap_target": "predicted",
        "coalition_value": "marginal",
        "exact_max_features": 12,
        "background_rows": 100,
        "sampled_background_rows": 30,
        "shap_permutations": 30,
    },
    "robustness": {"epsilon": 0.1, "n_samples": 30, "clip": False},
    "protocol": {
        "reject_fraction": 0.3,
        "reject_calibration": "test-split",
        "au_quantile": 0.5,
        "n_thresholds": 50,
        "reject_rule": "eu-at-or-above-threshold",
    },
    "stats": {"alpha": 0.05, "headline": "mean-of-runs"},
    "toy": {"n_per_class": 200, "noise": 0.2, "grid_size": 61, "grid_margin": 1.0, "outside_margin": 0.5,
            "near_radius": 0.05, "knn_probe": 15, "overlap_share": 0.3},
    "demo": {"dataset": None, "strategy": "belief", "explanation": "shap", "top_features": 2},
    "route": {"dataset": None, "strategy": "belief", "calibration": "test-split"},
}

CHOICES = {
    ("split", "stratified"): (True, False),
    ("normalization",): ("minmax",),
    ("model", "knn_tie_rule"): ("lower-index",),
    ("model", "forest_max_features"): ("ceil-sqrt",),
    ("uncertainty", "centroid_variant"): ("softmax-entropy", "subtraction"),
    ("explanation", "type"): ("counterfactual", "feature-importance"),
    ("explanation", "shap_target"): ("predicted",),
    ("explanation", "coalition_value"): ("marginal",),
    ("robustness", "clip"): (False,),
    ("protocol", "reject_calibration"): ("test-split",),
    ("protocol", "reject_rule"): ("eu-at-or-above-threshold",),
    ("stats", "headline"): ("mean-of-runs",),
    ("demo", "explanation"): ("shap", "counterfactual"),
    ("route", "calibration"): ("test-split", "train-split"),
}

KNOWN_STRATEGIES = ("belief", "centroid-rbf", "ensemble-entropy", "likelihood")


def _merge(base: dict, over: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {'.'.join(path + (k,))!r}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, path + (k,))
        else:
            out[k] = copy.deepcopy(v)
    return out


def _get(cfg: dict, path) -> object:
    for p in path:
        cfg = cfg[p]
    return cfg


def _normalise_datasets(entries, base_dir: Path) -> list[dict]:
    out = []
    for e in entries:
        if isinstance(e, str):
            e = {"path": e}
        if "path" not in e:
            raise ConfigError(f"dataset entry without a path: {e!r}")
        unknown = set(e) - {"name", "path", "label_column"}
        if unknown:
            raise ConfigError(f"unknown dataset keys {sorted(unknown)}")
        p = Path(e["path"])
        if not p.is_absolute():
            p = base_dir / p
        out.append(
            {
                "name": e.get("name") or p.stem,
                "path": str(p),
                "label_column": e.get("label_column", "label"),
            }
        )
    names = [d["name"] for d in out]
    if len(set(names)) != len(names):
        raise ConfigError("dataset names must be unique")
    return out


def validate(cfg: dict) -> dict:
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg.get('schema_version')!r}")
    for path, allowed in CHOICES.items():
        if _get(cfg, path) not in allowed:
            raise ConfigError(f"{'.'.join(path)} must be one of {list(allowed)}, got {_get(cfg, path)!r}")
    if not isinstance(cfg["runs"], int) or cfg["runs"] < 1:
        raise ConfigError("runs must be a positive integer")
    if not isinstance(cfg["workers"], int) or cfg["workers"] < 1:
        raise ConfigError("workers must be a positive integer")
    if not 0 < cfg["split"]["train_fraction"] < 1:
        raise ConfigError("split.train_fraction must lie in (0, 1)")
    if not 0 <= cfg["protocol"]["reject_fraction"] < 1:
        raise ConfigError("protocol.reject_fraction must lie in [0, 1)")
    if not 0 <= cfg["protocol"]["au_quantile"] <= 1:
        raise ConfigError("protocol.au_quantile must lie in [0, 1]")
    for s in cfg["uncertainty"]["strategies"]:
        if s not in KNOWN_STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    if not 0 < cfg["model"]["eknn_alpha"] < 1:
        raise ConfigError("model.eknn_alpha must lie in (0, 1)")
    for key in ("eknn_gamma_scale",):
        if not cfg["model"][key] > 0:
            raise ConfigError(f"model.{key} must be positive")
    if cfg["robustness"]["epsilon"] <= 0 or cfg["robustness"]["n_samples"] < 1:
        raise ConfigError("robustness.epsilon must be > 0 and n_samples >= 1")
    if not 0 <= cfg["explanation"]["exact_max_features"] <= 12:
        raise ConfigError("explanation.exact_max_features must lie in [0, 12]")
    if cfg["explanation"]["shap_permutations"] < 1:
        raise ConfigError("explanation.shap_permutations must be >= 1")
    return cfg


def parse_override(text: str) -> tuple[list[str], object]:
    """``a.b.c=value`` with a YAML-parsed value."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    return key.strip().split("."), yaml.safe_load(raw)


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for text in overrides or ():
        path, value = parse_override(text)
        node = cfg
        for p in path[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"unknown config key {'.'.join(path)!r}")
            node = node[p]
        if path[-1] not in node:
            raise ConfigError(f"unknown config key {'.'.join(path)!r}")
        node[path[-1]] = value
    return cfg


def load_config(path=None, overrides=None, base_dir=None) -> dict:
    """Resolve a config file (optional) plus ``key=value`` overrides.

    Relative dataset paths resolve against ``base_dir``, defaulting to the
    current directory.
    """
    user = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"no such config file: {path}")
        user = yaml.safe_load(path.read_text()) or {}
        if not isinstance(user, dict):
            raise ConfigError("config document must be a mapping")
    cfg = _merge(DEFAULTS, user)
    cfg = apply_overrides(cfg, overrides)
    cfg["datasets"] = _normalise_datasets(cfg["datasets"], Path(base_dir) if base_dir else Path.cwd())
    return validate(cfg)


def config_hash(cfg: dict) -> str:
    """Short digest of the resolved config, ignoring where outputs go and how many workers run."""
    payload = {k: v for k, v in cfg.items() if k not in ("output_dir", "workers")}
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def derive_seed(root_seed: int, run: int, name: str) -> int:
    """Seed for one (run, dataset) unit; independent of execution order."""
    digest = hashlib.sha256(f"{root_seed}:{run}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def dump(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)
