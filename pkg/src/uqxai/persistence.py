"""Save and load fitted models as versioned JSON documents."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classifiers import DecisionTree, KnnModel, TreeEnsemble
from .evidence import EknnModel
from .uncertainty import CentroidModel

SCHEMA_VERSION = 1


class PersistenceError(ValueError):
    pass


def _arr(a) -> list:
    return np.asarray(a).tolist()


def model_to_dict(model) -> dict:
    if isinstance(model, KnnModel):
        body = {
            "train_features": _arr(model.train_features),
            "train_labels": _arr(model.train_labels),
            "k": model.k,
            "n_classes": model.n_classes,
        }
        kind = "knn"
    elif isinstance(model, EknnModel):
        body = {
            "train_features": _arr(model.train_features),
            "train_labels": _arr(model.train_labels),
            "k": model.k,
            "alpha": model.alpha,
            "gamma": _arr(model.gamma),
            "n_classes": model.n_classes,
            "gamma_scale": model.gamma_scale,
        }
        kind = "eknn"
    elif isinstance(model, CentroidModel):
        body = {
            "centroids": _arr(model.centroids),
            "sigma": model.sigma,
            "variant": model.variant,
            "temperature": model.temperature,
        }
        kind = "centroid"
    elif isinstance(model, TreeEnsemble):
        body = {
            "max_depth": model.max_depth,
            "bootstrap_seeds": list(model.bootstrap_seeds),
            "n_classes": model.n_classes,
            "n_features": model.n_features,
            "trees": [
                {
                    "feature": _arr(t.feature),
                    "threshold": _arr(t.threshold),
                    "left": _arr(t.left),
                    "right": _arr(t.right),
                    "value": _arr(t.value),
                }
                for t in model.trees
            ],
        }
        kind = "tree-ensemble"
    else:
        raise PersistenceError(f"cannot serialise {type(model).__name__}")
    return {"schema_version": SCHEMA_VERSION, "kind": kind, "model": body}


def model_from_dict(doc: dict):
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise PersistenceError(f"unsupported schema version {doc.get('schema_version')!r}")
    kind, b = doc.get("kind"), doc.get("model", {})
    f64 = lambda v: np.asarray(v, dtype=float)  # noqa: E731
    i64 = lambda v: np.asarray(v, dtype=np.int64)  # noqa: E731
    if kind == "knn":
        return KnnModel(f64(b["train_features"]), i64(b["train_labels"]), int(b["k"]), int(b["n_classes"]))
    if kind == "eknn":
        return EknnModel(
            f64(b["train_features"]),
            i64(b["train_labels"]),
            int(b["k"]),
            float(b["alpha"]),
            f64(b["gamma"]),
            int(b["n_classes"]),
            float(b.get("gamma_scale", 1.0)),
        )
    if kind == "centroid":
        return CentroidModel(f64(b["centroids"]), float(b["sigma"]), b["variant"], float(b.get("temperature", 1.0)))
    if kind == "tree-ensemble":
        C = int(b["n_classes"])
        trees = tuple(
            DecisionTree(
                i64(t["feature"]),
                f64(t["threshold"]),
                i64(t["left"]),
                i64(t["right"]),
                f64(t["value"]).reshape(-1, C),
                int(b["max_depth"]),
            )
            for t in b["trees"]
        )
        return TreeEnsemble(trees, int(b["max_depth"]), tuple(b["bootstrap_seeds"]), C, int(b["n_features"]))
    raise PersistenceError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model_to_dict(model), sort_keys=True) + "\n")


def load_model(path):
    return model_from_dict(json.loads(Path(path).read_text()))
