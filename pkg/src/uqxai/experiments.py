"""End-to-end pipelines behind the CLI verbs.

Each multi-run experiment is a list of independent (dataset, run) units.
A unit derives all of its randomness from ``derive_seed(root, run, name)``,
so running units in parallel or in any order gives the same numbers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sps

from . import explain, protocol, stats
from .classifiers import knn_fit, knn_predict_proba_batch, squared_distances
from .config import config_hash, derive_seed, dump
from .dataset import Dataset, SplitSpec, load_csv, make_toy_moons, normalize_minmax, split_indices
from .robustness import lipschitz_estimate
from .uncertainty import Strategy, StrategyUnavailable, UncertaintyEstimate, make_strategy


class ExperimentError(RuntimeError):
    pass


# ------------------------------------------------------------------ shared steps


def load_datasets(cfg) -> tuple[dict, dict]:
    """All configured datasets up front; returns (loaded, failures)."""
    loaded, failed = {}, {}
    for entry in cfg["datasets"]:
        try:
            loaded[entry["name"]] = load_csv(entry["path"], entry["label_column"], name=entry["name"])
        except Exception as exc:  # reported as a failure row, other datasets proceed
            failed[entry["name"]] = f"{type(exc).__name__}: {exc}"
    return loaded, failed


@dataclass(frozen=True)
class Prepared:
    name: str
    run: int
    seed: int
    train: Dataset
    test: Dataset
    train_idx: np.ndarray
    test_idx: np.ndarray
    seeds: tuple  # (forest, background, lipschitz, permutations)
    norm: object = None


def prepare(cfg, data: Dataset, run: int) -> Prepared:
    seed = derive_seed(cfg["seed"], run, data.name)
    sub = tuple(int(s) for s in np.random.SeedSequence(seed).generate_state(5))
    spec = SplitSpec(cfg["split"]["train_fraction"], sub[0], cfg["split"]["stratified"])
    tr_idx, te_idx = split_indices(data, spec)
    train, params = normalize_minmax(data.subset(tr_idx))
    test, _ = normalize_minmax(data.subset(te_idx), params)
    return Prepared(data.name, run, seed, train, test, tr_idx, te_idx, sub[1:], params)


def build_strategy(cfg, name: str, forest_seed: int = 0) -> Strategy:
    m, u = cfg["model"], cfg["uncertainty"]
    if name == "belief":
        return make_strategy(name, k=m["eknn_k"], alpha=m["eknn_alpha"], gamma_scale=m["eknn_gamma_scale"])
    if name == "centroid-rbf":
        return make_strategy(
            name, sigma=u["centroid_sigma"], variant=u["centroid_variant"], temperature=u["softmax_temperature"]
        )
    if name == "ensemble-entropy":
        return make_strategy(name, n_trees=m["forest_trees"], max_depth=m["forest_depth"], seed=forest_seed)
    return make_strategy(name)


def score_strategies(cfg, prep: Prepared) -> dict:
    """{strategy: (AU, EU, TU) arrays over the test split} or an 'unavailable' message."""
    out = {}
    for name in cfg["uncertainty"]["strategies"]:
        try:
            out[name] = build_strategy(cfg, name, prep.seeds[0]).fit(prep.train).batch(prep.test.features)
        except StrategyUnavailable as exc:
            out[name] = str(exc)
    return out


def check_counterfactual_minimality(train: Dataset, Z, predicted, idx, dist) -> None:
    """Full scan: no differently labelled row may be strictly closer than the chosen one."""
    for i, z in enumerate(Z):
        cand = np.flatnonzero(train.labels != predicted[i])
        best = min(float(np.sqrt(np.sum((z - train.features[j]) ** 2))) for j in cand)
        if dist[i] > best + 1e-12 or train.labels[idx[i]] == predicted[i]:
            raise ExperimentError(f"counterfactual for test row {i} is not the nearest differently labelled row")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _run_units(cfg, fn, units):
    """Evaluate ``fn(cfg, data, run)`` for every unit; results keep unit order."""
    if cfg["workers"] > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            futures = [pool.submit(_safe, fn, cfg, d, r) for d, r in units]
            return [f.result() for f in futures]
    return [_safe(fn, cfg, d, r) for d, r in units]


def _safe(fn, cfg, data, run):
    try:
        return fn(cfg, data, run)
    except Exception as exc:
        return {"error": f"{type(exc).__name__}: {exc}"}


# ---------------------------------------------------------- counterfactual study


def cf_unit(cfg, data: Dataset, run: int) -> dict:
    prep = prepare(cfg, data, run)
    knn = knn_fit(prep.train, cfg["model"]["knn_k"])
    pred = np.argmax(knn_predict_proba_batch(knn, prep.test.features), axis=1)
    idx, dist = explain.counterfactuals_batch(prep.train, prep.test.features, pred)
    check_counterfactual_minimality(prep.train, prep.test.features, pred, idx, dist)
    return {
        "run": run,
        "test_idx": prep.test_idx,
        "pred": pred,
        "measure": dist,
        "cf_source": prep.train_idx[idx],
        "uq": score_strategies(cfg, prep),
    }


# ------------------------------------------------------------------ SHAP study


def shap_settings(cfg, n_features: int) -> dict:
    e = cfg["explanation"]
    exact = n_features <= e["exact_max_features"]
    return {
        "exact": exact,
        "background_rows": e["background_rows"] if exact else e["sampled_background_rows"],
        "n_permutations": e["shap_permutations"],
    }


def make_shap_explainer(knn, background, target: int, settings: dict, perm_seed: int):
    """x -> phi(x) for a fixed target class and fixed feature orderings."""
    if settings["exact"]:
        return lambda z: explain.shapley_exact(knn, background, z, target).values
    return lambda z: explain.shapley_sampled(
        knn, background, z, target, settings["n_permutations"], perm_seed
    ).values


def shap_unit(cfg, data: Dataset, run: int) -> dict:
    prep = prepare(cfg, data, run)
    knn = knn_fit(prep.train, cfg["model"]["knn_k"])
    pred = np.argmax(knn_predict_proba_batch(knn, prep.test.features), axis=1)
    settings = shap_settings(cfg, data.n_features)
    background = explain.select_background(prep.train, settings["background_rows"], prep.seeds[1])
    rob = cfg["robustness"]
    L = np.empty(prep.test.n_rows)
    for i, x in enumerate(prep.test.features):
        lip_seed, perm_seed = np.random.SeedSequence([prep.seeds[2], i]).generate_state(2)
        # the orderings are shared by phi(x) and every phi(x') so sampling noise cancels
        explainer = make_shap_explainer(knn, background, int(pred[i]), settings, int(perm_seed))
        L[i] = lipschitz_estimate(explainer, x, rob["epsilon"], rob["n_samples"], int(lip_seed)).value
    return {
        "run": run,
        "test_idx": prep.test_idx,
        "pred": pred,
        "measure": L,
        "uq": score_strategies(cfg, prep),
    }


# ------------------------------------------------------------ table assembly


def _reject_mask(eu: np.ndarray, fraction: float) -> np.ndarray:
    """Keep-mask after rejecting instances with EU at or above the (1 - fraction) quantile."""
    if fraction <= 0:
        return np.ones(eu.size, dtype=bool)
    pol = protocol.calibrate(
        protocol.RoutingPolicy(eu_quantile=1.0 - fraction, au_threshold=0.0, au_quantile=None),
        [UncertaintyEstimate(0.0, float(e), float(e), "x") for e in eu],
    )
    return eu < pol.eu_threshold


def correlation_rows(cfg, results_by_ds: dict, failures: dict, columns: tuple) -> list[dict]:
    """One row per (dataset, strategy, column) in config order."""
    h = config_hash(cfg)
    alpha = cfg["stats"]["alpha"]
    rows = []
    for entry in cfg["datasets"]:
        name = entry["name"]
        for strat in cfg["uncertainty"]["strategies"]:
            for col in columns:
                if name in failures:
                    rows.append(stats.report_row(name, strat, col, None, h, f"failed: {failures[name]}"))
                    continue
                runs = results_by_ds[name]
                bad = [r["error"] for r in runs if "error" in r]
                if bad:
                    rows.append(stats.report_row(name, strat, col, None, h, f"failed: {bad[0]}"))
                    continue
                if isinstance(runs[0]["uq"][strat], str):
                    rows.append(stats.report_row(name, strat, col, None, h, "strategy unavailable"))
                    continue
                reports = []
                for r in runs:
                    au, eu, _ = r["uq"][strat]
                    keep = np.ones(au.size, dtype=bool)
                    if col != "full":
                        keep = _reject_mask(eu, cfg["protocol"]["reject_fraction"])
                    reports.append(stats.correlation_report(au[keep], r["measure"][keep], alpha))
                try:
                    rep = stats.aggregate_runs(reports, alpha)
                except stats.StatsError:
                    rows.append(stats.report_row(name, strat, col, None, h, "undefined"))
                    continue
                rows.append(stats.report_row(name, strat, col, rep, h))
    return rows


def raw_rows(cfg, runs: list[dict], measure_name: str) -> str:
    strats = cfg["uncertainty"]["strategies"]
    header = ["run", "row", "predicted", measure_name]
    for s in strats:
        header += [f"AU_{s}", f"EU_{s}", f"TU_{s}"]
    body = []
    for r in runs:
        if "error" in r:
            continue
        for i in range(r["measure"].size):
            row = [r["run"], int(r["test_idx"][i]), int(r["pred"][i]), r["measure"][i]]
            for s in strats:
                v = r["uq"][s]
                row += ["", "", ""] if isinstance(v, str) else [v[0][i], v[1][i], v[2][i]]
            body.append(row)
    return _csv_text(header, body)


def run_correlation(cfg, kind: str, out_dir=None) -> tuple[list[dict], bool]:
    """Shared driver for both correlation studies; returns (rows, all_ok)."""
    loaded, failures = load_datasets(cfg)
    fn, measure, columns = {
        "cf": (cf_unit, "cf_dissimilarity", ("full",)),
        "shap": (shap_unit, "lipschitz", ("full", "rejected")),
    }[kind]
    units = [(loaded[e["name"]], r) for e in cfg["datasets"] if e["name"] in loaded for r in range(cfg["runs"])]
    results = _run_units(cfg, fn, units)
    by_ds: dict = {}
    for (data, _), res in zip(units, results):
        by_ds.setdefault(data.name, []).append(res)
    rows = correlation_rows(cfg, by_ds, failures, columns)
    if out_dir is not None:
        out = Path(out_dir)
        verb = f"correlate_{kind}"
        _write(out / "tables" / f"{verb}.csv", stats.table_csv(rows))
        _write(out / "tables" / f"{verb}.txt", stats.table_text(rows))
        _write(out / "config.resolved.yaml", dump(cfg))
        for name, runs in by_ds.items():
            _write(out / "raw" / verb / f"{name}.csv", raw_rows(cfg, runs, measure))
    ok = all(r["status"] in ("ok", "strategy unavailable") for r in rows)
    return rows, ok


# ---------------------------------------------------------------- reject demo


def reject_demo(cfg, out_dir=None) -> tuple[dict, bool]:
    loaded, failures = load_datasets(cfg)
    demo = cfg["demo"]
    name = demo["dataset"] or (cfg["datasets"][0]["name"] if cfg["datasets"] else None)
    if name is None:
        raise ExperimentError("no dataset configured for the rejection demo")
    if name in failures:
        raise ExperimentError(f"dataset {name!r} failed to load: {failures[name]}")
    if name not in loaded:
        raise ExperimentError(f"demo dataset {name!r} is not among the configured datasets")
    data = loaded[name]
    prep = prepare(cfg, data, 0)
    if prep.test.n_rows == 0:
        raise ExperimentError("empty test set")
    strat = build_strategy(cfg, demo["strategy"], prep.seeds[0]).fit(prep.train)
    unc = strat.estimates(prep.test.features)
    curve = protocol.rejection_curve(unc, cfg["protocol"]["n_thresholds"])
    i = protocol.most_uncertain(unc, "epistemic")
    x = prep.test.features[i]
    knn = knn_fit(prep.train, cfg["model"]["knn_k"])
    pred = int(np.argmax(knn.predict_proba(x[None, :])[0]))
    top_n = demo["top_features"]
    if demo["explanation"] == "shap":
        settings = shap_settings(cfg, data.n_features)
        background = explain.select_background(prep.train, cfg["explanation"]["background_rows"], prep.seeds[1])
        if settings["exact"]:
            phi = explain.shapley_exact(knn, background, x, pred)
        else:
            phi = explain.shapley_sampled(
                knn, background, x, pred, cfg["explanation"]["shap_permutations"], prep.seeds[3]
            )
        top = phi.top_features(top_n)
        payload = {
            "type": "feature-importance",
            "target_class": data.class_names[pred],
            "estimator": phi.estimator,
            "values": dict(zip(data.feature_names, phi.values.tolist())),
            "top_features": [data.feature_names[j] for j in top],
        }
    else:
        cf = explain.counterfactual_nn(prep.train, x, pred)
        top = [int(j) for j in np.argsort(-np.abs(x - cf.instance), kind="stable")[:top_n]]
        payload = {
            "type": "counterfactual",
            "source_row": int(prep.train_idx[cf.source_index]),
            "counter_label": data.class_names[cf.counter_label],
            "distance": cf.distance,
            "instance": cf.instance.tolist(),
            "top_features": [data.feature_names[j] for j in top],
        }
    eu = np.array([u.epistemic for u in unc])
    au = np.array([u.aleatoric for u in unc])
    pol = protocol.calibrate(
        protocol.RoutingPolicy(
            eu_quantile=1.0 - cfg["protocol"]["reject_fraction"], au_quantile=cfg["protocol"]["au_quantile"]
        ),
        unc,
    )
    u = unc[i]
    # how far the instance sits from the training cloud on the displayed features
    proj = prep.train.features[:, top]
    d_nn = float(np.sqrt(squared_distances(x[top][None, :], proj).min()))
    pd2 = squared_distances(proj, proj)
    np.fill_diagonal(pd2, np.inf)
    spread = float(np.median(np.sqrt(pd2.min(axis=1))))
    dossier = {
        "dataset": name,
        "config_hash": config_hash(cfg),
        "strategy": demo["strategy"],
        "instance": {"test_position": i, "row": int(prep.test_idx[i]), "features": x.tolist()},
        "predicted": data.class_names[pred],
        "true_label": data.class_names[int(prep.test.labels[i])],
        "uncertainty": {"AU": u.aleatoric, "EU": u.epistemic, "TU": u.total},
        "eu_rank": int(np.sum(eu > u.epistemic)),
        "policy": pol.to_dict(),
        "rejected_at_policy": bool(u.epistemic >= pol.eu_threshold),
        "explanation": payload,
        "projection": {
            "features": [data.feature_names[j] for j in top],
            "nearest_train_distance": d_nn,
            "median_train_nn_distance": spread,
        },
    }
    if out_dir is not None:
        out = Path(out_dir)
        _write(out / "curves" / f"rejection_{name}_{demo['strategy']}.csv", _csv_text(["threshold", "fraction_rejected"], curve))
        _write(out / "dossiers" / f"most_uncertain_{name}.json", json.dumps(dossier, indent=2, sort_keys=True) + "\n")
        scatter = [[int(prep.train_idx[j]), data.class_names[int(prep.train.labels[j])], *proj[j], 0] for j in range(len(proj))]
        scatter.append([int(prep.test_idx[i]), "instance", *x[top], 1])
        head = ["row", "label"] + [data.feature_names[j] for j in top] + ["highlight"]
        _write(out / "dossiers" / f"scatter_{name}.csv", _csv_text(head, scatter))
        _write(
            out / "raw" / f"reject_demo_{name}.csv",
            _csv_text(["row", "AU", "EU", "TU"], [[int(prep.test_idx[j]), au[j], eu[j], unc[j].total] for j in range(len(unc))]),
        )
        _write(out / "config.resolved.yaml", dump(cfg))
    return dossier, True


# ---------------------------------------------------------------------- route


def read_instances(path, feature_names) -> list:
    """Rows of the named feature columns; unparsable rows come back as error strings."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ExperimentError(f"{path}: empty instances file")
    header = [h.strip() for h in rows[0]]
    missing = [f for f in feature_names if f not in header]
    if missing:
        raise ExperimentError(f"{path}: missing feature columns {missing}")
    cols = [header.index(f) for f in feature_names]
    out = []
    for r, row in enumerate(rows[1:], start=1):
        try:
            v = np.array([float(row[j]) for j in cols])
            if not np.all(np.isfinite(v)):
                raise ValueError("non-finite value")
            out.append(v)
        except (ValueError, IndexError) as exc:
            out.append(f"row {r}: {exc}")
    return out


def _payload_json(p) -> dict:
    if isinstance(p, protocol.RejectionRecord):
        return {"type": "rejection", "epistemic": p.epistemic, "message": p.message}
    if isinstance(p, explain.Counterfactual):
        return {
            "type": "counterfactual",
            "source_index": p.source_index,
            "counter_label": p.counter_label,
            "distance": p.distance,
            "instance": p.instance.tolist(),
        }
    return {
        "type": "feature-importance",
        "target_class": p.target_class,
        "estimator": p.estimator,
        "values": p.values.tolist(),
    }


def route_instances(cfg, instances_path, out_dir=None) -> tuple[list[dict], bool]:
    loaded, failures = load_datasets(cfg)
    rc = cfg["route"]
    name = rc["dataset"] or (cfg["datasets"][0]["name"] if cfg["datasets"] else None)
    if name is None or name not in loaded:
        raise ExperimentError(f"route dataset {name!r} unavailable: {failures.get(name, 'not configured')}")
    data = loaded[name]
    prep = prepare(cfg, data, 0)
    norm = prep.norm
    strat = build_strategy(cfg, rc["strategy"], prep.seeds[0]).fit(prep.train)
    # thresholds come from a split, never from the routed instances
    calib_src = prep.test if rc["calibration"] == "test-split" else prep.train
    policy = protocol.calibrate(
        protocol.RoutingPolicy(
            eu_quantile=1.0 - cfg["protocol"]["reject_fraction"], au_quantile=cfg["protocol"]["au_quantile"]
        ),
        strat.estimates(calib_src.features),
    )
    knn = knn_fit(prep.train, cfg["model"]["knn_k"])
    settings = shap_settings(cfg, data.n_features)
    background = explain.select_background(prep.train, settings["background_rows"], prep.seeds[1])

    def predicted(z):
        return int(np.argmax(knn.predict_proba(z[None, :])[0]))

    explainers = {
        protocol.COUNTERFACTUAL: lambda z: explain.counterfactual_nn(prep.train, z, predicted(z)),
        protocol.FEATURE_IMPORTANCE: make_shap_explainer_auto(knn, background, settings, prep.seeds[3]),
    }
    records, ok = [], True
    h = config_hash(cfg)
    for i, raw in enumerate(read_instances(instances_path, data.feature_names)):
        if isinstance(raw, str):
            records.append({"instance": i, "error": raw, "config_hash": h})
            ok = False
            continue
        try:
            z = norm.transform(raw)
            routed = protocol.route(policy, z, strat, explainers)
            records.append(
                {
                    "instance": i,
                    "verdict": routed.verdict,
                    "predicted": data.class_names[predicted(z)],
                    "uncertainty": {
                        "AU": routed.uncertainty.aleatoric,
                        "EU": routed.uncertainty.epistemic,
                        "TU": routed.uncertainty.total,
                        "strategy": routed.uncertainty.strategy,
                    },
                    "payload": _payload_json(routed.payload),
                    "config_hash": h,
                }
            )
        except Exception as exc:
            records.append({"instance": i, "error": f"{type(exc).__name__}: {exc}", "config_hash": h})
            ok = False
    if out_dir is not None:
        out = Path(out_dir)
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
        _write(out / "dossiers" / "routed.jsonl", text)
        _write(out / "dossiers" / "routing_policy.json", json.dumps(policy.to_dict(), sort_keys=True, indent=2) + "\n")
        _write(out / "config.resolved.yaml", dump(cfg))
    return records, ok


def make_shap_explainer_auto(knn, background, settings, perm_seed):
    def run(z):
        target = int(np.argmax(knn.predict_proba(z[None, :])[0]))
        if settings["exact"]:
            return explain.shapley_exact(knn, background, z, target)
        return explain.shapley_sampled(knn, background, z, target, settings["n_permutations"], perm_seed)

    return run


# -------------------------------------------------------------- toy landscape


def toy_grid(cfg, data: Dataset) -> np.ndarray:
    t = cfg["toy"]
    lo = data.features.min(axis=0) - t["grid_margin"]
    hi = data.features.max(axis=0) + t["grid_margin"]
    g = np.linspace(0.0, 1.0, t["grid_size"])
    gx, gy = np.meshgrid(lo[0] + g * (hi[0] - lo[0]), lo[1] + g * (hi[1] - lo[1]))
    return np.column_stack([gx.ravel(), gy.ravel()])


def toy_regions(cfg, data: Dataset, grid: np.ndarray) -> dict:
    """Masks over the grid: inside the data box, far outside it, overlap band, pure region.

    The band/pure split is read off the labels of nearby training points,
    independently of any uncertainty model.
    """
    t = cfg["toy"]
    lo, hi = data.features.min(axis=0), data.features.max(axis=0)
    outside_by = np.max(np.maximum(lo - grid, grid - hi), axis=1)
    d2 = squared_distances(grid, data.features)
    near = np.sqrt(d2.min(axis=1)) <= t["near_radius"]
    nn = data.labels[np.argsort(d2, axis=1, kind="stable")[:, : t["knn_probe"]]]
    share = np.minimum(nn.mean(axis=1), 1.0 - nn.mean(axis=1))
    return {
        "inside": outside_by <= 0,
        "outside": outside_by >= t["outside_margin"],
        "overlap": near & (share >= t["overlap_share"]),
        "pure": near & (share == 0),
    }


def toy_landscape(cfg, out_dir=None) -> tuple[list[dict], bool]:
    t = cfg["toy"]
    raw = make_toy_moons(t["n_per_class"], t["noise"], cfg["seed"])
    data, _ = normalize_minmax(raw)
    grid = toy_grid(cfg, data)
    reg = toy_regions(cfg, data, grid)
    h = config_hash(cfg)
    cols, summary = {}, []
    ok = True
    for s in cfg["uncertainty"]["strategies"]:
        try:
            au, eu, tu = build_strategy(cfg, s, cfg["seed"]).fit(data).batch(grid)
        except StrategyUnavailable:
            summary.append({"strategy": s, "status": "strategy unavailable", "config_hash": h})
            continue
        cols[s] = (au, eu, tu)
        eu_in = float(eu[reg["inside"]].mean())
        eu_out = float(eu[reg["outside"]].mean())
        a_band, a_pure = au[reg["overlap"]], au[reg["pure"]]
        if a_band.size and a_pure.size:
            p = float(sps.mannwhitneyu(a_band, a_pure, alternative="greater").pvalue)
        else:
            p = math.nan
        summary.append(
            {
                "strategy": s,
                "eu_inside": eu_in,
                "eu_outside": eu_out,
                "eu_ratio": eu_out / eu_in if eu_in > 0 else math.inf,
                "au_overlap": float(a_band.mean()) if a_band.size else math.nan,
                "au_pure": float(a_pure.mean()) if a_pure.size else math.nan,
                "n_overlap": int(a_band.size),
                "n_pure": int(a_pure.size),
                "au_rank_p": p,
                "status": "ok",
                "config_hash": h,
            }
        )
    if out_dir is not None:
        out = Path(out_dir)
        head = ["x1", "x2", "inside", "outside", "overlap", "pure"]
        for s in cols:
            head += [f"AU_{s}", f"EU_{s}", f"TU_{s}"]
        body = []
        for i, g in enumerate(grid):
            row = [g[0], g[1]] + [int(reg[k][i]) for k in ("inside", "outside", "overlap", "pure")]
            for s in cols:
                row += [cols[s][0][i], cols[s][1][i], cols[s][2][i]]
            body.append(row)
        _write(out / "curves" / "toy_landscape.csv", _csv_text(head, body))
        _write(
            out / "raw" / "toy_moons.csv",
            _csv_text(["x1", "x2", "label"], [[*data.features[i], data.class_names[data.labels[i]]] for i in range(data.n_rows)]),
        )
        keys = ["strategy", "eu_inside", "eu_outside", "eu_ratio", "au_overlap", "au_pure", "n_overlap", "n_pure", "au_rank_p", "status", "config_hash"]
        _write(out / "tables" / "toy_landscape.csv", _csv_text(keys, [[r.get(k, "") for k in keys] for r in summary]))
        _write(out / "config.resolved.yaml", dump(cfg))
    return summary, ok
