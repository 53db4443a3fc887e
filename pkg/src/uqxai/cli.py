"""Command-line entry point: ``uqxai <verb> [--config FILE] [--set key=value ...]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .config import ConfigError, load_config

log = logging.getLogger("uqxai")

VERBS = ("correlate-cf", "correlate-shap", "reject-demo", "route", "toy-landscape")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uqxai", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        s = sub.add_parser(verb)
        s.add_argument("--config", "-c", help="YAML experiment config")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key, e.g. --set runs=5 --set model.knn_k=9")
        s.add_argument("--output-dir", "-o", help="shortcut for --set output_dir=...")
        s.add_argument("--dataset", action="append", default=[], metavar="PATH",
                       help="add a dataset CSV (label column 'label'); replaces the configured list")
        s.add_argument("--label-column", default=None, help="label column for --dataset files (name or index)")
        s.add_argument("--runs", type=int, help="shortcut for --set runs=N")
        s.add_argument("--seed", type=int, help="shortcut for --set seed=N")
        s.add_argument("--workers", type=int, help="shortcut for --set workers=N")
        if verb == "route":
            s.add_argument("instances", help="CSV of instances to route (header with feature names)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def _overrides(args) -> list[str]:
    out = list(args.overrides)
    for flag in ("output_dir", "runs", "seed", "workers"):
        v = getattr(args, flag)
        if v is not None:
            out.append(f"{flag}={v}")
    if args.dataset:
        entries = [{"path": d, "label_column": args.label_column or "label"} for d in args.dataset]
        out.append(f"datasets={json.dumps(entries)}")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, _overrides(args))
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg["output_dir"])
    try:
        if args.verb in ("correlate-cf", "correlate-shap"):
            kind = "cf" if args.verb == "correlate-cf" else "shap"
            rows, ok = experiments.run_correlation(cfg, kind, out)
            print((out / "tables" / f"correlate_{kind}.txt").read_text(), end="")
            for r in rows:
                if r["status"] != "ok":
                    print(f"{r['dataset']}/{r['strategy']}/{r['column']}: {r['status']}", file=sys.stderr)
        elif args.verb == "reject-demo":
            dossier, ok = experiments.reject_demo(cfg, out)
            print(json.dumps(dossier, indent=2, sort_keys=True))
        elif args.verb == "route":
            records, ok = experiments.route_instances(cfg, args.instances, out)
            for r in records:
                print(json.dumps(r, sort_keys=True))
        else:
            summary, ok = experiments.toy_landscape(cfg, out)
            for r in summary:
                print(json.dumps(r, sort_keys=True))
    except experiments.ExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
