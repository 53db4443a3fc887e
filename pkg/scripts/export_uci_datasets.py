"""Export the UCI benchmark tables used by the experiments to plain CSV.

The tables are copied out of packages that ship them as package data, so no
network access is needed:

* scikit-learn: breast cancer (WDBC), iris, wine
* common-datasets: glass, ecoli, cleveland heart, ionosphere, bupa liver
* keel-ds: sonar (headerless, features named x0..x59)

Install the two helpers without their dependencies before running::

    pip install --no-deps common-datasets keel-ds
    python scripts/export_uci_datasets.py data/

Parkinson's voice data is not shipped by any of these packages; drop a
``parkinson.csv`` (label column ``label``) into the output directory by hand.
"""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn import datasets as skd


def _keel(text: str) -> pd.DataFrame:
    names, rows = [], []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        if line.lower().startswith("@attribute"):
            names.append(line.split()[1])
        elif not line.startswith("@"):
            rows.append([c.strip() for c in line.split(",")])
    if not names:
        names = [f"x{i}" for i in range(len(rows[0]) - 1)] + ["class"]
    return pd.DataFrame(rows, columns=names)


def _from_sklearn(loader) -> pd.DataFrame:
    bunch = loader()
    df = pd.DataFrame(bunch.data, columns=[str(c).replace(" ", "_") for c in bunch.feature_names])
    df["label"] = np.asarray(bunch.target_names)[bunch.target]
    return df


def _finish(df: pd.DataFrame, label: str) -> pd.DataFrame:
    y = df.pop(label).astype(str).str.strip()
    df = df.apply(pd.to_numeric)
    df["label"] = y.values
    return df


def build_all() -> dict[str, pd.DataFrame]:
    cd = resources.files("common_datasets") / "data" / "classification"
    kd = resources.files("keel_ds") / "data" / "balanced" / "raw"
    out = {
        "breast_cancer": _from_sklearn(skd.load_breast_cancer),
        "iris": _from_sklearn(skd.load_iris),
        "wine": _from_sklearn(skd.load_wine),
    }

    glass = pd.read_csv(cd / "glass" / "glass.data.txt", header=None)
    glass.columns = ["id", "RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe", "type"]
    out["glass"] = _finish(glass.drop(columns="id"), "type")

    ecoli = pd.read_csv(cd / "ecoli" / "ecoli.data.txt", sep=r"\s+", header=None)
    ecoli.columns = ["name", "mcg", "gvh", "lip", "chg", "aac", "alm1", "alm2", "site"]
    out["ecoli"] = _finish(ecoli.drop(columns="name"), "site")

    heart = _keel((cd / "cleveland" / "cleveland.dat").read_text())
    heart["Num"] = np.where(heart["Num"].astype(int) > 0, "disease", "healthy")
    out["heart"] = _finish(heart, "Num")

    out["ionosphere"] = _finish(_keel((cd / "ionosphere" / "ionosphere.dat").read_text()), "Class")
    out["liver"] = _finish(_keel((cd / "bupa" / "bupa.dat").read_text()), "Selector")
    out["sonar"] = _finish(_keel((kd / "sonar.dat").read_text()), "class")
    return out


def main(argv: list[str]) -> int:
    dest = Path(argv[1] if len(argv) > 1 else "data")
    dest.mkdir(parents=True, exist_ok=True)
    for name, df in build_all().items():
        df.to_csv(dest / f"{name}.csv", index=False, float_format="%.10g")
        print(f"{name:14s} rows={len(df):4d} features={df.shape[1] - 1:3d} classes={df['label'].nunique()}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
