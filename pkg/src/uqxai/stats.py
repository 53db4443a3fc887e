"""Spearman rank correlation, its significance, and aggregation over runs."""

from __future__ import annotations

import csv
import io
import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats as sps

EXACT_MAX_N = 9  # permutation null enumerated for n below 10


class StatsError(ValueError):
    pass


def _undefined(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


@dataclass(frozen=True)
class CorrelationReport:
    rho: float  # nan marks an undefined correlation
    p_value: float
    significant: bool
    n_pairs: int
    n_runs: int = 1
    alpha: float = 0.05
    per_run_rho: tuple = ()
    per_run_p: tuple = ()
    pooled_rho: float = math.nan
    xs: np.ndarray | None = field(default=None, repr=False, compare=False)
    ys: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def defined(self) -> bool:
        return not math.isnan(self.rho)


def midranks(v) -> np.ndarray:
    return sps.rankdata(np.asarray(v, dtype=float), method="average")


def spearman(xs, ys) -> float:
    """Pearson correlation of mid-ranks; ``nan`` when either side has no rank spread."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise StatsError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if xs.size < 3:
        raise StatsError("need at least 3 pairs")
    rx = midranks(xs) - (xs.size + 1) / 2.0
    ry = midranks(ys) - (ys.size + 1) / 2.0
    sxx = float(rx @ rx)
    syy = float(ry @ ry)
    if sxx == 0 or syy == 0:
        return math.nan
    rho = float(rx @ ry) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


@lru_cache(maxsize=None)
def _exact_null(n: int) -> np.ndarray:
    """Sorted |rho| over all n! rank permutations (no ties)."""
    base = np.arange(n)
    d2 = np.array([np.sum((base - np.array(p)) ** 2) for p in itertools.permutations(range(n))])
    return np.sort(np.abs(1.0 - 6.0 * d2 / (n * (n * n - 1))))


def spearman_significance(rho: float, n_pairs: int) -> float:
    """Two-sided p-value for H0: no monotone association.

    Uses Student's t with ``n - 2`` degrees of freedom for ``n >= 10`` and the
    exact permutation distribution (assuming untied ranks) below that.
    """
    if n_pairs < 4:
        raise StatsError("significance needs at least 4 pairs")
    if _undefined(rho):
        return math.nan
    if abs(rho) >= 1.0:
        warnings.warn("|rho| = 1: p-value set to 0", RuntimeWarning, stacklevel=2)
        return 0.0
    if rho == 0:
        return 1.0
    if n_pairs <= EXACT_MAX_N:
        null = _exact_null(n_pairs)
        hits = null.size - np.searchsorted(null, abs(rho) - 1e-12, side="left")
        return float(hits / null.size)
    df = n_pairs - 2
    t = abs(rho) * math.sqrt(df / (1.0 - rho * rho))
    return float(min(1.0, 2.0 * sps.t.sf(t, df)))


def correlation_report(xs, ys, alpha: float = 0.05) -> CorrelationReport:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    rho = spearman(xs, ys)
    p = spearman_significance(rho, xs.size) if xs.size >= 4 else math.nan
    return CorrelationReport(
        rho=rho,
        p_value=p,
        significant=bool(not math.isnan(p) and p < alpha),
        n_pairs=int(xs.size),
        alpha=alpha,
        per_run_rho=(rho,),
        per_run_p=(p,),
        pooled_rho=rho,
        xs=xs,
        ys=ys,
    )


def aggregate_runs(reports, alpha: float | None = None) -> CorrelationReport:
    """Mean of the defined per-run rhos; p-value from the pooled pairs."""
    reports = list(reports)
    if not reports:
        raise StatsError("no runs to aggregate")
    if len(reports) == 1 and alpha is None:
        return reports[0]
    alpha = reports[0].alpha if alpha is None else alpha
    per_rho = tuple(r for rep in reports for r in rep.per_run_rho)
    per_p = tuple(p for rep in reports for p in rep.per_run_p)
    defined = [r for r in per_rho if not math.isnan(r)]
    if not defined:
        raise StatsError("every run produced an undefined correlation")
    rho = math.fsum(sorted(defined)) / len(defined)
    n_runs = sum(rep.n_runs for rep in reports)
    if all(rep.xs is not None for rep in reports):
        xs = np.concatenate([rep.xs for rep in reports])
        ys = np.concatenate([rep.ys for rep in reports])
        pooled = spearman(xs, ys)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            p = spearman_significance(pooled, xs.size)
    else:
        xs = ys = None
        pooled = math.nan
        p = math.nan
    return CorrelationReport(
        rho=rho,
        p_value=p,
        significant=bool(not math.isnan(p) and p < alpha),
        n_pairs=int(xs.size) if xs is not None else sum(rep.n_pairs for rep in reports),
        n_runs=n_runs,
        alpha=alpha,
        per_run_rho=per_rho,
        per_run_p=per_p,
        pooled_rho=pooled,
        xs=xs,
        ys=ys,
    )


# ------------------------------------------------------------------------ tables

TABLE_COLUMNS = ("dataset", "strategy", "column", "rho", "p_value", "significant", "n_runs", "n_pairs", "pooled_rho", "config_hash", "status")


def report_row(dataset: str, strategy: str, column: str, rep: CorrelationReport | None, config_hash: str, status="ok") -> dict:
    if rep is None:
        return {c: "" for c in TABLE_COLUMNS} | {
            "dataset": dataset, "strategy": strategy, "column": column, "config_hash": config_hash, "status": status,
        }
    return {
        "dataset": dataset,
        "strategy": strategy,
        "column": column,
        "rho": _fmt(rep.rho, 4),
        "p_value": _fmt_p(rep.p_value),
        "significant": str(rep.significant).lower(),
        "n_runs": str(rep.n_runs),
        "n_pairs": str(rep.n_pairs),
        "pooled_rho": _fmt(rep.pooled_rho, 4),
        "config_hash": config_hash,
        "status": status,
    }


def _fmt(v: float, digits: int) -> str:
    if v is None or math.isnan(v):
        return "undefined"
    return f"{v:.{digits}f}"


def _fmt_p(p: float) -> str:
    if p is None or math.isnan(p):
        return "undefined"
    return f"{p:.3e}"


def table_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in TABLE_COLUMNS})
    return buf.getvalue()


def table_text(rows: list[dict], value: str = "rho") -> str:
    """Aligned dataset x (strategy, column) grid of ``value``."""
    cols: list[tuple[str, str]] = []
    datasets: list[str] = []
    cell: dict = {}
    notes: list[str] = []
    for r in rows:
        key = (r["strategy"], r["column"])
        if key not in cols:
            cols.append(key)
        if r["dataset"] not in datasets:
            datasets.append(r["dataset"])
        status = r.get("status", "ok")
        if status == "ok":
            cell[(r["dataset"], key)] = r.get(value, "") + ("*" if r.get("significant") == "true" else "")
        else:
            cell[(r["dataset"], key)] = status.split(":")[0]
            note = f"{r['dataset']}: {status}"
            if note not in notes:
                notes.append(note)
    head1 = ["dataset"] + [s for s, _ in cols]
    head2 = [""] + [c for _, c in cols]
    body = [[d] + [cell.get((d, k), "") for k in cols] for d in datasets]
    grid = [head1, head2] + body
    widths = [max(len(row[j]) for row in grid) for j in range(len(head1))]
    lines = []
    for i, row in enumerate(grid):
        lines.append("  ".join(v.ljust(widths[j]) if j == 0 else v.rjust(widths[j]) for j, v in enumerate(row)).rstrip())
        if i == 1:
            lines.append("-" * len(lines[0]))
    lines += ["", "* significant at the configured alpha"] + notes
    return "\n".join(lines) + "\n"
