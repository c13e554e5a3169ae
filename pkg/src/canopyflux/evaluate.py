"""Repeated k-fold cross-validation, metrics, and importance reporting.

The tuner runs a full k-fold split per repeat (fresh fold shuffle each
repeat), fits one forest per (repeat, fold, mtry) resample, and averages
metrics over all k * repeats resamples per mtry. RMSE selects the best
mtry; reported numbers are the resample averages for that mtry.

R^2 is the squared Pearson correlation between observed and predicted
values. That convention matters: it is insensitive to affine
miscalibration of the predictions and is undefined when either vector has
zero variance (such resamples are dropped from the R^2 average only).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .features import FeatureTable, to_matrix
from .forest import Forest, ForestConfig, fit_forest, raw_importance
from .rng import derive_rng, derive_seed


@dataclass(frozen=True)
class CvConfig:
    k: int = 5
    repeats: int = 30
    mtry_grid: tuple[int, ...] | None = None  # None: all of 1..p
    seed: int = 0


@dataclass(frozen=True)
class MetricSet:
    """Resample-averaged metrics with their standard deviations."""

    rmse_mean: float
    rmse_sd: float
    mae_mean: float
    mae_sd: float
    r2_mean: float | None
    r2_sd: float | None
    n_resamples: int
    n_r2_resamples: int


@dataclass
class CvResult:
    per_mtry: dict[int, MetricSet]
    best_mtry: int

    @property
    def final(self) -> MetricSet:
        return self.per_mtry[self.best_mtry]


@dataclass
class SiteResult:
    """Everything the report needs about one (site, feature set) run."""

    site_id: str
    feature_set: str
    n_rows: int
    cv: CvResult
    importance: list[tuple[str, float]]  # scaled, descending
    importance_raw: dict[str, float] = field(default_factory=dict)


def metrics(y_true: np.ndarray, y_pred: np.ndarray) -> tuple[float, float, float | None]:
    """(rmse, mae, r2). r2 is None when undefined (n < 2 or a zero-variance
    vector)."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ShapeError(f"shape mismatch: {y_true.shape} vs {y_pred.shape}")
    err = y_pred - y_true
    rmse = float(np.sqrt(np.mean(err * err)))
    mae = float(np.mean(np.abs(err)))
    r2: float | None = None
    if len(y_true) >= 2:
        dt = y_true - y_true.mean()
        dp = y_pred - y_pred.mean()
        var_t = float(dt @ dt)
        var_p = float(dp @ dp)
        if var_t > 0.0 and var_p > 0.0:
            cov = float(dt @ dp)
            r2 = min(cov * cov / (var_t * var_p), 1.0)
    return rmse, mae, r2


def kfold_split(n: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """k disjoint index sets partitioning [0, n); sizes differ by at most 1."""
    if k > n:
        raise ConfigError(f"k={k} folds for only n={n} rows")
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    perm = rng.permutation(n)
    base, extra = divmod(n, k)
    folds: list[np.ndarray] = []
    start = 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


def aggregate_resamples(
    records: list[tuple[float, float, float | None]],
) -> MetricSet:
    """Unweighted mean and sample sd over resample metrics; resamples with
    undefined r2 are excluded from the r2 aggregate only."""
    rmse = np.array([r[0] for r in records], dtype=np.float64)
    mae = np.array([r[1] for r in records], dtype=np.float64)
    r2 = np.array([r[2] for r in records if r[2] is not None], dtype=np.float64)

    def sd(v: np.ndarray) -> float:
        return float(np.std(v, ddof=1)) if len(v) >= 2 else 0.0

    return MetricSet(
        rmse_mean=float(np.mean(rmse)),
        rmse_sd=sd(rmse),
        mae_mean=float(np.mean(mae)),
        mae_sd=sd(mae),
        r2_mean=float(np.mean(r2)) if len(r2) else None,
        r2_sd=sd(r2) if len(r2) else None,
        n_resamples=len(records),
        n_r2_resamples=len(r2),
    )


def select_best_mtry(per_mtry: dict[int, MetricSet]) -> int:
    """Argmin of mean RMSE over the grid; ties go to the smaller mtry."""
    best = None
    for mtry in sorted(per_mtry):
        if best is None or per_mtry[mtry].rmse_mean < per_mtry[best].rmse_mean:
            best = mtry
    assert best is not None
    return best


def repeated_cv(
    table: FeatureTable,
    forest_config: ForestConfig,
    cv: CvConfig,
    threads: int = 1,
) -> CvResult:
    """Repeated k-fold CV over the mtry grid.

    Fold shuffles derive from (seed, 2, repeat); the forest fitted on a
    resample derives from (seed, 3, repeat, fold) and is shared across the
    mtry grid, so the comparison between mtry values is paired.
    """
    x, y, _names = to_matrix(table)
    n, p = x.shape
    if cv.k > n:
        raise ConfigError(f"k={cv.k} folds for only n={n} rows")
    if cv.repeats < 1:
        raise ConfigError(f"repeats must be >= 1, got {cv.repeats}")
    grid = tuple(cv.mtry_grid) if cv.mtry_grid is not None else tuple(range(1, p + 1))
    if not grid:
        raise ConfigError("mtry_grid must be non-empty")
    for m in grid:
        if not 1 <= m <= p:
            raise ConfigError(f"mtry {m} outside [1, {p}]")

    fold_sets = [kfold_split(n, cv.k, derive_rng(cv.seed, 2, r)) for r in range(cv.repeats)]
    tasks = [(r, f) for r in range(cv.repeats) for f in range(cv.k)]

    def run_resample(task: tuple[int, int]) -> list[tuple[float, float, float | None]]:
        r, f = task
        test_idx = fold_sets[r][f]
        train_idx = np.setdiff1d(np.arange(n), test_idx)
        records = []
        for mtry in grid:
            cfg = ForestConfig(
                n_trees=forest_config.n_trees,
                mtry=mtry,
                min_node_size=forest_config.min_node_size,
                bootstrap=forest_config.bootstrap,
                seed=derive_seed(cv.seed, 3, r, f),
            )
            model = fit_forest(x[train_idx], y[train_idx], cfg)
            records.append(metrics(y[test_idx], model.predict(x[test_idx])))
        return records

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_records = list(pool.map(run_resample, tasks))
    else:
        all_records = [run_resample(t) for t in tasks]

    per_mtry = {
        mtry: aggregate_resamples([rec[i] for rec in all_records])
        for i, mtry in enumerate(grid)
    }
    return CvResult(per_mtry=per_mtry, best_mtry=select_best_mtry(per_mtry))


def fit_final_forest(
    table: FeatureTable, forest_config: ForestConfig, cv: CvConfig, best_mtry: int,
    threads: int = 1,
) -> Forest:
    """Full-data fit at the tuned mtry, on its own derived stream."""
    x, y, names = to_matrix(table)
    cfg = ForestConfig(
        n_trees=forest_config.n_trees,
        mtry=best_mtry,
        min_node_size=forest_config.min_node_size,
        bootstrap=forest_config.bootstrap,
        seed=derive_seed(cv.seed, 4),
    )
    return fit_forest(x, y, cfg, feature_names=names, threads=threads)


def scale_importance(raw: np.ndarray, names: list[str]) -> list[tuple[str, float]]:
    """Min-max scale raw importances to [0, 100], sorted descending
    (ties broken by feature name). All-equal raw values map to 100 so the
    max-is-100 table invariant holds degenerately."""
    raw = np.asarray(raw, dtype=np.float64)
    if len(raw) == 0:
        raise ValueError("importance vector is empty")
    if len(raw) != len(names):
        raise ShapeError(f"{len(raw)} importances for {len(names)} names")
    lo, hi = float(raw.min()), float(raw.max())
    if hi == lo:
        scaled = [100.0] * len(raw)
    else:
        # ratio first: the extremes land on exactly 100.0 and 0.0
        scaled = [100.0 * ((float(v) - lo) / (hi - lo)) for v in raw]
    rows = sorted(zip(names, scaled), key=lambda item: (-item[1], item[0]))
    return [(name, value) for name, value in rows]


def importance_table(forest: Forest) -> tuple[list[tuple[str, float]], dict[str, float]]:
    raw = raw_importance(forest)
    scaled = scale_importance(raw, forest.feature_names)
    return scaled, {name: float(v) for name, v in zip(forest.feature_names, raw)}


# -- report document ---------------------------------------------------------

REPORT_SCHEMA = "report-v1"

FEATURE_SET_LABELS = {"s2": "Sentinel-2", "s2+meteo": "Sentinel-2+Meteo"}


def format_cell(r2: float | None, mae: float) -> str:
    """One table cell: R^2 with MAE in parentheses, two decimals each."""
    r2_text = f"{r2:.2f}" if r2 is not None else "n/a"
    return f"{r2_text} ({mae:.2f})"


def build_report_doc(results: list[SiteResult]) -> dict:
    sites: dict[str, dict] = {}
    for res in sorted(results, key=lambda r: (r.site_id, r.feature_set)):
        m = res.cv.final
        sites.setdefault(res.site_id, {})[res.feature_set] = {
            "r2_mean": m.r2_mean,
            "r2_sd": m.r2_sd,
            "mae_mean": m.mae_mean,
            "rmse_mean": m.rmse_mean,
            "best_mtry": res.cv.best_mtry,
            "importance": [{"name": name, "scaled": value} for name, value in res.importance],
        }
    return {"schema": REPORT_SCHEMA, "sites": sites}


def render_report_text(doc: dict) -> str:
    """Plain-text tables: model skill per site and feature set, then ranked
    variable importances."""
    sites = doc["sites"]
    feature_sets = sorted({fs for per_site in sites.values() for fs in per_site})
    labels = [FEATURE_SET_LABELS.get(fs, fs) for fs in feature_sets]
    lines = ["Model skill, R^2 (MAE), resample averages of the tuned model", ""]
    width = max([len("Site")] + [len(s) for s in sites]) + 2
    col = max([len(v) for v in labels] + [11]) + 2
    header = "Site".ljust(width) + "".join(label.ljust(col) for label in labels)
    lines.append(header)
    for site in sorted(sites):
        cells = []
        for fs in feature_sets:
            entry = sites[site].get(fs)
            cells.append(format_cell(entry["r2_mean"], entry["mae_mean"]) if entry else "-")
        lines.append(site.ljust(width) + "".join(cell.ljust(col) for cell in cells))
    lines.append("")
    lines.append("Relative importance of variables (scaled 0-100)")
    for site in sorted(sites):
        for fs in feature_sets:
            entry = sites[site].get(fs)
            if entry is None:
                continue
            lines.append("")
            lines.append(f"{site} / {FEATURE_SET_LABELS.get(fs, fs)}")
            for item in entry["importance"]:
                lines.append(f"  {item['name']} {item['scaled']:.3f}")
    lines.append("")
    return "\n".join(lines)


def _metricset_to_json(m: MetricSet) -> dict:
    return {
        "rmse_mean": m.rmse_mean,
        "rmse_sd": m.rmse_sd,
        "mae_mean": m.mae_mean,
        "mae_sd": m.mae_sd,
        "r2_mean": m.r2_mean,
        "r2_sd": m.r2_sd,
        "n_resamples": m.n_resamples,
        "n_r2_resamples": m.n_r2_resamples,
    }


def _metricset_from_json(d: dict) -> MetricSet:
    return MetricSet(
        rmse_mean=d["rmse_mean"],
        rmse_sd=d["rmse_sd"],
        mae_mean=d["mae_mean"],
        mae_sd=d["mae_sd"],
        r2_mean=d["r2_mean"],
        r2_sd=d["r2_sd"],
        n_resamples=d["n_resamples"],
        n_r2_resamples=d["n_r2_resamples"],
    )


def site_result_to_doc(res: SiteResult) -> dict:
    return {
        "schema": "cv-v1",
        "site_id": res.site_id,
        "feature_set": res.feature_set,
        "n_rows": res.n_rows,
        "best_mtry": res.cv.best_mtry,
        "per_mtry": {str(m): _metricset_to_json(ms) for m, ms in sorted(res.cv.per_mtry.items())},
        "importance": [{"name": n, "scaled": v} for n, v in res.importance],
        "importance_raw": dict(sorted(res.importance_raw.items())),
    }


def site_result_from_doc(doc: dict) -> SiteResult:
    if doc.get("schema") != "cv-v1":
        raise ConfigError(f"unsupported cv document schema {doc.get('schema')!r}")
    per_mtry = {int(m): _metricset_from_json(ms) for m, ms in doc["per_mtry"].items()}
    return SiteResult(
        site_id=doc["site_id"],
        feature_set=doc["feature_set"],
        n_rows=doc["n_rows"],
        cv=CvResult(per_mtry=per_mtry, best_mtry=doc["best_mtry"]),
        importance=[(item["name"], item["scaled"]) for item in doc["importance"]],
        importance_raw=doc.get("importance_raw", {}),
    )
