"""Weekly design matrix: join transpiration target with predictor tables.

The join is strict inner: a week is emitted only when the target and every
selected predictor source have a value for it. No imputation, no
standardization (the forest is invariant to monotone feature scaling and
importances are reported on raw inputs).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, EmptyInput, NoOverlap, RowError, SchemaError
from .ingest import BANDS, WeeklyMeteo, WeeklySpectra, _check_header
from .sapflow import PlotTranspirationSeries

FEATURE_SET_S2 = "s2"
FEATURE_SET_S2_METEO = "s2+meteo"

METEO_PREDICTORS = ("Tair", "Prpc")


@dataclass(frozen=True)
class FeatureRow:
    iso_week: str
    predictors: dict[str, float]
    target: float  # transpiration, mm/day


@dataclass
class FeatureTable:
    site_id: str
    predictor_names: list[str]
    rows: list[FeatureRow]  # sorted by week

    def weeks(self) -> list[str]:
        return [r.iso_week for r in self.rows]


def join_weekly(
    transpiration: PlotTranspirationSeries,
    spectra: list[WeeklySpectra],
    meteo: list[WeeklyMeteo] | None,
    feature_set: str = FEATURE_SET_S2,
) -> FeatureTable:
    """Inner-join weekly sources into a modeling table.

    ``feature_set`` selects the predictor columns: ``s2`` uses the 12 bands
    only, ``s2+meteo`` appends air temperature and precipitation.
    """
    if feature_set not in (FEATURE_SET_S2, FEATURE_SET_S2_METEO):
        raise ValueError(f"unknown feature_set {feature_set!r}")
    target = {week: value for week, value in transpiration.values}
    spec = {w.iso_week: w for w in spectra}
    names = list(BANDS)
    sources: dict[str, set[str]] = {"transpiration": set(target), "spectra": set(spec)}
    met: dict[str, WeeklyMeteo] = {}
    if feature_set == FEATURE_SET_S2_METEO:
        if meteo is None:
            raise ValueError("feature_set s2+meteo requires a meteo table")
        met = {w.iso_week: w for w in meteo}
        names += list(METEO_PREDICTORS)
        sources["meteo"] = set(met)
    common = set.intersection(*sources.values())
    if not common:
        coverage = "; ".join(
            f"{name}: {len(weeks)} weeks"
            + (f" ({min(weeks)}..{max(weeks)})" if weeks else "")
            for name, weeks in sources.items()
        )
        raise NoOverlap(f"no week covered by every source; coverage: {coverage}")
    rows: list[FeatureRow] = []
    for week in sorted(common):
        predictors = dict(spec[week].band_means)
        if met:
            predictors["Tair"] = met[week].tair_mean
            predictors["Prpc"] = met[week].precip_sum
        rows.append(FeatureRow(iso_week=week, predictors=predictors, target=target[week]))
    return FeatureTable(site_id=transpiration.site_id, predictor_names=names, rows=rows)


def to_matrix(table: FeatureTable) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Numeric design matrix: column j of X corresponds to names[j]."""
    if not table.rows:
        raise EmptyInput("feature table has no rows")
    names = list(table.predictor_names)
    x = np.empty((len(table.rows), len(names)), dtype=np.float64)
    y = np.empty(len(table.rows), dtype=np.float64)
    for i, row in enumerate(table.rows):
        for j, name in enumerate(names):
            value = row.predictors[name]
            if not math.isfinite(value):
                raise DataError(f"non-finite predictor at week {row.iso_week}, column {name}")
            x[i, j] = value
        if not math.isfinite(row.target):
            raise DataError(f"non-finite target at week {row.iso_week}, column target")
        y[i] = row.target
    return x, y, names


def from_matrix(
    x: np.ndarray, y: np.ndarray, names: list[str], weeks: list[str], site_id: str
) -> FeatureTable:
    """Inverse of :func:`to_matrix` (used by round-trip checks and the CSV reader)."""
    rows = [
        FeatureRow(
            iso_week=week,
            predictors={name: float(x[i, j]) for j, name in enumerate(names)},
            target=float(y[i]),
        )
        for i, week in enumerate(weeks)
    ]
    return FeatureTable(site_id=site_id, predictor_names=list(names), rows=rows)


def features_filename(site_id: str, feature_set: str) -> str:
    token = feature_set.replace("+", "_")
    return f"features_{site_id}_{token}.csv"


def write_features_csv(path: str | Path, table: FeatureTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iso_week", *table.predictor_names, "transpiration_mm_day"])
        for row in table.rows:
            writer.writerow(
                [
                    row.iso_week,
                    *(repr(row.predictors[n]) for n in table.predictor_names),
                    repr(row.target),
                ]
            )


def read_features_csv(path: str | Path, site_id: str = "") -> FeatureTable:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 3:
            raise SchemaError("iso_week", f"{path.name} lacks a feature-table header")
        if header[0] != "iso_week" or header[-1] != "transpiration_mm_day":
            raise SchemaError(header[0], "expected iso_week,<predictors...>,transpiration_mm_day")
        names = header[1:-1]
        rows: list[FeatureRow] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise RowError(line_no, f"expected {len(header)} fields, got {len(row)}")
            try:
                predictors = {n: float(v) for n, v in zip(names, row[1:-1])}
                rows.append(FeatureRow(iso_week=row[0], predictors=predictors, target=float(row[-1])))
            except ValueError as exc:
                raise RowError(line_no, str(exc)) from exc
    return FeatureTable(site_id=site_id, predictor_names=names, rows=rows)
