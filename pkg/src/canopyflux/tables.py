"""Readers and writers for the delimited files the pipeline exchanges.

Floats are serialized with ``repr`` (shortest round-trip form), so staged
runs that re-read an intermediate CSV see bit-identical values and reruns
produce byte-identical files.

Schemas:

- ``sapflow.csv``: tree_id,timestamp_utc,delta_t_c
- ``inventory.csv``: tree_id,dbh_m,species
- ``transpiration_weekly.csv``: site_id,iso_week,transpiration_mm_day,n_days
- ``spectra_weekly.csv``: iso_week,<12 bands>,n_obs
- ``meteo_weekly.csv``: iso_week,tair_mean_c,precip_sum_mm
- ``features_<site>_<featureset>.csv``: iso_week,<predictors...>,transpiration_mm_day
"""

from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path

from .errors import InvalidInventory, InvalidReading, MalformedSeries, RowError, SchemaError
from .ingest import BANDS, WeeklyMeteo, WeeklySpectra, parse_timestamp, _check_header
from .sapflow import PlotTranspirationSeries, TreeRecord

SAPFLOW_HEADER = ["tree_id", "timestamp_utc", "delta_t_c"]
INVENTORY_HEADER = ["tree_id", "dbh_m", "species"]
TRANSPIRATION_HEADER = ["site_id", "iso_week", "transpiration_mm_day", "n_days"]
SPECTRA_HEADER = ["iso_week", *BANDS, "n_obs"]
METEO_WEEKLY_HEADER = ["iso_week", "tair_mean_c", "precip_sum_mm"]


def fmt(value: float) -> str:
    return repr(float(value))


def read_sapflow_csv(path: str | Path) -> dict[str, list[tuple[dt.datetime, float]]]:
    """Hourly temperature differences grouped by tree, in file order.

    Enforces probe physics (delta_t > 0) and strictly increasing
    timestamps per tree.
    """
    path = Path(path)
    by_tree: dict[str, list[tuple[dt.datetime, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, SAPFLOW_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise RowError(line_no, f"expected 3 fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[1])
                delta_t = float(row[2])
            except ValueError as exc:
                raise RowError(line_no, str(exc)) from exc
            if delta_t <= 0:
                raise InvalidReading(f"line {line_no}: delta_t_c must be positive, got {delta_t}")
            series = by_tree.setdefault(row[0], [])
            if series and ts <= series[-1][0]:
                raise MalformedSeries(
                    f"line {line_no}: timestamps for tree {row[0]} not strictly increasing"
                )
            series.append((ts, delta_t))
    return by_tree


def read_inventory_csv(path: str | Path) -> dict[str, TreeRecord]:
    path = Path(path)
    records: dict[str, TreeRecord] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, INVENTORY_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise RowError(line_no, f"expected 3 fields, got {len(row)}")
            tree_id = row[0]
            try:
                dbh = float(row[1])
            except ValueError as exc:
                raise RowError(line_no, str(exc)) from exc
            if dbh <= 0:
                raise InvalidInventory(f"line {line_no}: dbh_m must be positive, got {dbh}")
            if tree_id in records:
                raise InvalidInventory(f"line {line_no}: duplicate tree_id {tree_id!r}")
            records[tree_id] = TreeRecord(tree_id=tree_id, dbh=dbh, species=row[2])
    return records


def write_transpiration_weekly_csv(path: str | Path, weekly: PlotTranspirationSeries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRANSPIRATION_HEADER)
        for week, value in weekly.values:
            writer.writerow([weekly.site_id, week, fmt(value), weekly.n_days.get(week, "")])


def read_transpiration_weekly_csv(path: str | Path) -> PlotTranspirationSeries:
    path = Path(path)
    site_id = ""
    values: list[tuple[object, float]] = []
    n_days: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, TRANSPIRATION_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                site_id = row[0]
                week = row[1]
                values.append((week, float(row[2])))
                if row[3]:
                    n_days[week] = int(row[3])
            except (IndexError, ValueError) as exc:
                raise RowError(line_no, str(exc)) from exc
    return PlotTranspirationSeries(site_id=site_id, values=values, plot_radius=0.0, n_days=n_days)


def write_spectra_weekly_csv(path: str | Path, weekly: list[WeeklySpectra]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SPECTRA_HEADER)
        for w in weekly:
            writer.writerow([w.iso_week, *(fmt(w.band_means[b]) for b in BANDS), w.n_obs])


def read_spectra_weekly_csv(path: str | Path) -> list[WeeklySpectra]:
    path = Path(path)
    out: list[WeeklySpectra] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, SPECTRA_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(
                    WeeklySpectra(
                        iso_week=row[0],
                        band_means={b: float(v) for b, v in zip(BANDS, row[1:13])},
                        n_obs=int(row[13]),
                    )
                )
            except (IndexError, ValueError) as exc:
                raise RowError(line_no, str(exc)) from exc
    return out


def write_meteo_weekly_csv(path: str | Path, weekly: list[WeeklyMeteo]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METEO_WEEKLY_HEADER)
        for w in weekly:
            writer.writerow([w.iso_week, fmt(w.tair_mean), fmt(w.precip_sum)])


def read_meteo_weekly_csv(path: str | Path) -> list[WeeklyMeteo]:
    path = Path(path)
    out: list[WeeklyMeteo] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, METEO_WEEKLY_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(
                    WeeklyMeteo(iso_week=row[0], tair_mean=float(row[1]), precip_sum=float(row[2]))
                )
            except (IndexError, ValueError) as exc:
                raise RowError(line_no, str(exc)) from exc
    return out
