"""Sentinel-2 sample and station-meteorology ingestion.

Per-pixel L2A band samples arrive as CSV rows with reflectances on the
archive's integer 0..10000 scale plus precomputed cloud/snow booleans
(mask derivation happens upstream, in the export tool). This module
scales, QA-filters, buffer-averages per acquisition, and aggregates both
spectra and meteorology to ISO weeks.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateRecord, RowError, SchemaError
from .weeks import iso_week_key

# The 12 usable L2A surface-reflectance bands (B10 is absent from L2A).
BANDS = ("B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B11", "B12")

REFLECTANCE_SCALE = 1e-4  # archive integers -> unitless surface reflectance

S2_HEADER = ["timestamp_utc", "pixel_id", "distance_m", *BANDS, "cloud", "snow"]
METEO_HEADER = ["date", "tair_c", "precip_mm"]


@dataclass(frozen=True)
class SpectralSample:
    """One (acquisition, pixel) record after scaling."""

    timestamp: dt.datetime
    pixel_id: str
    distance: float  # m from site center
    bands: dict[str, float]  # keyed by BANDS, reflectance in [0, 1]
    cloud: bool
    snow: bool


@dataclass(frozen=True)
class AcquisitionMean:
    """Buffer-averaged bands for one acquisition timestamp."""

    timestamp: dt.datetime
    bands: dict[str, float]
    n_pixels: int


@dataclass(frozen=True)
class WeeklySpectra:
    iso_week: str
    band_means: dict[str, float]
    n_obs: int  # contributing acquisitions


@dataclass(frozen=True)
class MeteoDaily:
    date: dt.date
    tair: float  # degC
    precip: float  # mm/day, >= 0


@dataclass(frozen=True)
class WeeklyMeteo:
    iso_week: str
    tair_mean: float  # degC
    precip_sum: float  # mm/week


def parse_timestamp(text: str) -> dt.datetime:
    """ISO-8601 instant; a trailing Z is accepted as UTC."""
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return dt.datetime.fromisoformat(text)


def _check_header(actual: list[str] | None, expected: list[str], path: Path) -> None:
    if actual is None:
        raise SchemaError(expected[0], f"{path.name} is empty, expected header")
    for col in expected:
        if col not in actual:
            raise SchemaError(col, f"missing from {path.name}")
    if actual != expected:
        extra = [c for c in actual if c not in expected]
        if extra:
            raise SchemaError(extra[0], f"unexpected column in {path.name}")
        raise SchemaError(actual[0], f"column order in {path.name} must be {','.join(expected)}")


def parse_s2_csv(path: str | Path) -> list[SpectralSample]:
    """Read ``s2_samples.csv``; reflectance integers are divided by 10^4."""
    path = Path(path)
    samples: list[SpectralSample] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, S2_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(S2_HEADER):
                raise RowError(line_no, f"expected {len(S2_HEADER)} fields, got {len(row)}")
            try:
                ts = parse_timestamp(row[0])
                pixel_id = row[1]
                distance = float(row[2])
                raw = [int(v) for v in row[3:15]]
                cloud_raw, snow_raw = row[15], row[16]
            except ValueError as exc:
                raise RowError(line_no, str(exc)) from exc
            if distance < 0:
                raise RowError(line_no, f"distance_m must be >= 0, got {distance}")
            for name, value in zip(BANDS, raw):
                if not 0 <= value <= 10000:
                    raise RowError(line_no, f"{name} reflectance {value} outside 0..10000")
            if cloud_raw not in ("0", "1") or snow_raw not in ("0", "1"):
                raise RowError(line_no, "cloud and snow flags must be 0 or 1")
            samples.append(
                SpectralSample(
                    timestamp=ts,
                    pixel_id=pixel_id,
                    distance=distance,
                    bands={name: value * REFLECTANCE_SCALE for name, value in zip(BANDS, raw)},
                    cloud=cloud_raw == "1",
                    snow=snow_raw == "1",
                )
            )
    return samples


def parse_meteo_csv(path: str | Path) -> list[MeteoDaily]:
    """Read ``meteo.csv`` (daily temperature and precipitation)."""
    path = Path(path)
    records: list[MeteoDaily] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        _check_header(header, METEO_HEADER, path)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise RowError(line_no, f"expected 3 fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0])
                tair = float(row[1])
                precip = float(row[2])
            except ValueError as exc:
                raise RowError(line_no, str(exc)) from exc
            if precip < 0:
                raise RowError(line_no, f"precip_mm must be >= 0, got {precip}")
            records.append(MeteoDaily(date=date, tair=tair, precip=precip))
    return records


def qa_filter(samples: list[SpectralSample]) -> list[SpectralSample]:
    """Keep only cloud-free, snow-free samples. Idempotent."""
    return [s for s in samples if not s.cloud and not s.snow]


def buffer_average(samples: list[SpectralSample], radius: float) -> list[AcquisitionMean]:
    """Arithmetic per-band mean over pixels within ``radius`` of the site
    center, per acquisition timestamp. Timestamps with no in-radius pixels
    are omitted."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    by_ts: dict[dt.datetime, list[SpectralSample]] = {}
    for s in samples:
        if s.distance <= radius:
            by_ts.setdefault(s.timestamp, []).append(s)
    out: list[AcquisitionMean] = []
    for ts in sorted(by_ts):
        group = by_ts[ts]
        means = {b: math.fsum(s.bands[b] for s in group) / len(group) for b in BANDS}
        out.append(AcquisitionMean(timestamp=ts, bands=means, n_pixels=len(group)))
    return out


def weekly_bands(acquisitions: list[AcquisitionMean]) -> list[WeeklySpectra]:
    """Mean of acquisition means per ISO week; zero-acquisition weeks are gaps."""
    by_week: dict[str, list[AcquisitionMean]] = {}
    for acq in acquisitions:
        by_week.setdefault(iso_week_key(acq.timestamp.date()), []).append(acq)
    out: list[WeeklySpectra] = []
    for week in sorted(by_week):
        group = by_week[week]
        means = {b: math.fsum(a.bands[b] for a in group) / len(group) for b in BANDS}
        out.append(WeeklySpectra(iso_week=week, band_means=means, n_obs=len(group)))
    return out


def weekly_meteo(daily: list[MeteoDaily], min_days: int = 7) -> list[WeeklyMeteo]:
    """Weekly aggregation: temperature by mean, precipitation by sum.

    Only weeks with at least ``min_days`` daily records are emitted
    (default: complete 7-day weeks).
    """
    seen: set[dt.date] = set()
    by_week: dict[str, list[MeteoDaily]] = {}
    for rec in daily:
        if rec.date in seen:
            raise DuplicateRecord(f"duplicate meteo record for {rec.date.isoformat()}")
        seen.add(rec.date)
        by_week.setdefault(iso_week_key(rec.date), []).append(rec)
    out: list[WeeklyMeteo] = []
    for week in sorted(by_week):
        group = sorted(by_week[week], key=lambda r: r.date)
        if len(group) < min_days:
            continue
        out.append(
            WeeklyMeteo(
                iso_week=week,
                tair_mean=math.fsum(r.tair for r in group) / len(group),
                precip_sum=math.fsum(r.precip for r in group),
            )
        )
    return out
