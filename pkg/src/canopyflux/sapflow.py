"""Tree-level sap flow to plot-scale weekly transpiration.

The chain implemented here:

1. hourly probe temperature differences -> zero-flow baseline (trailing
   rolling maximum),
2. baseline + reading -> sap flux density via the thermal-dissipation
   calibration ``Fd = a * K**b`` with flow index ``K = (dTmax - dT) / dT``,
3. hourly flux -> daily flux per tree (coverage-gated sum),
4. daily flux, weighted by per-tree sapwood area and normalized by plot
   ground area -> plot transpiration in mm/day,
5. daily plot transpiration -> ISO-week means.

Units: temperature differences in degC, flux density in m3 m-2 s-1, daily
flux in m3 m-2 day-1, sapwood area in m2, transpiration in mm/day
(1 m3 m-2 == 1000 mm of water depth).

All functions are pure; per-tree conversions are independent and may be
evaluated in any order.
"""

from __future__ import annotations

import datetime as dt
import math
from collections import deque
from dataclasses import dataclass, field

from .errors import (
    EmptyInput,
    InvalidInventory,
    InvalidReading,
    InventoryMismatch,
    MalformedSeries,
)
from .weeks import iso_week_key

SECONDS_PER_HOUR = 3600.0
MM_PER_M = 1000.0

# Universal thermal-dissipation calibration; overridable per species in config.
GRANIER_COEFFICIENT = 118.99e-6  # m3 m-2 s-1
GRANIER_EXPONENT = 1.231


@dataclass(frozen=True)
class ThermalReading:
    """One hourly probe sample: temperature difference heated minus reference."""

    tree_id: str
    timestamp: dt.datetime
    delta_t: float  # degC, > 0 by probe physics


@dataclass(frozen=True)
class TreeRecord:
    """Inventory entry carrying the sapwood-allometry input."""

    tree_id: str
    dbh: float  # m, > 0
    species: str


@dataclass
class SapFluxSeries:
    """Ordered (timestamp, flux density) samples for one tree."""

    tree_id: str
    samples: list[tuple[dt.datetime, float]]


@dataclass
class PlotTranspirationSeries:
    """Plot-scale transpiration keyed by date (daily) or ISO week (weekly)."""

    site_id: str
    values: list[tuple[object, float]]  # (date | iso week str, mm/day)
    plot_radius: float  # m
    n_days: dict[str, int] = field(default_factory=dict)  # weekly only: days per week


@dataclass
class ConversionQa:
    """Bookkeeping for the flux conversion; clamped = samples where the
    reading transiently exceeded the windowed baseline (sensor noise)."""

    n_samples: int = 0
    n_clamped: int = 0


def compute_delta_t_max(
    readings: list[tuple[dt.datetime, float]], window_days: int
) -> list[float]:
    """Zero-flow baseline per timestamp: max delta_t over the trailing
    closed window ``[t - window_days, t]``.

    ``readings`` must be non-empty and strictly increasing in time.
    """
    if not readings:
        raise EmptyInput("cannot compute baseline of an empty series")
    if window_days < 1:
        raise ValueError("window_days must be >= 1")
    window = dt.timedelta(days=window_days)
    out: list[float] = []
    buf: deque[tuple[dt.datetime, float]] = deque()  # decreasing delta_t front to back
    prev: dt.datetime | None = None
    for ts, val in readings:
        if prev is not None and ts <= prev:
            raise MalformedSeries(f"timestamps not strictly increasing at {ts.isoformat()}")
        prev = ts
        while buf and buf[-1][1] <= val:
            buf.pop()
        buf.append((ts, val))
        while buf[0][0] < ts - window:
            buf.popleft()
        out.append(buf[0][1])
    return out


def granier_flux(
    delta_t: float,
    delta_t_max: float,
    coefficient: float = GRANIER_COEFFICIENT,
    exponent: float = GRANIER_EXPONENT,
) -> float:
    """Sap flux density (m3 m-2 s-1) from one reading and its baseline.

    A reading above the baseline (negative flow index) is clamped to zero
    flux; callers track those through :class:`ConversionQa`.
    """
    if delta_t <= 0.0:
        raise InvalidReading(f"delta_t must be positive, got {delta_t}")
    k = (delta_t_max - delta_t) / delta_t
    if k <= 0.0:
        return 0.0
    return coefficient * k**exponent


def convert_tree_series(
    tree_id: str,
    readings: list[tuple[dt.datetime, float]],
    window_days: int,
    coefficient: float = GRANIER_COEFFICIENT,
    exponent: float = GRANIER_EXPONENT,
    qa: ConversionQa | None = None,
) -> SapFluxSeries:
    """Full hourly conversion for one tree: baseline, then calibration."""
    baseline = compute_delta_t_max(readings, window_days)
    samples: list[tuple[dt.datetime, float]] = []
    for (ts, d_t), d_t_max in zip(readings, baseline):
        if d_t <= 0.0:
            raise InvalidReading(f"tree {tree_id}: delta_t must be positive at {ts.isoformat()}")
        k = (d_t_max - d_t) / d_t
        if k < 0.0:
            # rolling max guarantees k >= 0; kept for direct-baseline callers
            k = 0.0
            if qa is not None:
                qa.n_clamped += 1
        flux = coefficient * k**exponent if k > 0.0 else 0.0
        samples.append((ts, flux))
        if qa is not None:
            qa.n_samples += 1
    return SapFluxSeries(tree_id=tree_id, samples=samples)


def daily_flux(series: SapFluxSeries, min_hours: int = 20) -> dict[dt.date, float]:
    """Per-day flux (m3 m-2 day-1): sum of hourly densities times 3600 s.

    Days with fewer than ``min_hours`` samples become gaps, not zeros.
    """
    by_day: dict[dt.date, list[float]] = {}
    for ts, flux in series.samples:
        by_day.setdefault(ts.date(), []).append(flux)
    out: dict[dt.date, float] = {}
    for day in sorted(by_day):
        values = by_day[day]
        if len(values) >= min_hours:
            out[day] = math.fsum(values) * SECONDS_PER_HOUR
    return out


def sapwood_area(dbh: float, alpha: float, beta: float) -> float:
    """Power-law allometry ``alpha * dbh**beta`` (m2 from m)."""
    if dbh <= 0.0:
        raise InvalidInventory(f"dbh must be positive, got {dbh}")
    if alpha <= 0.0:
        raise ValueError(f"allometry coefficient must be positive, got {alpha}")
    return alpha * dbh**beta


def plot_transpiration(
    flux_by_tree: dict[str, dict[dt.date, float]],
    areas: dict[str, float],
    plot_radius: float,
    site_id: str = "site",
    require_all_trees: bool = True,
) -> PlotTranspirationSeries:
    """Daily plot transpiration: sapwood-area-weighted flux sum over plot
    ground area, in mm/day.

    A day is emitted only when every instrumented tree reports; with
    ``require_all_trees=False`` the available subset is used instead.
    """
    if plot_radius <= 0.0:
        raise ValueError(f"plot_radius must be positive, got {plot_radius}")
    unknown = sorted(set(flux_by_tree) - set(areas))
    if unknown:
        raise InventoryMismatch(f"flux data for trees missing from inventory: {', '.join(unknown)}")
    ground_area = math.pi * plot_radius**2
    tree_ids = sorted(flux_by_tree)
    all_days = sorted({day for per_tree in flux_by_tree.values() for day in per_tree})
    values: list[tuple[object, float]] = []
    for day in all_days:
        reporting = [t for t in tree_ids if day in flux_by_tree[t]]
        if require_all_trees and len(reporting) < len(tree_ids):
            continue
        weighted = math.fsum(flux_by_tree[t][day] * areas[t] for t in reporting)
        values.append((day, weighted / ground_area * MM_PER_M))
    return PlotTranspirationSeries(site_id=site_id, values=values, plot_radius=plot_radius)


def weekly_transpiration(
    daily: PlotTranspirationSeries, min_days: int = 4
) -> PlotTranspirationSeries:
    """ISO-week means of daily transpiration; weeks with fewer than
    ``min_days`` valid days become gaps."""
    by_week: dict[str, list[float]] = {}
    for day, value in daily.values:
        by_week.setdefault(iso_week_key(day), []).append(value)
    values: list[tuple[object, float]] = []
    n_days: dict[str, int] = {}
    for week in sorted(by_week):
        days = by_week[week]
        if len(days) >= min_days:
            values.append((week, math.fsum(days) / len(days)))
            n_days[week] = len(days)
    return PlotTranspirationSeries(
        site_id=daily.site_id, values=values, plot_radius=daily.plot_radius, n_days=n_days
    )
