"""Deterministic synthetic inputs with a planted spectra-transpiration link.

Produces the four input CSVs plus a ``truth.json`` sidecar recording the
weekly transpiration the pipeline should recover. The sap-flow file is
built by inverting the processing chain: pick the weekly target, spread it
over trees and days, shape it into an hourly flux profile, and invert the
thermal-dissipation calibration to get temperature differences. Nights sit
exactly on the zero-flow plateau, so the pipeline's rolling-maximum
baseline recovers the plateau and, with ``noise_sd = 0``, the whole chain
round-trips to the sidecar values up to float rounding.

Band columns follow ``base + weight * z`` where ``z`` is the standardized
clean signal and the weights come from ``planted_coefficients``; bands
without a weight are noise around their base reflectance. Cloudy or snowy
acquisitions get heavily biased values, so skipping the QA filter is
punished.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, IoError
from .ingest import BANDS
from .rng import derive_rng
from .sapflow import GRANIER_COEFFICIENT, GRANIER_EXPONENT, MM_PER_M, sapwood_area
from .weeks import iso_week_key

# Example-only Picea abies sapwood allometry (m^2 from m); not a literature value.
EXAMPLE_SPRUCE_ALPHA = 0.45
EXAMPLE_SPRUCE_BETA = 2.02

BAND_BASE = {
    "B1": 0.04, "B2": 0.05, "B3": 0.07, "B4": 0.06, "B5": 0.12, "B6": 0.25,
    "B7": 0.30, "B8": 0.32, "B8A": 0.34, "B9": 0.35, "B11": 0.22, "B12": 0.14,
}

DEFAULT_PLANTED = {"B11": -0.050, "B12": -0.035, "B8": 0.040, "B4": -0.020}

# Per-pixel distances from the site center; the last one sits outside the
# default 12 m buffer and carries corrupted values.
PIXEL_DISTANCES = (3.0, 5.5, 7.0, 9.5, 11.5, 14.0)
OUTSIDE_BIAS = 0.15

DAY_HOURS = range(6, 20)  # daytime flux window; all other hours are zero flow


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_trees: int = 20  # instrumented trees per plot
    n_weeks: int = 30
    cloud_fraction: float = 0.1
    snow_fraction: float = 0.0
    noise_sd: float = 0.0  # sd of weekly target noise, mm/day
    planted_coefficients: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_PLANTED)
    )
    start_date: dt.date = dt.date(2020, 6, 1)  # must be a Monday
    site_id: str = "site1"
    plot_radius: float = 12.0
    alpha: float = EXAMPLE_SPRUCE_ALPHA
    beta: float = EXAMPLE_SPRUCE_BETA
    granier_coefficient: float = GRANIER_COEFFICIENT
    granier_exponent: float = GRANIER_EXPONENT
    acquisitions_per_week: int = 2
    band_noise_sd: float = 0.004
    pixel_noise_sd: float = 0.002

    def validate(self) -> None:
        if self.start_date.isoweekday() != 1:
            raise ConfigError("synth start_date must be a Monday (ISO week start)")
        if not 0 <= self.cloud_fraction < 1:
            raise ConfigError(f"cloud_fraction must be in [0, 1), got {self.cloud_fraction}")
        if not 0 <= self.snow_fraction < 1:
            raise ConfigError(f"snow_fraction must be in [0, 1), got {self.snow_fraction}")
        if self.noise_sd < 0:
            raise ConfigError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if self.n_trees < 1 or self.n_weeks < 1:
            raise ConfigError("n_trees and n_weeks must be >= 1")
        unknown = set(self.planted_coefficients) - set(BANDS)
        if unknown:
            raise ConfigError(f"planted coefficients for unknown bands: {sorted(unknown)}")


def clean_signal(config: SynthConfig) -> np.ndarray:
    """Seasonal decline with superimposed peaks, mm/day, always positive."""
    w = np.arange(config.n_weeks, dtype=np.float64)
    span = max(config.n_weeks - 1, 1)
    return 1.7 + 1.1 * np.cos(math.pi * w / span) + 0.45 * np.sin(2 * math.pi * w / 6.5 + 0.9)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def generate(config: SynthConfig, out_dir: str | Path) -> dict[str, Path]:
    """Write sapflow.csv, inventory.csv, s2_samples.csv, meteo.csv, and
    truth.json into ``out_dir``; returns the paths keyed by artifact name."""
    config.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out}: {exc}") from exc

    signal = clean_signal(config)
    noise_rng = derive_rng(config.seed, 5, 1)
    noise = noise_rng.normal(0.0, config.noise_sd, size=config.n_weeks) if config.noise_sd > 0 \
        else np.zeros(config.n_weeks)
    target = np.maximum(signal + noise, 0.02)

    weeks = [
        iso_week_key(config.start_date + dt.timedelta(weeks=w)) for w in range(config.n_weeks)
    ]

    paths = {
        "sapflow": out / "sapflow.csv",
        "inventory": out / "inventory.csv",
        "s2_samples": out / "s2_samples.csv",
        "meteo": out / "meteo.csv",
        "truth": out / "truth.json",
    }

    _write_inventory_and_sapflow(config, target, paths)
    _write_s2(config, signal, paths["s2_samples"])
    _write_meteo(config, signal, paths["meteo"])

    truth = {
        "site_id": config.site_id,
        "weeks": weeks,
        "target_mm_day": target.tolist(),
        "clean_signal_mm_day": signal.tolist(),
        "noise_sd": config.noise_sd,
        "seed": config.seed,
    }
    try:
        paths["truth"].write_text(json.dumps(truth, sort_keys=True, separators=(",", ":")))
    except OSError as exc:
        raise IoError(f"cannot write {paths['truth']}: {exc}") from exc
    return paths


def _write_inventory_and_sapflow(
    config: SynthConfig, target: np.ndarray, paths: dict[str, Path]
) -> None:
    tree_rng = derive_rng(config.seed, 5, 2)
    tree_ids = [f"tree_{i + 1:03d}" for i in range(config.n_trees)]
    dbh = [float(v) for v in tree_rng.uniform(0.22, 0.45, size=config.n_trees)]
    # Round-trip through repr so the generator and the pipeline use the
    # bit-identical DBH the CSV carries.
    dbh = [float(_fmt(v)) for v in dbh]
    dt_max = [float(v) for v in tree_rng.uniform(8.0, 10.0, size=config.n_trees)]
    areas = [sapwood_area(d, config.alpha, config.beta) for d in dbh]

    _write_csv(
        paths["inventory"],
        ["tree_id", "dbh_m", "species"],
        [[tid, _fmt(d), "Picea abies"] for tid, d in zip(tree_ids, dbh)],
    )

    weights = [math.sin(math.pi * (h - 5.5) / 14.0) if h in DAY_HOURS else 0.0 for h in range(24)]
    weight_sum = math.fsum(weights)
    ground_area = math.pi * config.plot_radius**2
    inv_exp = 1.0 / config.granier_exponent

    rows: list[list] = []
    for i, tid in enumerate(tree_ids):
        for w in range(config.n_weeks):
            # daily flux (m3 m-2 day-1) this tree must carry so the weighted
            # plot sum equals the weekly target
            fd_daily = target[w] * ground_area / (MM_PER_M * config.n_trees * areas[i])
            for d in range(7):
                day = config.start_date + dt.timedelta(weeks=w, days=d)
                for h in range(24):
                    if weights[h] > 0.0:
                        flux = fd_daily * weights[h] / (3600.0 * weight_sum)
                        k = (flux / config.granier_coefficient) ** inv_exp
                        delta_t = dt_max[i] / (1.0 + k)
                    else:
                        delta_t = dt_max[i]  # zero-flow plateau
                    ts = f"{day.isoformat()}T{h:02d}:00:00Z"
                    rows.append([tid, ts, _fmt(delta_t)])
    _write_csv(paths["sapflow"], ["tree_id", "timestamp_utc", "delta_t_c"], rows)


def _write_s2(config: SynthConfig, signal: np.ndarray, path: Path) -> None:
    s2_rng = derive_rng(config.seed, 5, 3)
    flag_rng = derive_rng(config.seed, 5, 4)
    z = (signal - signal.mean()) / signal.std() if signal.std() > 0 else np.zeros_like(signal)
    acq_days = [1, 4, 2, 5, 0, 3][: config.acquisitions_per_week]  # weekday offsets

    rows: list[list] = []
    for w in range(config.n_weeks):
        for a in range(config.acquisitions_per_week):
            day = config.start_date + dt.timedelta(weeks=w, days=acq_days[a])
            ts = f"{day.isoformat()}T10:20:00Z"
            cloud = bool(flag_rng.random() < config.cloud_fraction)
            snow = bool(flag_rng.random() < config.snow_fraction)
            acq_noise = s2_rng.normal(0.0, config.band_noise_sd, size=len(BANDS))
            for p, distance in enumerate(PIXEL_DISTANCES):
                jitter = s2_rng.normal(0.0, config.pixel_noise_sd, size=len(BANDS))
                values = []
                for bi, band in enumerate(BANDS):
                    value = (
                        BAND_BASE[band]
                        + config.planted_coefficients.get(band, 0.0) * z[w]
                        + acq_noise[bi]
                        + jitter[bi]
                    )
                    if distance > 12.0:
                        value += OUTSIDE_BIAS
                    if cloud:
                        value += 0.25
                    if snow and band in ("B2", "B3", "B4"):
                        value += 0.30
                    values.append(int(round(min(max(value, 1e-4), 0.9999) * 10000)))
                rows.append(
                    [ts, f"px_{p + 1}", _fmt(distance), *values, int(cloud), int(snow)]
                )
    _write_csv(
        path,
        ["timestamp_utc", "pixel_id", "distance_m", *BANDS, "cloud", "snow"],
        rows,
    )


def _write_meteo(config: SynthConfig, signal: np.ndarray, path: Path) -> None:
    rng = derive_rng(config.seed, 5, 5)
    z = (signal - signal.mean()) / signal.std() if signal.std() > 0 else np.zeros_like(signal)
    rows: list[list] = []
    for w in range(config.n_weeks):
        for d in range(7):
            day = config.start_date + dt.timedelta(weeks=w, days=d)
            tair = 7.0 + 6.0 * z[w] + rng.normal(0.0, 1.5)
            wet = rng.random() < 0.45
            precip = float(rng.exponential(2.5)) if wet else 0.0
            rows.append([day.isoformat(), _fmt(tair), _fmt(precip)])
    _write_csv(path, ["date", "tair_c", "precip_mm"], rows)
