"""Site configuration: a flat key-value file with sections.

Every key has a documented default except ``site_id`` and the allometry
coefficients, which describe the site and must be stated. Unknown sections
or keys are hard errors so a typo in a scientific parameter cannot pass
silently. Paths are resolved relative to the config file.

Example::

    [site]
    site_id = site1
    plot_radius_m = 12.0
    feature_set = s2+meteo

    [allometry]
    alpha = 0.45
    beta = 2.02
"""

from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .evaluate import CvConfig
from .forest import ForestConfig
from .sapflow import GRANIER_COEFFICIENT, GRANIER_EXPONENT
from .synth import SynthConfig

FEATURE_SETS = ("s2", "s2+meteo")

# section -> key -> (parser, default); REQUIRED marks keys without defaults
REQUIRED = object()

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ValueError(f"expected a boolean, got {text!r}")


def _parse_mtry_grid(text: str) -> tuple[int, ...] | None:
    text = text.strip()
    if text == "auto":
        return None
    return tuple(int(v) for v in text.split(","))


def _parse_planted(text: str) -> dict[str, float]:
    out: dict[str, float] = {}
    text = text.strip()
    if not text:
        return out
    for item in text.split(","):
        name, _, weight = item.partition(":")
        if not weight:
            raise ValueError(f"expected name:weight pairs, got {item!r}")
        out[name.strip()] = float(weight)
    return out


SCHEMA: dict[str, dict[str, tuple]] = {
    "site": {
        "site_id": (str, REQUIRED),
        "plot_radius_m": (float, 12.0),
        "feature_set": (str, "s2"),
    },
    "paths": {
        "sapflow": (str, "sapflow.csv"),
        "inventory": (str, "inventory.csv"),
        "s2_samples": (str, "s2_samples.csv"),
        "meteo": (str, "meteo.csv"),
    },
    "allometry": {
        "alpha": (float, REQUIRED),
        "beta": (float, REQUIRED),
    },
    "granier": {
        "coefficient": (float, GRANIER_COEFFICIENT),
        "exponent": (float, GRANIER_EXPONENT),
        "window_days": (int, 10),
    },
    "coverage": {
        "min_hours_per_day": (int, 20),
        "min_days_per_week": (int, 4),
        "require_all_trees": (_parse_bool, True),
        "meteo_min_days": (int, 7),
        "buffer_radius_m": (float, None),  # None: use plot radius
    },
    "cv": {
        "k": (int, 5),
        "repeats": (int, 30),
        "mtry_grid": (_parse_mtry_grid, None),
        "seed": (int, 20200601),
    },
    "forest": {
        "n_trees": (int, 500),
        "min_node_size": (int, 5),
        "bootstrap": (_parse_bool, True),
    },
    "synth": {
        "n_trees": (int, 20),
        "n_weeks": (int, 30),
        "cloud_fraction": (float, 0.1),
        "snow_fraction": (float, 0.0),
        "noise_sd": (float, 0.0),
        "planted": (_parse_planted, None),  # None: generator default
        "start_date": (dt.date.fromisoformat, dt.date(2020, 6, 1)),
        "acquisitions_per_week": (int, 2),
        "band_noise_sd": (float, 0.004),
        "pixel_noise_sd": (float, 0.002),
    },
}


@dataclass
class SiteConfig:
    site_id: str
    plot_radius: float
    feature_set: str
    paths: dict[str, Path]
    alpha: float
    beta: float
    granier_coefficient: float
    granier_exponent: float
    window_days: int
    min_hours_per_day: int
    min_days_per_week: int
    require_all_trees: bool
    meteo_min_days: int
    buffer_radius: float
    cv: CvConfig
    forest: ForestConfig
    synth: SynthConfig
    config_path: Path | None = None
    raw: dict[str, dict[str, object]] = field(default_factory=dict)


def _apply_schema(parser: configparser.ConfigParser, path: Path) -> dict[str, dict[str, object]]:
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path.name}: unknown section [{section}]")
        for key in parser[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{path.name}: unknown key {key!r} in section [{section}]")
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (convert, default) in keys.items():
            if parser.has_option(section, key):
                text = parser.get(section, key)
                try:
                    values[section][key] = convert(text)
                except ValueError as exc:
                    raise ConfigError(f"{path.name}: [{section}] {key} = {text!r}: {exc}") from exc
            elif default is REQUIRED:
                raise ConfigError(f"{path.name}: missing required key {key!r} in [{section}]")
            else:
                values[section][key] = default
    return values


def _check_ranges(v: dict[str, dict[str, object]], path: Path) -> None:
    def require(cond: bool, message: str) -> None:
        if not cond:
            raise ConfigError(f"{path.name}: {message}")

    require(v["site"]["plot_radius_m"] > 0, "plot_radius_m must be > 0")
    require(v["site"]["feature_set"] in FEATURE_SETS,
            f"feature_set must be one of {FEATURE_SETS}")
    require(v["allometry"]["alpha"] > 0, "allometry alpha must be > 0")
    require(v["granier"]["coefficient"] > 0, "granier coefficient must be > 0")
    require(v["granier"]["exponent"] > 0, "granier exponent must be > 0")
    require(v["granier"]["window_days"] >= 1, "granier window_days must be >= 1")
    require(1 <= v["coverage"]["min_hours_per_day"] <= 24,
            "min_hours_per_day must be in 1..24")
    require(1 <= v["coverage"]["min_days_per_week"] <= 7,
            "min_days_per_week must be in 1..7")
    require(1 <= v["coverage"]["meteo_min_days"] <= 7, "meteo_min_days must be in 1..7")
    if v["coverage"]["buffer_radius_m"] is not None:
        require(v["coverage"]["buffer_radius_m"] > 0, "buffer_radius_m must be > 0")
    require(v["cv"]["k"] >= 2, "cv k must be >= 2")
    require(v["cv"]["repeats"] >= 1, "cv repeats must be >= 1")
    require(v["cv"]["seed"] >= 0, "cv seed must be >= 0")
    if v["cv"]["mtry_grid"] is not None:
        require(all(m >= 1 for m in v["cv"]["mtry_grid"]), "mtry_grid entries must be >= 1")
    require(v["forest"]["n_trees"] >= 1, "forest n_trees must be >= 1")
    require(v["forest"]["min_node_size"] >= 1, "forest min_node_size must be >= 1")
    require(0 <= v["synth"]["cloud_fraction"] < 1, "synth cloud_fraction must be in [0, 1)")
    require(0 <= v["synth"]["snow_fraction"] < 1, "synth snow_fraction must be in [0, 1)")
    require(v["synth"]["noise_sd"] >= 0, "synth noise_sd must be >= 0")
    require(v["synth"]["n_weeks"] >= 1, "synth n_weeks must be >= 1")
    require(v["synth"]["n_trees"] >= 1, "synth n_trees must be >= 1")
    require(v["synth"]["acquisitions_per_week"] >= 1,
            "synth acquisitions_per_week must be >= 1")


def load_config(path: str | Path, seed_override: int | None = None) -> SiteConfig:
    """Parse and validate a site config; ``seed_override`` replaces the CV
    and synthetic seeds (the CLI ``--seed`` flag)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"cannot parse {path.name}: {exc}") from exc
    v = _apply_schema(parser, path)
    _check_ranges(v, path)

    seed = int(v["cv"]["seed"]) if seed_override is None else int(seed_override)
    base = path.parent
    planted = v["synth"]["planted"]
    synth = SynthConfig(
        seed=seed,
        n_trees=v["synth"]["n_trees"],
        n_weeks=v["synth"]["n_weeks"],
        cloud_fraction=v["synth"]["cloud_fraction"],
        snow_fraction=v["synth"]["snow_fraction"],
        noise_sd=v["synth"]["noise_sd"],
        **({"planted_coefficients": planted} if planted is not None else {}),
        start_date=v["synth"]["start_date"],
        site_id=v["site"]["site_id"],
        plot_radius=v["site"]["plot_radius_m"],
        alpha=v["allometry"]["alpha"],
        beta=v["allometry"]["beta"],
        granier_coefficient=v["granier"]["coefficient"],
        granier_exponent=v["granier"]["exponent"],
        acquisitions_per_week=v["synth"]["acquisitions_per_week"],
        band_noise_sd=v["synth"]["band_noise_sd"],
        pixel_noise_sd=v["synth"]["pixel_noise_sd"],
    )
    synth.validate()
    return SiteConfig(
        site_id=v["site"]["site_id"],
        plot_radius=v["site"]["plot_radius_m"],
        feature_set=v["site"]["feature_set"],
        paths={name: base / str(p) for name, p in v["paths"].items()},
        alpha=v["allometry"]["alpha"],
        beta=v["allometry"]["beta"],
        granier_coefficient=v["granier"]["coefficient"],
        granier_exponent=v["granier"]["exponent"],
        window_days=v["granier"]["window_days"],
        min_hours_per_day=v["coverage"]["min_hours_per_day"],
        min_days_per_week=v["coverage"]["min_days_per_week"],
        require_all_trees=v["coverage"]["require_all_trees"],
        meteo_min_days=v["coverage"]["meteo_min_days"],
        buffer_radius=(
            v["coverage"]["buffer_radius_m"]
            if v["coverage"]["buffer_radius_m"] is not None
            else v["site"]["plot_radius_m"]
        ),
        cv=CvConfig(
            k=v["cv"]["k"],
            repeats=v["cv"]["repeats"],
            mtry_grid=v["cv"]["mtry_grid"],
            seed=seed,
        ),
        forest=ForestConfig(
            n_trees=v["forest"]["n_trees"],
            min_node_size=v["forest"]["min_node_size"],
            bootstrap=v["forest"]["bootstrap"],
            seed=seed,
        ),
        synth=synth,
        config_path=path,
        raw=v,
    )
