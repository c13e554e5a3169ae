"""Stage orchestration: each CLI subcommand maps to one function here.

Stages communicate only through files, so running them one by one
produces bit-identical artifacts to the all-in-one ``pipeline`` run.
Every stage writes a ``manifest_<stage>.json`` with config and file
hashes.
"""

from __future__ import annotations

import json
import logging
import shutil
from pathlib import Path

from . import evaluate, figures, sapflow, svgplot, synth, tables
from .config import SiteConfig
from .errors import DataError
from .features import (
    features_filename,
    join_weekly,
    read_features_csv,
    write_features_csv,
)
from .forest import save_forest
from .ingest import buffer_average, parse_meteo_csv, parse_s2_csv, qa_filter, weekly_bands, weekly_meteo
from .manifest import write_manifest

log = logging.getLogger("canopyflux")


def _fs_token(feature_set: str) -> str:
    return feature_set.replace("+", "_")


def _needs_meteo(cfg: SiteConfig) -> bool:
    return cfg.feature_set == "s2+meteo"


def stage_synth(cfg: SiteConfig, out_dir: Path, seed_override: int | None = None) -> None:
    """Generate the four input CSVs (at the configured input paths) plus the
    truth sidecar."""
    target_dir = cfg.config_path.parent if cfg.config_path else out_dir
    paths = synth.generate(cfg.synth, target_dir)
    for name in ("sapflow", "inventory", "s2_samples", "meteo"):
        want = cfg.paths[name]
        if want.resolve() != paths[name].resolve():
            want.parent.mkdir(parents=True, exist_ok=True)
            shutil.move(paths[name], want)
            paths[name] = want
    write_manifest(out_dir, "synth", cfg.config_path, {}, paths, seed_override)
    log.info("synth: wrote %d artifacts to %s", len(paths), target_dir)


def stage_ingest(cfg: SiteConfig, out_dir: Path, seed_override: int | None = None) -> None:
    """Raw inputs -> weekly transpiration, spectra, and meteo tables."""
    inputs: dict[str, Path] = {}
    outputs: dict[str, Path] = {}

    for name in ("sapflow", "inventory", "s2_samples"):
        if not cfg.paths[name].is_file():
            raise DataError(f"input file not found: {cfg.paths[name]}")
        inputs[name] = cfg.paths[name]

    by_tree = tables.read_sapflow_csv(cfg.paths["sapflow"])
    inventory = tables.read_inventory_csv(cfg.paths["inventory"])
    qa = sapflow.ConversionQa()
    flux_by_tree = {}
    for tree_id, readings in sorted(by_tree.items()):
        series = sapflow.convert_tree_series(
            tree_id,
            readings,
            cfg.window_days,
            cfg.granier_coefficient,
            cfg.granier_exponent,
            qa,
        )
        flux_by_tree[tree_id] = sapflow.daily_flux(series, cfg.min_hours_per_day)
    if qa.n_clamped:
        log.warning("ingest: clamped %d/%d readings above the baseline", qa.n_clamped, qa.n_samples)
    areas = {
        tree_id: sapflow.sapwood_area(rec.dbh, cfg.alpha, cfg.beta)
        for tree_id, rec in inventory.items()
    }
    daily = sapflow.plot_transpiration(
        flux_by_tree, areas, cfg.plot_radius, cfg.site_id, cfg.require_all_trees
    )
    weekly = sapflow.weekly_transpiration(daily, cfg.min_days_per_week)
    outputs["transpiration_weekly"] = out_dir / "transpiration_weekly.csv"
    tables.write_transpiration_weekly_csv(outputs["transpiration_weekly"], weekly)

    samples = parse_s2_csv(cfg.paths["s2_samples"])
    clear = qa_filter(samples)
    log.info("ingest: %d/%d spectral samples pass QA", len(clear), len(samples))
    spectra = weekly_bands(buffer_average(clear, cfg.buffer_radius))
    outputs["spectra_weekly"] = out_dir / "spectra_weekly.csv"
    tables.write_spectra_weekly_csv(outputs["spectra_weekly"], spectra)

    if cfg.paths["meteo"].is_file():
        inputs["meteo"] = cfg.paths["meteo"]
        meteo = weekly_meteo(parse_meteo_csv(cfg.paths["meteo"]), cfg.meteo_min_days)
        outputs["meteo_weekly"] = out_dir / "meteo_weekly.csv"
        tables.write_meteo_weekly_csv(outputs["meteo_weekly"], meteo)
    elif _needs_meteo(cfg):
        raise DataError(f"input file not found: {cfg.paths['meteo']} (required by feature_set s2+meteo)")
    else:
        log.info("ingest: no meteo file at %s, skipping (feature_set s2)", cfg.paths["meteo"])

    write_manifest(out_dir, "ingest", cfg.config_path, inputs, outputs, seed_override)


def stage_features(cfg: SiteConfig, out_dir: Path, seed_override: int | None = None) -> None:
    """Weekly tables -> joined design matrix CSV."""
    inputs = {
        "transpiration_weekly": out_dir / "transpiration_weekly.csv",
        "spectra_weekly": out_dir / "spectra_weekly.csv",
    }
    for name, path in inputs.items():
        if not path.is_file():
            raise DataError(f"missing {name} table: {path} (run the ingest stage first)")
    transpiration = tables.read_transpiration_weekly_csv(inputs["transpiration_weekly"])
    spectra = tables.read_spectra_weekly_csv(inputs["spectra_weekly"])
    meteo = None
    if _needs_meteo(cfg):
        meteo_path = out_dir / "meteo_weekly.csv"
        if not meteo_path.is_file():
            raise DataError(f"missing meteo_weekly table: {meteo_path} (run the ingest stage first)")
        inputs["meteo_weekly"] = meteo_path
        meteo = tables.read_meteo_weekly_csv(meteo_path)
    table = join_weekly(transpiration, spectra, meteo, cfg.feature_set)
    out_path = out_dir / features_filename(cfg.site_id, cfg.feature_set)
    write_features_csv(out_path, table)
    log.info("features: %d weeks, %d predictors", len(table.rows), len(table.predictor_names))
    write_manifest(out_dir, "features", cfg.config_path, inputs, {"features": out_path},
                   seed_override)


def stage_train(
    cfg: SiteConfig, out_dir: Path, seed_override: int | None = None, threads: int = 1
) -> None:
    """Tune mtry by repeated CV, fit the final forest, persist everything."""
    token = _fs_token(cfg.feature_set)
    features_path = out_dir / features_filename(cfg.site_id, cfg.feature_set)
    if not features_path.is_file():
        raise DataError(f"missing features table: {features_path} (run the features stage first)")
    table = read_features_csv(features_path, cfg.site_id)

    cv_result = evaluate.repeated_cv(table, cfg.forest, cfg.cv, threads=threads)
    model = evaluate.fit_final_forest(table, cfg.forest, cfg.cv, cv_result.best_mtry,
                                      threads=threads)
    scaled, raw = evaluate.importance_table(model)
    result = evaluate.SiteResult(
        site_id=cfg.site_id,
        feature_set=cfg.feature_set,
        n_rows=len(table.rows),
        cv=cv_result,
        importance=scaled,
        importance_raw=raw,
    )

    outputs = {
        "model": out_dir / f"model_{cfg.site_id}_{token}.json",
        "cv": out_dir / f"cv_{cfg.site_id}_{token}.json",
        "report": out_dir / "report.json",
    }
    save_forest(model, outputs["model"])
    outputs["cv"].write_text(
        json.dumps(evaluate.site_result_to_doc(result), sort_keys=True, separators=(",", ":"))
    )
    doc = evaluate.build_report_doc(_collect_results(out_dir))
    outputs["report"].write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    final = cv_result.final
    log.info(
        "train: best mtry %d, RMSE %.3f, R^2 %s",
        cv_result.best_mtry,
        final.rmse_mean,
        f"{final.r2_mean:.3f}" if final.r2_mean is not None else "n/a",
    )
    write_manifest(out_dir, "train", cfg.config_path, {"features": features_path}, outputs,
                   seed_override)


def _collect_results(out_dir: Path) -> list[evaluate.SiteResult]:
    results = []
    for path in sorted(out_dir.glob("cv_*.json")):
        results.append(evaluate.site_result_from_doc(json.loads(path.read_text())))
    return results


def stage_report(cfg: SiteConfig, out_dir: Path, seed_override: int | None = None) -> str:
    """Collect cv results in the out dir into report.json, a plain-text
    table, and rendered figures. Returns the text for stdout."""
    results = _collect_results(out_dir)
    if not results:
        raise DataError(f"no cv_*.json results in {out_dir} (run the train stage first)")
    inputs = {
        f"cv_{r.site_id}_{_fs_token(r.feature_set)}": out_dir
        / f"cv_{r.site_id}_{_fs_token(r.feature_set)}.json"
        for r in results
    }
    doc = evaluate.build_report_doc(results)
    text = evaluate.render_report_text(doc)
    outputs = {
        "report": out_dir / "report.json",
        "report_txt": out_dir / "report.txt",
    }
    outputs["report"].write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")))
    outputs["report_txt"].write_text(text)
    for r in results:
        token = _fs_token(r.feature_set)
        imp_path = out_dir / f"importance_{r.site_id}_{token}.png"
        curve_path = out_dir / f"cv_rmse_{r.site_id}_{token}.png"
        figures.save_importance_figure(r, imp_path)
        figures.save_mtry_curve(r, curve_path)
        outputs[imp_path.stem] = imp_path
        outputs[curve_path.stem] = curve_path
    write_manifest(out_dir, "report", cfg.config_path, inputs, outputs, seed_override)
    return text


def stage_plot(cfg: SiteConfig, out_dir: Path, seed_override: int | None = None) -> None:
    """Weekly transpiration CSV -> SVG line chart."""
    source = out_dir / "transpiration_weekly.csv"
    if not source.is_file():
        raise DataError(f"missing transpiration table: {source} (run the ingest stage first)")
    weekly = tables.read_transpiration_weekly_csv(source)
    out_path = out_dir / f"transpiration_{cfg.site_id}.svg"
    svgplot.write_weekly_series_svg(out_path, weekly)
    write_manifest(out_dir, "plot", cfg.config_path, {"transpiration_weekly": source},
                   {"svg": out_path}, seed_override)


PIPELINE_STAGES = ("ingest", "features", "train", "report", "plot")


def stage_pipeline(
    cfg: SiteConfig, out_dir: Path, seed_override: int | None = None, threads: int = 1
) -> str:
    """Run ingest -> features -> train -> report -> plot through the same
    file-based interfaces as the staged subcommands."""
    stage_ingest(cfg, out_dir, seed_override)
    stage_features(cfg, out_dir, seed_override)
    stage_train(cfg, out_dir, seed_override, threads)
    text = stage_report(cfg, out_dir, seed_override)
    stage_plot(cfg, out_dir, seed_override)
    return text
