"""Matplotlib figures rendered by the report stage, next to the delimited
output: ranked variable importance and the mtry tuning curve."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluate import FEATURE_SET_LABELS, SiteResult


def save_importance_figure(result: SiteResult, path: str | Path) -> None:
    names = [name for name, _ in result.importance]
    values = [value for _, value in result.importance]
    fig, ax = plt.subplots(figsize=(6.0, 0.35 * len(names) + 1.2))
    ax.barh(range(len(names)), values, color="#2a6f97")
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlim(0, 105)
    ax.set_xlabel("relative importance (0-100)")
    label = FEATURE_SET_LABELS.get(result.feature_set, result.feature_set)
    ax.set_title(f"{result.site_id} / {label}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_mtry_curve(result: SiteResult, path: str | Path) -> None:
    grid = sorted(result.cv.per_mtry)
    rmse = [result.cv.per_mtry[m].rmse_mean for m in grid]
    sd = [result.cv.per_mtry[m].rmse_sd for m in grid]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.errorbar(grid, rmse, yerr=sd, marker="o", color="#2a6f97", capsize=3)
    ax.axvline(result.cv.best_mtry, color="#bc4749", linestyle="--",
               label=f"best mtry = {result.cv.best_mtry}")
    ax.set_xlabel("mtry (features sampled per split)")
    ax.set_ylabel("cross-validated RMSE (mm/day)")
    label = FEATURE_SET_LABELS.get(result.feature_set, result.feature_set)
    ax.set_title(f"{result.site_id} / {label}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
