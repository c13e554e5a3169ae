"""Command-line front-end.

``canopyflux <subcommand> --config <path> [--out-dir <path>] [--seed <u64>]``

Subcommands: synth, ingest, features, train, report, plot, pipeline.
Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal error.
Set ``CANOPYFLUX_LOG`` to DEBUG/INFO/WARNING to control verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__, pipeline
from .config import load_config
from .errors import ConfigError, DataError, IoError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

STAGES = {
    "synth": pipeline.stage_synth,
    "ingest": pipeline.stage_ingest,
    "features": pipeline.stage_features,
    "train": pipeline.stage_train,
    "report": pipeline.stage_report,
    "plot": pipeline.stage_plot,
    "pipeline": pipeline.stage_pipeline,
}

THREADED = ("train", "pipeline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="canopyflux",
        description="Weekly plot-scale canopy transpiration: sap-flow upscaling, "
        "Sentinel-2/meteo ingestion, random-forest modelling, reporting.",
    )
    parser.add_argument("--version", action="version", version=f"canopyflux {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    help_text = {
        "synth": "generate deterministic synthetic input CSVs plus a truth sidecar",
        "ingest": "convert raw inputs to weekly transpiration/spectra/meteo tables",
        "features": "join weekly tables into the modeling design matrix",
        "train": "tune mtry by repeated cross-validation and fit the final forest",
        "report": "render report.json, plain-text tables, and figures",
        "plot": "render the weekly transpiration series as an SVG line chart",
        "pipeline": "run ingest, features, train, report, and plot in sequence",
    }
    for name in STAGES:
        p = sub.add_parser(name, help=help_text[name])
        p.add_argument("--config", required=True, help="site config file")
        p.add_argument("--out-dir", default=None, help="artifact directory (default: config dir)")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        if name in THREADED:
            p.add_argument("--threads", type=int, default=1, help="worker threads (same result)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=os.environ.get("CANOPYFLUX_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        out_dir = Path(args.out_dir) if args.out_dir else Path(args.config).parent
        out_dir.mkdir(parents=True, exist_ok=True)
        stage = STAGES[args.command]
        kwargs = {"seed_override": args.seed}
        if args.command in THREADED:
            kwargs["threads"] = max(1, args.threads)
        result = stage(cfg, out_dir, **kwargs)
        if isinstance(result, str):
            sys.stdout.write(result)
        return EXIT_OK
    except ConfigError as exc:
        print(f"canopyflux {args.command}: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, IoError) as exc:
        print(f"canopyflux {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"canopyflux {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
