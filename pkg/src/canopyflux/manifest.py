"""Per-stage run manifests: config hash, input hashes, output hashes, tool
version. Reruns with identical inputs yield byte-identical manifests (no
timestamps on purpose)."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    out_dir: Path,
    stage: str,
    config_path: Path | None,
    inputs: dict[str, Path],
    outputs: dict[str, Path],
    seed_override: int | None = None,
) -> Path:
    doc = {
        "tool": "canopyflux",
        "version": __version__,
        "stage": stage,
        "config_sha256": sha256_file(config_path) if config_path else None,
        "seed_override": seed_override,
        "inputs": {name: sha256_file(p) for name, p in sorted(inputs.items()) if p.is_file()},
        "outputs": {name: sha256_file(p) for name, p in sorted(outputs.items()) if p.is_file()},
    }
    path = out_dir / f"manifest_{stage}.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path
