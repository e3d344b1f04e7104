from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from ..data import Dataset, Schema, load_dataset
from .algorithms import SyntheticBundle

MANIFEST = "manifest.json"


def replicate_name(r: int) -> str:
    return f"replicate_{r:03d}.csv"


def write_bundle(bundle: SyntheticBundle, directory, extra: dict | None = None) -> Path:
    """Write replicate CSVs, then the manifest last via an atomic rename.

    A directory without a manifest is never a complete bundle.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stale = directory / MANIFEST
    if stale.exists():
        stale.unlink()
    files = []
    for r, rep in enumerate(bundle.replicates):
        name = replicate_name(r)
        (directory / name).write_text(rep.to_csv(), encoding="utf-8")
        files.append(name)
    manifest = {
        "algorithm": bundle.algorithm,
        "replicates": files,
        "epsilon_per_replicate": bundle.per_replicate_params.epsilon,
        "delta_per_replicate": bundle.per_replicate_params.delta,
        "master_seed": bundle.master_seed,
        "ledger": bundle.ledger,
        "warnings": bundle.warnings,
        **(extra or {}),
    }
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".manifest-", suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, directory / MANIFEST)
    return directory / MANIFEST


def read_manifest(directory) -> dict:
    with open(Path(directory) / MANIFEST, encoding="utf-8") as fh:
        return json.load(fh)


def read_replicates(directory, schema: Schema) -> list[Dataset]:
    directory = Path(directory)
    manifest = read_manifest(directory)
    return [
        load_dataset(schema, (directory / name).read_text(encoding="utf-8"), policy="strict")
        for name in manifest["replicates"]
    ]
