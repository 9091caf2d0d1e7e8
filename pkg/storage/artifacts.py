"""Columnar artifact files written atomically with pandas."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import pandas as pd

from errors import ArtifactError

FLOAT_FORMAT = "%.12g"


def atomic_replace(path: Path, write) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    """Write ``frame`` as CSV with a header row, replacing ``path`` atomically."""
    return atomic_replace(
        path, lambda tmp: frame.to_csv(tmp, index=False, float_format=FLOAT_FORMAT)
    )


def read_table(path: Path, stage: str | None = None) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(
            f"missing artifact {path.name} in {path.parent}", stage=stage
        )
    return pd.read_csv(path)


def write_json(data: dict, path: Path) -> Path:
    def dump(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    return atomic_replace(path, dump)


def read_json(path: Path, stage: str | None = None) -> dict:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(
            f"missing artifact {path.name} in {path.parent}", stage=stage
        )
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
