"""Delimited-text tables with ``#`` provenance lines and fixed column formats."""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .exceptions import OutputError, SchemaError
from .validation import check_header


def _format_column(values, fmt: str | None) -> list[str]:
    if fmt is None:
        return [str(v) for v in values]
    arr = np.asarray(values)
    out = []
    for v in arr.tolist():
        if isinstance(v, float) and not np.isfinite(v):
            out.append("nan" if np.isnan(v) else ("inf" if v > 0 else "-inf"))
        else:
            out.append(fmt % v)
    return out


def write_table(frame: pd.DataFrame, path, columns: Sequence[str],
                formats: Mapping[str, str | None], comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        cols = [_format_column(frame[c].to_numpy() if len(frame) else [], formats.get(c))
                for c in columns]
        with open(path, "w", newline="") as fh:
            for line in comments:
                fh.write(f"# {line}\n")
            fh.write(",".join(columns) + "\n")
            for row in zip(*cols):
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_table(path, columns: Sequence[str], dtypes: Mapping[str, type]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise OutputError(f"no such file: {path}")
    comments = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                comments.append(line[1:].strip())
                continue
            header = next(csv.reader([line]))
            break
        else:
            raise SchemaError(f"{path}: missing header row")
    check_header([h.strip() for h in header], list(columns), path)
    frame = pd.read_csv(path, comment="#", dtype={c: dtypes.get(c, float) for c in columns})
    frame.attrs["comments"] = comments
    return frame


def file_digest(path) -> str:
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path}: {exc.strerror or exc}") from exc
    return path
