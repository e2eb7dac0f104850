"""Input validation helpers shared by the estimators and IO readers."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np
import pandas as pd

from .exceptions import DomainError, SchemaError, ShapeError


def check_finite(x, name: str = "value"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return x


def check_positive(x, name: str, *, strict: bool = True) -> float:
    x = float(x)
    if not math.isfinite(x) or (x <= 0 if strict else x < 0):
        op = ">" if strict else ">="
        raise DomainError(f"{name} must be {op} 0, got {x!r}")
    return x


def check_samples(samples, n: int) -> np.ndarray:
    """Return ``samples`` as a complex array whose last axis has length ``n``."""
    arr = np.asarray(samples)
    if arr.ndim == 0 or arr.shape[-1] != n:
        raise ShapeError(f"expected {n} samples on the last axis, got shape {arr.shape}")
    if not np.iscomplexobj(arr):
        arr = arr.astype(np.complex128)
    return arr


def check_columns(frame: pd.DataFrame, required: Iterable[str], what: str) -> pd.DataFrame:
    if not isinstance(frame, pd.DataFrame):
        raise SchemaError(f"{what}: expected a DataFrame, got {type(frame).__name__}")
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{what}: missing column {missing[0]!r}")
    return frame


def check_header(found: list[str], expected: list[str], path) -> None:
    """Exact column check for delimited files; names the first mismatch."""
    for i, col in enumerate(expected):
        if i >= len(found):
            raise SchemaError(f"{path}: missing column {col!r}")
        if found[i] != col:
            raise SchemaError(f"{path}: column {i} is {found[i]!r}, expected {col!r}")
    if len(found) > len(expected):
        raise SchemaError(f"{path}: unexpected column {found[len(expected)]!r}")
