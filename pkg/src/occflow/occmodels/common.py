"""Small helpers shared by the training loops."""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, NumericError


def batches(rng: np.random.Generator, n: int, batch_size: int):
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        yield order[i:i + batch_size]


def check_finite(value, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise NumericError(f"{what} became non-finite ({value})")
    return value


def check_normalized(x, what="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.size and (not np.all(np.isfinite(x)) or x.min() < -1.0 - 1e-9 or x.max() > 1.0 + 1e-9):
        raise ConfigurationError(f"{what} must be normalized into [-1, 1]")
    return x


def write_history(path, rows: list[dict]) -> None:
    """Training curve as CSV, one row per epoch."""
    if not rows:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
