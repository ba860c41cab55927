"""Sample CSV files and the synthetic fermentation fixture.

Rows are ``cellar_temp,humidity,starch,acidity[,alcohol]``.  Arrays are
``n x 5`` (or ``n x 4`` for prediction queries) in that column order.
"""
from __future__ import annotations

import csv
import io
import math
import warnings

import numpy as np

COLUMNS = ("cellar_temp", "humidity", "starch", "acidity", "alcohol")
FEATURES = COLUMNS[:4]
PERCENT_COLUMNS = ("humidity", "starch", "acidity", "alcohol")

# synthetic ground-truth ranges (inclusive), per feature column
SYNTH_RANGES = {
    "cellar_temp": (39.0, 44.0),
    "humidity": (44.0, 47.0),
    "starch": (33.0, 36.0),
    "acidity": (1.3, 1.8),
}
SYNTH_NOISE = 0.25


class DataError(ValueError):
    pass


def ground_truth(C, H, S, A):
    """Noise-free alcohol for the synthetic fixture (mildly nonlinear in C)."""
    C, H, S, A = (np.asarray(v, dtype=float) for v in (C, H, S, A))
    return 20 + 0.4 * C - 0.05 * (C - 41) ** 2 + 0.1 * H + 0.2 * S - 3 * A


def synth(n: int, noise: float = SYNTH_NOISE, seed: int = 0) -> np.ndarray:
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    if noise < 0:
        raise DataError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    cols = [rng.uniform(lo, hi, n) for lo, hi in SYNTH_RANGES.values()]
    alc = ground_truth(*cols)
    if noise > 0:
        alc = alc + rng.normal(0.0, noise, n)
    return np.column_stack(cols + [alc])


def parse_samples(text: str, source: str = "<csv>") -> np.ndarray:
    """Parse CSV text; the header must start with the 4 feature columns or all 5.

    Trailing extra columns (such as augmentation provenance) are checked for
    numbers and then dropped.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{source}: empty file")
    header = tuple(c.strip() for c in rows[0])
    if header[:5] == COLUMNS:
        keep = 5
    elif header[:4] == FEATURES and "alcohol" not in header:
        keep = 4
    else:
        raise DataError(f"{source}: header must be {','.join(COLUMNS)} (alcohol optional), got {','.join(header)}")
    values = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:]):
        if len(row) != len(header):
            raise DataError(f"{source}:{i + 2}: expected {len(header)} fields, got {len(row)}")
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{source}:{i + 2}: {header[j]} is not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise DataError(f"{source}:{i + 2}: {header[j]} is not finite")
            values[i, j] = v
    values = values[:, :keep]
    for j, name in enumerate(header[:keep]):
        if name in PERCENT_COLUMNS and values.size and (values[:, j].min() < 0 or values[:, j].max() > 100):
            warnings.warn(f"{source}: {name} has values outside [0, 100]", stacklevel=2)
    return values


def read_samples(path) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    return parse_samples(text, str(path))


def format_samples(values, extra: dict | None = None) -> str:
    """CSV text; floats use ``repr`` so a re-read gives identical values."""
    values = np.asarray(values, dtype=float)
    header = list(COLUMNS[: values.shape[1]])
    extra = extra or {}
    header += list(extra)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for i, row in enumerate(values):
        w.writerow([repr(float(v)) for v in row] + [_cell(col[i]) for col in extra.values()])
    return out.getvalue()


def _cell(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_samples(path, values, extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_samples(values, extra))
