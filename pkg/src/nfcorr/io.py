"""CSV and key = value text serialization.

Every CSV written here starts with a comment line carrying the tool version
and a short hash of the run parameters, followed by a header row.  Floats use
``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError
from .geometry import ArrayGeometry

__version__ = "0.1.0"


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def parameter_hash(params: Mapping) -> str:
    """First 16 hex digits of SHA-256 over the sorted ``key=value`` lines."""
    text = "\n".join(f"{k}={format_value(params[k])}" for k in sorted(params))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def comment_line(params: Mapping) -> str:
    return f"# nfcorr {__version__} params={parameter_hash(params)}\n"


def write_csv(path, header: Iterable[str], rows: Iterable[Iterable], params: Mapping) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(comment_line(params))
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and data rows of a CSV written by :func:`write_csv`.

    Blank lines and ``#`` comments are skipped.
    """
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = cells
            else:
                rows.append(cells)
    if header is None:
        raise ValidationError(f"{path}: no header row")
    return header, rows


# -- key = value files ----------------------------------------------------------

def write_key_values(path, values: Mapping) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for key in sorted(values):
            fh.write(f"{key} = {format_value(values[key])}\n")
    return path


def read_key_values(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment line."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ValidationError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            out[key.strip()] = value.strip()
    return out


# -- correlation matrices -----------------------------------------------------------

def matrix_rows(entries: np.ndarray, geom: ArrayGeometry):
    idx = geom.indices
    for i, n in enumerate(idx):
        for j, m in enumerate(idx):
            v = entries[i, j]
            yield n, m, float(v.real), float(v.imag)


def write_matrix_csv(path, entries: np.ndarray, geom: ArrayGeometry, params: Mapping) -> Path:
    """Rows ``n,m,re,im`` with signed element indices."""
    return write_csv(path, ("n", "m", "re", "im"), matrix_rows(entries, geom), params)


def read_matrix_csv(path) -> np.ndarray:
    """Inverse of :func:`write_matrix_csv`; returns the complex N x N array.

    The indices must cover a full square grid of signed element indices.
    """
    header, rows = read_csv(path)
    if header != ["n", "m", "re", "im"]:
        raise ValidationError(f"{path}: expected header n,m,re,im, got {','.join(header)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric value ({exc})") from None
    if data.ndim != 2 or data.shape[1] != 4:
        raise ValidationError(f"{path}: every row needs 4 columns")
    n = data[:, 0].astype(int)
    m = data[:, 1].astype(int)
    lo = min(n.min(), m.min())
    size = max(n.max(), m.max()) - lo + 1
    if data.shape[0] != size * size:
        raise ValidationError(f"{path}: {data.shape[0]} rows do not form a {size}x{size} matrix")
    out = np.full((size, size), np.nan, dtype=complex)
    out[n - lo, m - lo] = data[:, 2] + 1j * data[:, 3]
    if np.isnan(out).any():
        raise ValidationError(f"{path}: duplicate or missing entries")
    return out
