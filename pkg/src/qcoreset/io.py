"""Dataset and coreset file formats.

CSV: one point per row, optional header row (auto-detected). Coreset CSVs carry
the weight as the last column.

Binary: ``b"QCDS"``, version byte (1), n as u64 LE, d as u32 LE, then n*d f64 LE
row-major. Coresets append n more f64 weights after the point block.
"""

from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from .core import ContractViolation, Coreset, Dataset

MAGIC = b"QCDS"
VERSION = 1
_HEADER = struct.Struct("<4sBQI")


class FormatError(ValueError):
    pass


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _read_csv_rows(path) -> np.ndarray:
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise FormatError(f"{path}: no rows")
    if not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{path}: header only")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from None


def _write_csv(path, arr: np.ndarray, header: list[str] | None = None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in arr:
            w.writerow([repr(float(v)) for v in row])


def _pack(points: np.ndarray) -> bytes:
    n, d = points.shape
    return _HEADER.pack(MAGIC, VERSION, n, d) + np.ascontiguousarray(points, dtype="<f8").tobytes()


def _unpack(buf: bytes, extra_cols: int = 0):
    if len(buf) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, n, d = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    body = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size)
    expected = n * d + extra_cols * n
    if body.size != expected:
        raise FormatError(f"expected {expected} floats, found {body.size}")
    pts = body[: n * d].reshape(n, d).astype(np.float64)
    extra = body[n * d:].astype(np.float64)
    return pts, extra


def detect_format(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(4)
    return "bin" if head == MAGIC else "csv"


def write_dataset(D: Dataset, path, fmt: str = "csv"):
    if fmt == "csv":
        _write_csv(path, D.points)
    elif fmt == "bin":
        Path(path).write_bytes(_pack(D.points))
    else:
        raise FormatError(f"unknown dataset format {fmt!r}")


def read_dataset(path, fmt: str | None = None) -> Dataset:
    fmt = fmt or detect_format(path)
    if fmt == "bin":
        pts, extra = _unpack(Path(path).read_bytes())
        if extra.size:
            raise FormatError("trailing data after point block")
    elif fmt == "csv":
        pts = _read_csv_rows(path)
    else:
        raise FormatError(f"unknown dataset format {fmt!r}")
    try:
        return Dataset(pts)
    except ContractViolation as e:
        raise FormatError(str(e)) from None


def write_coreset(S: Coreset, path, fmt: str = "csv"):
    if fmt == "csv":
        d = S.points.shape[1]
        header = [f"x{i}" for i in range(d)] + ["weight"]
        _write_csv(path, np.column_stack([S.points, S.weights]), header)
    elif fmt == "bin":
        Path(path).write_bytes(_pack(S.points) + np.ascontiguousarray(S.weights, dtype="<f8").tobytes())
    else:
        raise FormatError(f"unknown coreset format {fmt!r}")


def read_coreset(path, fmt: str | None = None) -> Coreset:
    fmt = fmt or detect_format(path)
    if fmt == "bin":
        pts, w = _unpack(Path(path).read_bytes(), extra_cols=1)
    elif fmt == "csv":
        arr = _read_csv_rows(path)
        if arr.shape[1] < 2:
            raise FormatError("coreset CSV needs at least one coordinate and a weight")
        pts, w = arr[:, :-1], arr[:, -1]
    else:
        raise FormatError(f"unknown coreset format {fmt!r}")
    return Coreset(pts, w)
