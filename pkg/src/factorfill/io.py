"""File I/O: panel CSV with layout preservation, covariance CSV and binary
dumps, and atomic JSON reports.

Observed cells round-trip byte-exactly: the reader stores every raw token
and the writer echoes them wherever the caller asks for the original value.
All writers go through a temp file plus rename so readers never observe a
partial file.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import DataValidationError
from .panel import PanelMatrix

DEFAULT_NA_TOKENS = ("", "NA", "NaN")

COV_MAGIC = b"FFCOVBIN"
COV_VERSION = 1


@dataclass(frozen=True)
class CsvLayout:
    """Everything needed to re-emit a panel CSV unchanged."""

    header: tuple
    index: tuple | None
    tokens: tuple  # tuple of row tuples, data cells only
    na_tokens: tuple


def _is_na(token: str, na_tokens) -> bool:
    return token.strip() in na_tokens


def _parse_cell(token: str, na_tokens):
    s = token.strip()
    if s in na_tokens:
        return np.nan
    try:
        return float(s)
    except ValueError:
        raise DataValidationError(f"cannot parse cell {token!r} as a number")


def _atomic_write_text(path: str, write_fn) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            write_fn(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=d)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_panel_csv(path: str, na_tokens=DEFAULT_NA_TOKENS):
    """Read a header-first CSV panel; returns (PanelMatrix, CsvLayout).

    The first column is treated as row labels when its header cell is empty
    or any of its values is neither numeric nor an NA token; otherwise it is
    data.  Missing cells are the tokens in ``na_tokens`` (after stripping
    surrounding whitespace).
    """
    na_tokens = tuple(na_tokens)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataValidationError(f"{path}: need a header row and data rows")
    header = rows[0]
    body = [r for r in rows[1:] if r]
    width = len(header)
    for k, r in enumerate(body):
        if len(r) != width:
            raise DataValidationError(
                f"{path}: row {k + 2} has {len(r)} cells, expected {width}"
            )

    def _numeric_or_na(tok: str) -> bool:
        s = tok.strip()
        if s in na_tokens:
            return True
        try:
            float(s)
            return True
        except ValueError:
            return False

    has_index = width > 1 and (
        header[0].strip() == "" or not all(_numeric_or_na(r[0]) for r in body)
    )
    start = 1 if has_index else 0
    names = tuple(h.strip() for h in header[start:])
    if len(names) == 0:
        raise DataValidationError(f"{path}: no data columns")
    index = tuple(r[0] for r in body) if has_index else None
    tokens = tuple(tuple(r[start:]) for r in body)
    values = np.array([[_parse_cell(tok, na_tokens) for tok in row]
                       for row in tokens])
    panel = PanelMatrix.from_values(values)
    layout = CsvLayout(header=tuple(header), index=index, tokens=tokens,
                       na_tokens=na_tokens)
    return panel, layout


def _fmt(v: float, na_token: str) -> str:
    if np.isnan(v):
        return na_token
    return repr(float(v))


def write_panel_csv(path: str, values: np.ndarray, layout: CsvLayout,
                    echo_mask: np.ndarray | None = None,
                    na_token: str = "NA") -> None:
    """Write a panel in the shape recorded by ``layout``.

    Cells where ``echo_mask`` is True are emitted as the original raw
    tokens (byte-exact); everything else is formatted from ``values`` with
    shortest round-trip precision.  NaN cells become ``na_token``.
    """
    values = np.asarray(values)
    T = len(layout.tokens)
    N = len(layout.tokens[0]) if T else 0
    if values.shape != (T, N):
        raise DataValidationError(
            f"values shape {values.shape} does not match layout ({T}, {N})"
        )

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(layout.header)
        for t in range(T):
            row = []
            if layout.index is not None:
                row.append(layout.index[t])
            for i in range(N):
                if echo_mask is not None and echo_mask[t, i]:
                    row.append(layout.tokens[t][i])
                else:
                    row.append(_fmt(values[t, i], na_token))
            w.writerow(row)

    _atomic_write_text(path, _write)


def series_names(layout: CsvLayout) -> tuple:
    start = 1 if layout.index is not None else 0
    return tuple(h.strip() for h in layout.header[start:])


def read_mask_csv(path: str) -> np.ndarray:
    """Read a 0/1 matrix (no header) as a boolean mask, 1 = observed."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataValidationError(f"{path}: empty mask file")
    try:
        arr = np.array([[int(tok.strip()) for tok in r] for r in rows])
    except ValueError:
        raise DataValidationError(f"{path}: mask cells must be 0 or 1")
    if not np.isin(arr, (0, 1)).all():
        raise DataValidationError(f"{path}: mask cells must be 0 or 1")
    return arr.astype(bool)


def write_cov_csv(path: str, matrix: np.ndarray, names=None) -> None:
    """Symmetric covariance as CSV with a header row of series names."""
    matrix = np.asarray(matrix)
    N = matrix.shape[0]
    if names is None:
        names = [f"s{i}" for i in range(N)]
    names = list(names)
    if len(names) != N:
        raise DataValidationError(f"{len(names)} names for {N} columns")

    def _write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in matrix:
            w.writerow([repr(float(v)) for v in row])

    _atomic_write_text(path, _write)


def read_cov_csv(path: str):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise DataValidationError(f"{path}: need header and data rows")
    names = tuple(tok.strip() for tok in rows[0])
    matrix = np.array([[float(tok) for tok in r] for r in rows[1:]])
    if matrix.shape != (len(names), len(names)):
        raise DataValidationError(f"{path}: matrix is not square")
    return matrix, names


def write_cov_binary(path: str, matrix: np.ndarray) -> None:
    """Binary dump: 8-byte magic, uint32 version, uint32 N, then the N*N
    float64 values in column-major order (16-byte header total)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DataValidationError("binary dump needs a square matrix")
    N = matrix.shape[0]
    header = COV_MAGIC + struct.pack("<II", COV_VERSION, N)
    payload = header + np.asfortranarray(matrix).tobytes(order="F")
    _atomic_write_bytes(path, payload)


def read_cov_binary(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:8] != COV_MAGIC:
        raise DataValidationError(f"{path}: not a covariance dump")
    version, N = struct.unpack("<II", blob[8:16])
    if version != COV_VERSION:
        raise DataValidationError(f"{path}: unsupported version {version}")
    data = np.frombuffer(blob[16:], dtype="<f8")
    if data.size != N * N:
        raise DataValidationError(f"{path}: truncated payload")
    return data.reshape((N, N), order="F").copy()


def write_json_atomic(path: str, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)

    def _write(fh):
        fh.write(text)
        fh.write("\n")

    _atomic_write_text(path, _write)
