"""Load, validate, and persist token-embedding matrices.

Two interchange formats are supported:

* ``.divp`` binary: a fixed 16-byte little-endian header followed by the
  row-major payload.  Layout: bytes 0-3 magic ``DIVP``, 4-5 version (=1,
  u16), 6 dtype code (0 = float32, 1 = float64), 7 reserved (=0),
  8-11 rows (u32), 12-15 cols (u32).
* ``.csv``: comma-separated values, no header row, whitespace around
  fields ignored.

All values are held internally as float64 regardless of storage dtype so
that distance ties and argmax comparisons are stable.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    IoError,
    MalformedHeader,
    NonFiniteValue,
    NonPositiveFactor,
)

MAGIC = b"DIVP"
VERSION = 1
_HEADER = struct.Struct("<4sHBBII")  # magic, version, dtype, reserved, rows, cols
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_NAMES = {"f32": 0, "f64": 1}


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Immutable matrix of token embeddings, one row per token.

    ``values`` is a read-only, C-contiguous float64 array of shape
    ``(rows, cols)``; every element is finite.
    """

    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, array, cols: int | None = None) -> "EmbeddingMatrix":
        """Build a validated matrix from any 2-D array-like.

        ``cols`` pins the column count for empty inputs, where it cannot
        be inferred from the data.
        """
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 1 and arr.size == 0:
            if cols is None:
                raise DimensionError("cannot infer column count of an empty matrix")
            arr = arr.reshape(0, cols)
        if arr.ndim != 2:
            raise DimensionError(f"expected a 2-D array, got ndim={arr.ndim}")
        if cols is not None and arr.shape[1] != cols:
            raise DimensionError(f"expected {cols} columns, got {arr.shape[1]}")
        if arr.shape[1] < 1:
            raise DimensionError("embedding dimension must be >= 1")
        bad = ~np.isfinite(arr)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise NonFiniteValue(int(r), int(c), float(arr[r, c]))
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        return cls(arr)

    def row(self, i: int) -> np.ndarray:
        return self.values[i]


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".divp":
        return "binary"
    if suffix == ".csv":
        return "csv"
    raise ValueError(f"cannot infer format from extension {suffix!r} "
                     "(expected .divp or .csv)")


def load_embeddings(path, format: str = "auto") -> EmbeddingMatrix:
    """Read an embedding matrix from ``path``.

    ``format`` is one of ``binary``, ``csv``, or ``auto`` (inferred from
    the file extension).  Zero-row files are valid as long as the column
    count is recoverable.
    """
    p = Path(path)
    if format == "auto":
        format = _infer_format(p)
    if format == "binary":
        return _load_binary(p)
    if format == "csv":
        return _load_csv(p)
    raise ValueError(f"unknown format {format!r}")


def _load_binary(path: Path) -> EmbeddingMatrix:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise MalformedHeader(f"{path}: file shorter than the 16-byte header")
    magic, version, dtype_code, reserved, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MalformedHeader(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MalformedHeader(f"{path}: unsupported version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise MalformedHeader(f"{path}: unknown dtype code {dtype_code}")
    if reserved != 0:
        raise MalformedHeader(f"{path}: reserved header byte is {reserved}, not 0")
    dtype = _DTYPE_CODES[dtype_code]
    expected = rows * cols * dtype.itemsize
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise MalformedHeader(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}")
    if cols < 1:
        raise DimensionError(f"{path}: header declares {cols} columns")
    data = np.frombuffer(payload, dtype=dtype).astype(np.float64).reshape(rows, cols)
    return EmbeddingMatrix.from_array(data, cols=int(cols))


def _load_csv(path: Path) -> EmbeddingMatrix:
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    rows: list[list[float]] = []
    cols: int | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue  # tolerate blank lines (e.g. trailing newline)
        fields = [f.strip() for f in line.split(",")]
        try:
            row = [float(f) for f in fields]
        except ValueError as exc:
            raise DimensionError(f"{path}:{lineno}: unparseable field ({exc})") from exc
        if cols is None:
            cols = len(row)
        elif len(row) != cols:
            raise DimensionError(
                f"{path}:{lineno}: row has {len(row)} fields, expected {cols}")
        for c, v in enumerate(row):
            if not math.isfinite(v):
                raise NonFiniteValue(len(rows), c, v)
        rows.append(row)
    if cols is None:
        raise DimensionError(f"{path}: empty CSV, column count not derivable")
    return EmbeddingMatrix.from_array(np.array(rows, dtype=np.float64).reshape(len(rows), cols))


def save_embeddings(m: EmbeddingMatrix, path, dtype: str = "f64") -> None:
    """Write ``m`` to ``path`` in the .divp binary format.

    ``dtype`` selects the storage precision (``f32`` or ``f64``).  A
    float64 round trip is bit-exact; float32 quantizes.
    """
    if dtype not in _DTYPE_NAMES:
        raise ValueError(f"dtype must be 'f32' or 'f64', got {dtype!r}")
    code = _DTYPE_NAMES[dtype]
    np_dtype = _DTYPE_CODES[code]
    header = _HEADER.pack(MAGIC, VERSION, code, 0, m.rows, m.cols)
    payload = np.ascontiguousarray(m.values, dtype=np_dtype).tobytes()
    try:
        Path(path).write_bytes(header + payload)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def scale_rows(m: EmbeddingMatrix, factors) -> EmbeddingMatrix:
    """Multiply each row of ``m`` by its (strictly positive) factor."""
    f = np.asarray(factors, dtype=np.float64)
    if f.ndim != 1 or f.shape[0] != m.rows:
        raise DimensionError(f"expected {m.rows} factors, got shape {f.shape}")
    if np.any(f <= 0) or not np.all(np.isfinite(f)):
        bad = int(np.argmax((f <= 0) | ~np.isfinite(f)))
        raise NonPositiveFactor(f"factor {f[bad]!r} at row {bad} is not a positive real")
    return EmbeddingMatrix.from_array(m.values * f[:, None])
