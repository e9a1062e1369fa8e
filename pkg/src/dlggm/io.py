"""Data ingestion and on-disk formats.

Draws file layout (little-endian)::

    magic   4 bytes  b"DLGG"
    version u16      1
    p       u32
    count   u64      number of stored draws
    values  count * p(p+1)/2 float64, each draw as its packed upper triangle
            (row-major, diagonal included)
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ScatterMatrix
from .graph import EdgeSet

DRAWS_MAGIC = b"DLGG"
DRAWS_VERSION = 1
_HEADER = struct.Struct("<4sHIQ")


class DataError(ValueError):
    pass


class FormatError(ValueError):
    pass


@dataclass
class Dataset:
    values: np.ndarray
    column_names: list[str] | None = None
    means: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def _parse_float(cell: str) -> float:
    v = float(cell)
    if not math.isfinite(v):
        raise ValueError(cell)
    return v


def _is_numeric_row(row) -> bool:
    try:
        [float(c) for c in row]
    except ValueError:
        return False
    return True


def load_csv(path) -> Dataset:
    """Read a numeric table (optional header) and mean-center its columns."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError(f"{path}: file is empty")
    names = None
    start = 0
    if not _is_numeric_row(rows[0]):
        names = [c.strip() for c in rows[0]]
        start = 1
    body = rows[start:]
    if not body:
        raise DataError(f"{path}: no data rows")
    width = len(names) if names is not None else len(body[0])
    values = np.empty((len(body), width))
    for r, row in enumerate(body, start=start + 1):
        if len(row) != width:
            raise DataError(f"{path}: row {r} has {len(row)} fields, expected {width}")
        for c, cell in enumerate(row, start=1):
            text = cell.strip()
            if text == "" or text.lower() in ("na", "nan", "null"):
                raise DataError(f"{path}: missing value at row {r}, column {c}")
            try:
                values[r - start - 1, c - 1] = _parse_float(text)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at row {r}, column {c}") from None
    if width < 2:
        raise DataError(f"{path}: need at least 2 columns")
    means = values.mean(axis=0)
    centered = values - means
    for c in range(width):
        if np.all(values[:, c] == values[0, c]):
            label = names[c] if names else f"column {c + 1}"
            raise DataError(f"{path}: {label} is constant")
    return Dataset(centered, names, means)


def scatter(ds: Dataset) -> ScatterMatrix:
    """S = sum_i x_i x_i^T over the (centered) rows."""
    return ScatterMatrix.from_data(ds.values)


# --- CSV helpers ------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_matrix_csv(path, a) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with Path(path).open("w", newline="") as fh:
        for row in a:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        return np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_data_csv(path, x, names=None) -> None:
    x = np.asarray(x, dtype=float)
    names = names or [f"x{k + 1}" for k in range(x.shape[1])]
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in x:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_edges_csv(path, edges: EdgeSet) -> None:
    """Edge list with header ``i,j``; nodes are 1-based."""
    with Path(path).open("w", newline="") as fh:
        fh.write("i,j\n")
        for i, j in edges.sorted():
            fh.write(f"{i},{j}\n")


def read_edges_csv(path, p: int) -> EdgeSet:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and [c.strip() for c in rows[0]] == ["i", "j"]:
        rows = rows[1:]
    pairs = []
    for k, row in enumerate(rows, start=2):
        try:
            i, j = (int(v) for v in row)
        except ValueError:
            raise FormatError(f"{path}: bad edge on line {k}: {row!r}") from None
        pairs.append((min(i, j), max(i, j)))
    try:
        return EdgeSet(p, frozenset(pairs))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_kv(path, values: dict) -> None:
    with Path(path).open("w") as fh:
        for k, v in values.items():
            fh.write(f"{k}={_fmt(v) if isinstance(v, float) else v}\n")


def read_kv(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k] = v
    return out


# --- draws ------------------------------------------------------------------------

def write_draws(path, draws) -> None:
    draws = np.asarray(draws, dtype=float)
    k, p, _ = draws.shape
    iu = np.triu_indices(p)
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(DRAWS_MAGIC, DRAWS_VERSION, p, k))
        fh.write(np.ascontiguousarray(draws[:, iu[0], iu[1]]).astype("<f8").tobytes())


def read_draws(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, p, k = _HEADER.unpack_from(raw)
    if magic != DRAWS_MAGIC:
        raise FormatError(f"{path}: not a draws file (bad magic)")
    if version != DRAWS_VERSION:
        raise FormatError(f"{path}: unsupported draws version {version}")
    m = p * (p + 1) // 2
    body = raw[_HEADER.size:]
    if len(body) != 8 * m * k:
        raise FormatError(f"{path}: expected {k} draws of {m} values, got {len(body)} bytes")
    packed = np.frombuffer(body, dtype="<f8").reshape(k, m)
    iu = np.triu_indices(p)
    out = np.empty((k, p, p))
    out[:, iu[0], iu[1]] = packed
    out[:, iu[1], iu[0]] = packed
    return out


TRACE_HEADER = ("sweep", "log_post", "tau", "phi_min", "phi_max", "psi_min", "psi_max",
                "pd_ok", "kept")


def write_trace_csv(path, samples) -> None:
    kept = np.zeros(samples.log_post.size, dtype=bool)
    kept[samples.kept - 1] = True
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for t in range(samples.log_post.size):
            vals = [str(t + 1), _fmt(samples.log_post[t])]
            vals += [_fmt(v) for v in samples.latent_trace[t]]
            vals += [str(int(samples.pd_ok[t])), str(int(kept[t]))]
            fh.write(",".join(vals) + "\n")


def read_trace_csv(path) -> dict:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != TRACE_HEADER:
            raise FormatError(f"{path}: unexpected trace header")
        rows = np.array([[float(c) for c in r] for r in reader if r])
    return {
        "log_post": rows[:, 1],
        "latent_trace": rows[:, 2:7],
        "pd_ok": rows[:, 7].astype(bool),
        "kept": rows[rows[:, 8] == 1, 0].astype(int),
    }


def file_digest(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Everything needed to re-run a subcommand."""

    command: str
    args: dict
    version: str
    seed: int | None = None
    inputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    duration_s: float = 0.0

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        try:
            return cls(**json.loads(Path(path).read_text()))
        except (json.JSONDecodeError, TypeError) as exc:
            raise FormatError(f"{path}: not a run manifest ({exc})") from None
