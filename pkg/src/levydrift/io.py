"""File formats: field CSV/raw, symbol and series CSV, key-value configs, JSON.

All floating point output uses 17 significant digits so that reruns can be
compared byte for byte.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .exceptions import ArgumentError, ConfigError
from .field import ScalarField, TorusGrid

__all__ = [
    "fmt",
    "write_field_csv",
    "read_field_csv",
    "write_field_raw",
    "read_field_raw",
    "write_symbol_csv",
    "write_trajectory_csv",
    "write_envelope_csv",
    "write_rows_csv",
    "parse_kv",
    "read_kv",
    "format_kv",
    "write_kv",
    "to_jsonable",
    "dumps_json",
    "write_json",
    "write_jsonl",
]

RAW_MAGIC = b"LDF1"
_RAW_HEADER = struct.Struct("<4sIId")


def fmt(x):
    """17-significant-digit text for a float (``nan``/``inf`` spelled out)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_rows_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def write_field_csv(path, f: ScalarField):
    """Rows ``i0[, i1], value`` in C order."""
    idx = np.indices(f.grid.shape).reshape(f.grid.dim, -1).T
    header = [f"i{j}" for j in range(f.grid.dim)] + ["value"]
    rows = ([*map(int, i), float(v)] for i, v in zip(idx, f.values.ravel()))
    return write_rows_csv(path, header, rows)


def read_field_csv(path, Lbox=2 * math.pi):
    """Inverse of :func:`write_field_csv`; ``N`` and ``dim`` are inferred."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = len(header) - 1
    if dim not in (1, 2) or header[-1] != "value":
        raise ArgumentError(f"unrecognized field CSV header {header}")
    N = int(round(len(body) ** (1.0 / dim)))
    grid = TorusGrid(dim, N, Lbox)
    vals = np.empty(grid.shape)
    for row in body:
        vals[tuple(int(x) for x in row[:dim])] = float(row[-1])
    return ScalarField(grid, vals)


def write_field_raw(path, f: ScalarField):
    """Header ``<4sIId`` (magic ``LDF1``, dim, N, Lbox) then little-endian float64 in C order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_RAW_HEADER.pack(RAW_MAGIC, g.dim, g.N, g.Lbox))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def read_field_raw(path):
    data = Path(path).read_bytes()
    if len(data) < _RAW_HEADER.size:
        raise ArgumentError("file too short for a field header")
    magic, dim, N, Lbox = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise ArgumentError(f"bad magic {magic!r}")
    grid = TorusGrid(dim, N, Lbox)
    vals = np.frombuffer(data, dtype="<f8", offset=_RAW_HEADER.size)
    if vals.size != N**dim:
        raise ArgumentError("payload size does not match header")
    return ScalarField(grid, vals.reshape(grid.shape))


def write_symbol_csv(path, table):
    """Rows ``xi0[, xi1], a`` over the frequency lattice."""
    g = table.grid
    xi = g.kvec.reshape(g.dim, -1).T
    header = [f"xi{j}" for j in range(g.dim)] + ["a"]
    rows = ([*map(float, k), float(a)] for k, a in zip(xi, table.values.ravel()))
    return write_rows_csv(path, header, rows)


def write_trajectory_csv(path, traj):
    """Rows ``t, l1, l2, linf, min, max``."""
    d = traj.diagnostics
    rows = zip(traj.times, d["l1"], d["l2"], d["linf"], d["min"], d["max"])
    return write_rows_csv(path, ["t", "l1", "l2", "linf", "min", "max"],
                          ([float(x) for x in r] for r in rows))


def write_envelope_csv(path, envelopes):
    """Rows ``s``, measured triple, bound triple, centre coordinates, violations."""
    if not envelopes:
        raise ArgumentError("no envelope states")
    dim = len(envelopes[0].center)
    header = ["s", "concentration", "height", "l1", "concentration_bound", "height_bound", "l1_bound"]
    header += [f"x{j}" for j in range(dim)] + ["violations"]
    rows = ([e.s, *map(float, e.measured), *map(float, e.bounds), *map(float, e.center),
             ";".join(e.violations)] for e in envelopes)
    return write_rows_csv(path, header, rows)


def parse_kv(text):
    """Parse ``key = value`` lines; ``#`` starts a comment.  Duplicate keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "empty key")
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = val
    return out


def read_kv(path):
    return parse_kv(Path(path).read_text())


def format_kv(items):
    return "".join(f"{k} = {v}\n" for k, v in sorted(items.items()))


def write_kv(path, items):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_kv(items))
    return path


def to_jsonable(obj):
    """Convert numpy scalars/arrays, tuples, enums and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Float(float(obj))
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


class _Float(float):
    """Marker so the encoder can print 17 significant digits."""


def _encode(obj):
    if isinstance(obj, _Float):
        x = float(obj)
        return fmt(x) if math.isfinite(x) else json.dumps(fmt(x))
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, list):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    return json.dumps(obj)


def dumps_json(obj):
    """Deterministic JSON text with insertion-ordered keys and 17-digit floats."""
    return _encode(to_jsonable(obj))


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj) + "\n")
    return path


def write_jsonl(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(dumps_json(r) + "\n" for r in records))
    return path
