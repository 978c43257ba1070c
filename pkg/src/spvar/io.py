"""Deterministic file formats.

Every artifact this package writes is reproducible byte for byte: floats are
serialized at 17 significant digits (full float64 round-trip), JSON keys
keep their insertion order, line endings are always "\\n", and nothing
records timestamps, paths, or worker counts.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
from typing import Any

import numpy as np

from .errors import ConfigError, DataError
from .model import PvarParams, PvarSpec


def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def _plain(value: Any) -> Any:
    """Nested numpy containers to plain Python scalars and lists."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def _is_scalar(v: Any) -> bool:
    return v is None or isinstance(v, (bool, int, float, str))


def _dump(value: Any, indent: int, out: list[str]):
    pad = " " * indent
    if value is None:
        out.append("null")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, float):
        out.append(format_float(value))
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, str):
        out.append(json.dumps(value))
    elif isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(value.items()):
            out.append(pad + "  " + json.dumps(str(k)) + ": ")
            _dump(v, indent + 2, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, (list, tuple)):
        items = list(value)
        if not items:
            out.append("[]")
            return
        if all(_is_scalar(v) for v in items):
            out.append("[")
            for i, v in enumerate(items):
                _dump(v, indent, out)
                if i < len(items) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for i, v in enumerate(items):
            out.append(pad + "  ")
            _dump(v, indent + 2, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_canonical(obj: Any) -> str:
    """Canonical JSON text: stable key order, 17-digit floats, newline at end."""
    out: list[str] = []
    _dump(_plain(obj), 0, out)
    out.append("\n")
    return "".join(out)


def write_json(path: str, obj: Any):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(dumps_canonical(obj))


def load_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def config_hash(cfg: dict) -> str:
    """Hash of the effective configuration, blind to out_dir and threads."""
    trimmed = {k: v for k, v in cfg.items() if k not in ("out_dir", "threads")}
    return hashlib.sha256(dumps_canonical(trimmed).encode("utf-8")).hexdigest()


def write_csv(path: str, header: list[str], rows: list[tuple]):
    """CSV with pre-formatted deterministic cells and LF line endings."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(c) for c in row])
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(buf.getvalue())


def _cell(c: Any) -> str:
    if isinstance(c, bool) or isinstance(c, np.bool_):
        return "true" if c else "false"
    if isinstance(c, (float, np.floating)):
        return format_float(c)
    if isinstance(c, (int, np.integer)):
        return str(int(c))
    return str(c)


def read_csv_matrix(path: str) -> tuple[tuple[str, ...], np.ndarray]:
    """Numeric CSV with a header row -> (column names, (T, m) array)."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path} is empty") from None
            rows = []
            for ln, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(f"{path}:{ln}: expected {len(header)} fields, got {len(row)}")
                vals = []
                for name, v in zip(header, row):
                    if not v.strip():
                        raise DataError(
                            f"{path}: row {ln}, column {name.strip()}: empty cell"
                        )
                    try:
                        vals.append(float(v))
                    except ValueError:
                        raise DataError(
                            f"{path}: row {ln}, column {name.strip()}: "
                            f"not a number: {v.strip()!r}"
                        ) from None
                rows.append(vals)
    except FileNotFoundError as exc:
        raise DataError(f"file not found: {path}") from exc
    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    return tuple(h.strip() for h in header), np.array(rows, dtype=float)


def params_doc(params: PvarParams, fit_info: dict | None = None) -> dict:
    """JSON document for a parameter set, optionally with fit diagnostics."""
    spec = params.spec
    doc = {
        "spec": {
            "num_seasons": spec.num_seasons,
            "num_vars": spec.num_vars,
            "orders": list(spec.orders),
            "var_names": list(spec.var_names),
        },
        "intercepts": params.intercepts,
        "coeffs": params.coeffs,
        "sigma": params.sigma,
    }
    if fit_info is not None:
        doc["fit"] = fit_info
    return doc


def params_from_doc(doc: dict) -> PvarParams:
    try:
        sp = doc["spec"]
        spec = PvarSpec(
            num_seasons=int(sp["num_seasons"]),
            num_vars=int(sp["num_vars"]),
            orders=tuple(int(p) for p in sp["orders"]),
            var_names=tuple(str(n) for n in sp.get("var_names", ())),
        )
        return PvarParams(
            spec=spec,
            intercepts=np.array(doc["intercepts"], dtype=float),
            coeffs=np.array(doc["coeffs"], dtype=float).reshape(
                spec.num_seasons, spec.max_order, spec.num_vars, spec.num_vars
            ) if spec.max_order else np.zeros(
                (spec.num_seasons, 0, spec.num_vars, spec.num_vars)
            ),
            sigma=np.array(doc["sigma"], dtype=float),
        )
    except KeyError as exc:
        raise ConfigError(f"parameter document is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed parameter document: {exc}") from None
