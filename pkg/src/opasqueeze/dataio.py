"""CSV readers and writers for datasets, traces and curves.

External columns carry their unit in the name (``pump_mW``, ``value_dB``).
Powers are shifted between W and mW in decimal, so writing a dataset and
reading it back returns bit-identical floats.
"""
from __future__ import annotations

import csv
import io
from decimal import Decimal
from pathlib import Path

import numpy as np

from .errors import DomainError, InputError
from .estimation import ANTISQUEEZED, SQUEEZED, Dataset, MeasurementPoint
from .quadrature import CavityConstants

DATASET_COLUMNS = ("pump_mW", "sigma_pump_mW", "frequency_Hz", "quadrature", "value_dB", "sigma_dB")
QUADRATURE_TAGS = {"sqz": SQUEEZED, "antisqz": ANTISQUEEZED}
_TAG_OUT = {v: k for k, v in QUADRATURE_TAGS.items()}
_CAVITY_KEYS = {
    "cavity.T": "coupler_transmissivity",
    "cavity.L": "round_trip_loss",
    "cavity.round_trip_length_m": "round_trip_length",
}


def fmt(x: float) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(x))


def w_to_mw_text(x: float) -> str:
    return _decimal_text(Decimal(repr(float(x))).scaleb(3))


def mw_text_to_w(text: str) -> float:
    return float(Decimal(text).scaleb(-3))


def _decimal_text(d: Decimal) -> str:
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s or "0"


def _comment_lines(meta):
    return [f"# {k} = {v}" for k, v in meta.items()]


def dataset_to_csv(dataset: Dataset, header: dict | None = None) -> str:
    buf = io.StringIO()
    lines = ["# opasqueeze dataset v1"]
    meta = dict(header or {})
    meta.update(dataset.metadata)
    c = dataset.cavity
    meta["cavity.T"] = fmt(c.coupler_transmissivity)
    meta["cavity.L"] = fmt(c.round_trip_loss)
    meta["cavity.round_trip_length_m"] = fmt(c.round_trip_length)
    lines += _comment_lines(meta)
    buf.write("\n".join(lines) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DATASET_COLUMNS)
    for p in dataset.points:
        w.writerow([
            w_to_mw_text(p.pump_power),
            w_to_mw_text(p.sigma_pump),
            fmt(p.frequency),
            _TAG_OUT[p.quadrature],
            fmt(p.value_db),
            fmt(p.sigma_db),
        ])
    return buf.getvalue()


def _split_comments(text: str):
    meta, body = {}, []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            content = stripped[1:].strip()
            if " = " in content:
                k, v = content.split(" = ", 1)
                meta[k.strip()] = v.strip()
            continue
        body.append((lineno, line))
    return meta, body


def parse_dataset_csv(text: str, cavity: CavityConstants | None = None, source: str = "<dataset>") -> Dataset:
    """Parse the dataset CSV schema; ``cavity`` overrides constants stored in the header."""
    meta, body = _split_comments(text)
    if not body:
        raise InputError(f"{source}: no header row", line=None)
    header_line, header = body[0]
    cols = [c.strip() for c in next(csv.reader([header]))]
    missing = [c for c in DATASET_COLUMNS if c not in cols]
    if missing:
        raise InputError(f"{source}: missing column(s) {', '.join(missing)}", field=missing[0],
                         line=header_line)
    idx = {c: cols.index(c) for c in DATASET_COLUMNS}
    points = []
    for lineno, line in body[1:]:
        row = next(csv.reader([line]))
        try:
            if len(row) != len(cols):
                raise ValueError(f"expected {len(cols)} fields, got {len(row)}")
            tag = row[idx["quadrature"]].strip()
            if tag not in QUADRATURE_TAGS:
                raise ValueError(f"quadrature must be 'sqz' or 'antisqz', got {tag!r}")
            points.append(MeasurementPoint(
                pump_power=mw_text_to_w(row[idx["pump_mW"]].strip()),
                sigma_pump=mw_text_to_w(row[idx["sigma_pump_mW"]].strip()),
                frequency=float(row[idx["frequency_Hz"]]),
                quadrature=QUADRATURE_TAGS[tag],
                value_db=float(row[idx["value_dB"]]),
                sigma_db=float(row[idx["sigma_dB"]]),
            ))
        except (ValueError, ArithmeticError) as exc:
            raise InputError(f"{source}:{lineno}: {exc}", line=lineno) from exc
    if cavity is None:
        try:
            cavity = CavityConstants(**{_CAVITY_KEYS[k]: float(meta[k]) for k in _CAVITY_KEYS})
        except KeyError as exc:
            raise InputError(f"{source}: cavity constants neither in header nor in config",
                             field=str(exc)) from exc
        except (ValueError, DomainError) as exc:
            raise InputError(f"{source}: bad cavity constants in header: {exc}") from exc
    extra = {k: v for k, v in meta.items() if k not in _CAVITY_KEYS}
    return Dataset(points, cavity, extra)


def write_dataset_csv(dataset: Dataset, path, header: dict | None = None) -> None:
    Path(path).write_text(dataset_to_csv(dataset, header))


def read_dataset_csv(path, cavity: CavityConstants | None = None) -> Dataset:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read dataset {path}: {exc}") from exc
    return parse_dataset_csv(text, cavity, source=str(path))


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return fmt(v)


def rows_to_csv(columns, rows, header: dict | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write("\n".join(_comment_lines(header)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def trace_to_csv(trace, header: dict | None = None) -> str:
    from .quadrature import to_db

    vals = np.asarray(trace.values, dtype=float)
    db = [to_db(v) if v > 0 else float("-inf") for v in vals]
    meta = {"kind": trace.kind}
    meta.update(header or {})
    rows = [(str(i), v, d) for i, (v, d) in enumerate(zip(vals.tolist(), db))]
    return rows_to_csv(("index", "value_linear", "value_dB"), rows, meta)


def read_power_trace(path, source: str | None = None):
    """Read a two-column power trace: an abscissa column and ``power_dB`` or ``power_linear``.

    Returns (abscissa name, abscissa values, linear powers). Powers in dB may
    use any common reference (dBm, dB relative to vacuum, ...).
    """
    path = Path(path)
    source = source or str(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read trace {path}: {exc}") from exc
    _, body = _split_comments(text)
    if not body:
        raise InputError(f"{source}: no header row")
    header_line, header = body[0]
    cols = [c.strip() for c in next(csv.reader([header]))]
    if "power_dB" in cols:
        pcol, in_db = cols.index("power_dB"), True
    elif "power_linear" in cols:
        pcol, in_db = cols.index("power_linear"), False
    else:
        raise InputError(f"{source}: missing column power_dB (or power_linear)", field="power_dB",
                         line=header_line)
    xcol = 0 if pcol != 0 else (1 if len(cols) > 1 else None)
    xs, ps = [], []
    for lineno, line in body[1:]:
        row = next(csv.reader([line]))
        try:
            if len(row) != len(cols):
                raise ValueError(f"expected {len(cols)} fields, got {len(row)}")
            xs.append(row[xcol].strip() if xcol is not None else str(len(xs)))
            p = float(row[pcol])
            ps.append(10.0 ** (p / 10.0) if in_db else p)
        except ValueError as exc:
            raise InputError(f"{source}:{lineno}: {exc}", line=lineno) from exc
    name = cols[xcol] if xcol is not None else "index"
    return name, xs, np.array(ps, dtype=float)
