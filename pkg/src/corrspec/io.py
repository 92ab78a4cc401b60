"""Panel CSV ingestion and report / curve emission.

Input layout: a header row ``timestamp,TICKER1,TICKER2,...`` followed by one
row per date. Price files and return files share the layout. An empty cell
marks a gap; assets with gaps are dropped and reported.

Outputs: JSON reports with 17 significant digits, plot CSVs with 9.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ParseError, ValidationError
from .linalg import DensityCurve, PriceSeries, ReturnMatrix, log_returns

__all__ = [
    "SCHEMA_VERSION",
    "Panel",
    "read_panel",
    "ingest_prices",
    "ingest_returns",
    "read_values",
    "write_density_csv",
    "write_values_csv",
    "dumps_report",
    "write_report",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Panel:
    tickers: tuple[str, ...]
    timestamps: tuple[str, ...]
    values: NDArray[np.float64]  # (n_assets, n_rows)
    dropped: tuple[tuple[str, str], ...] = ()


def read_panel(path: str | os.PathLike) -> Panel:
    """Parse a timestamp-by-ticker CSV; drop columns that have gaps."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise ParseError(f"{path}: header needs a timestamp column and at least one ticker")
    tickers = header[1:]
    seen: set[str] = set()
    for t in tickers:
        if not t:
            raise ParseError(f"{path}: empty ticker name in header")
        if t in seen:
            raise ParseError(f"{path}: duplicate ticker {t!r}")
        seen.add(t)

    n = len(tickers)
    stamps: list[str] = []
    vals = np.full((len(rows) - 1, n), np.nan)
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != n + 1:
            raise ParseError(f"{path}: line {line} has {len(row)} fields, expected {n + 1}")
        stamps.append(row[0].strip())
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if not cell:
                continue
            try:
                x = float(cell)
            except ValueError:
                raise ParseError(
                    f"{path}: line {line}, column {j + 2} ({tickers[j]}): cannot parse {cell!r}"
                ) from None
            if not math.isfinite(x):
                raise ParseError(f"{path}: line {line}, column {j + 2} ({tickers[j]}): non-finite value")
            vals[r, j] = x
    dupes = sorted({s for s in stamps if stamps.count(s) > 1})
    if dupes:
        raise ParseError(f"{path}: misaligned dates, repeated timestamp(s) {dupes[:5]}")
    if len(stamps) < 2:
        raise ParseError(f"{path}: need at least two data rows")

    gaps = np.isnan(vals).any(axis=0)
    dropped = []
    for j in np.flatnonzero(gaps):
        first = int(np.flatnonzero(np.isnan(vals[:, j]))[0]) + 2
        reason = f"gap at line {first}"
        dropped.append((tickers[j], reason))
        log.warning("dropping %s: %s", tickers[j], reason)
    keep = ~gaps
    return Panel(
        tuple(t for t, k in zip(tickers, keep) if k),
        tuple(stamps),
        np.ascontiguousarray(vals[:, keep].T),
        tuple(dropped),
    )


def ingest_prices(path: str | os.PathLike) -> tuple[list[PriceSeries], Panel]:
    panel = read_panel(path)
    series = [PriceSeries(t, row, panel.timestamps) for t, row in zip(panel.tickers, panel.values)]
    return series, panel


def ingest_returns(path: str | os.PathLike, kind: str = "prices") -> tuple[ReturnMatrix, Panel]:
    """Return matrix from a price file (log returns) or a returns file."""
    if kind == "prices":
        series, panel = ingest_prices(path)
        if not series:
            raise ValidationError(f"{path}: no complete asset columns")
        data = np.vstack([log_returns(s) for s in series])
    elif kind == "returns":
        panel = read_panel(path)
        if panel.values.shape[0] == 0:
            raise ValidationError(f"{path}: no complete asset columns")
        data = panel.values
    else:
        raise ValidationError(f"unknown input kind {kind!r}")
    return ReturnMatrix(data, tickers=panel.tickers), panel


def read_values(path: str | os.PathLike) -> NDArray[np.float64]:
    """One number per line (blank lines and a non-numeric header ignored)."""
    out = []
    with open(path) as fh:
        for k, line in enumerate(fh, start=1):
            s = line.strip().split(",")[0]
            if not s:
                continue
            try:
                out.append(float(s))
            except ValueError:
                if out or k > 1:
                    raise ParseError(f"{path}: line {k}: cannot parse {s!r}") from None
    return np.array(out)


def _g9(x: float) -> str:
    return format(float(x), ".9g")


def write_density_csv(path: str | os.PathLike, curve: DensityCurve) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("lambda,rho\n")
        for a, b in zip(curve.lam, curve.rho):
            fh.write(f"{_g9(a)},{_g9(b)}\n")


def write_values_csv(path: str | os.PathLike, values: Iterable[float]) -> None:
    with open(path, "w", newline="") as fh:
        for v in values:
            fh.write(_g9(v) + "\n")


def _dump(obj: Any, indent: int) -> str:
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted((str(k), v) for k, v in obj.items())
        body = ",\n".join(f"{inner}{json.dumps(k)}: {_dump(v, indent + 1)}" for k, v in items)
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if not any(isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_dump(v, indent + 1) for v in obj) + "]"
        body = ",\n".join(inner + _dump(v, indent + 1) for v in obj)
        return "[\n" + body + "\n" + pad + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    if isinstance(obj, (complex, np.complexfloating)):
        return _dump({"re": obj.real, "im": obj.imag}, indent)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_report(report: dict) -> str:
    """JSON text with sorted keys and every float at 17 significant digits."""
    return _dump(report, 0) + "\n"


def write_report(path: str | os.PathLike, report: dict) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_report(report))


def tickers_for(idx: Sequence[int], tickers: Sequence[str] | None) -> list:
    if tickers is None:
        return [int(i) for i in idx]
    return [tickers[i] for i in idx]
