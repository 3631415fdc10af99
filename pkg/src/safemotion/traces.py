"""Trace records for filtered rollouts and their CSV/JSONL serialization.

One record per integration step. Serialization uses repr-precision floats so
emit -> parse -> emit is byte-identical, which the replay tests rely on.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMATS = ("csv", "jsonl")


@dataclass(frozen=True)
class TraceRecord:
    step: int
    t: float
    x: tuple[float, ...]
    u_o: tuple[float, ...]
    u_star: tuple[float, ...]
    h: tuple[float, ...]
    active: tuple[int, ...]
    mode: str
    solve_time: float


def _tup(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(values, dtype=float).ravel())


def make_record(step: int, t: float, x, u_o, u_star, h, active, mode: str,
                solve_time: float) -> TraceRecord:
    return TraceRecord(
        step=int(step),
        t=float(t),
        x=_tup(x),
        u_o=_tup(u_o),
        u_star=_tup(u_star),
        h=_tup(h),
        active=tuple(int(v) for v in np.asarray(active).ravel()),
        mode=str(mode),
        solve_time=float(solve_time),
    )


def trace_header(n: int, m: int, c: int) -> list[str]:
    """Column order: step, t, state, nominal input, filtered input, barrier
    values, active flags, mode, solve_time."""
    cols = ["step", "t"]
    cols += [f"x{i}" for i in range(n)]
    cols += [f"uo{i}" for i in range(m)]
    cols += [f"us{i}" for i in range(m)]
    cols += [f"h{i}" for i in range(c)]
    cols += [f"act{i}" for i in range(c)]
    cols += ["mode", "solve_time"]
    return cols


def _record_row(r: TraceRecord) -> list[str]:
    row = [str(r.step), repr(r.t)]
    row += [repr(v) for v in r.x]
    row += [repr(v) for v in r.u_o]
    row += [repr(v) for v in r.u_star]
    row += [repr(v) for v in r.h]
    row += [str(v) for v in r.active]
    row += [r.mode, repr(r.solve_time)]
    return row


def emit_trace(records, path, fmt: str = "csv", dims: tuple[int, int, int] | None = None) -> None:
    """Write records to path. `dims` = (n, m, c) is required for an empty trace
    so the header can still be produced."""
    records = list(records)
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    if records:
        dims = (len(records[0].x), len(records[0].u_o), len(records[0].h))
    elif dims is None:
        raise ValueError("an empty trace needs explicit dims=(n, m, c)")
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(trace_header(*dims))
            for r in records:
                writer.writerow(_record_row(r))
        return
    with open(path, "w", encoding="utf-8") as fh:
        header = {"columns": trace_header(*dims), "dims": list(dims)}
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")) + "\n")
        for r in records:
            doc = {
                "step": r.step, "t": r.t, "x": list(r.x), "u_o": list(r.u_o),
                "u_star": list(r.u_star), "h": list(r.h), "active": list(r.active),
                "mode": r.mode, "solve_time": r.solve_time,
            }
            fh.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def _split_counts(header: list[str]) -> tuple[int, int, int]:
    n = sum(1 for cname in header if cname.startswith("x") and cname[1:].isdigit())
    m = sum(1 for cname in header if cname.startswith("uo") and cname[2:].isdigit())
    c = sum(1 for cname in header if cname.startswith("h") and cname[1:].isdigit())
    return n, m, c


def parse_trace(path, fmt: str | None = None) -> tuple[list[TraceRecord], tuple[int, int, int]]:
    """Inverse of emit_trace; returns (records, (n, m, c)). Format inferred
    from the extension when not given."""
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix == ".jsonl" else "csv"
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    records: list[TraceRecord] = []
    if fmt == "csv":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            n, m, c = _split_counts(header)
            for row in reader:
                pos = 2
                x = tuple(float(v) for v in row[pos:pos + n]); pos += n
                u_o = tuple(float(v) for v in row[pos:pos + m]); pos += m
                u_s = tuple(float(v) for v in row[pos:pos + m]); pos += m
                h = tuple(float(v) for v in row[pos:pos + c]); pos += c
                act = tuple(int(v) for v in row[pos:pos + c]); pos += c
                records.append(TraceRecord(int(row[0]), float(row[1]), x, u_o, u_s,
                                           h, act, row[pos], float(row[pos + 1])))
        return records, (n, m, c)
    with open(path, "r", encoding="utf-8") as fh:
        header_doc = json.loads(fh.readline())
        n, m, c = tuple(header_doc["dims"])
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            records.append(TraceRecord(
                int(doc["step"]), float(doc["t"]), tuple(doc["x"]), tuple(doc["u_o"]),
                tuple(doc["u_star"]), tuple(doc["h"]), tuple(int(v) for v in doc["active"]),
                doc["mode"], float(doc["solve_time"]),
            ))
    return records, (n, m, c)
