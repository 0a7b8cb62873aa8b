"""Report rows and their CSV serialization."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, replace
import io
import math
import numbers

import numpy as np

COLUMNS = ("study", "d", "p", "beta", "delta", "L", "function_id", "quantity", "lhs", "rhs", "ratio", "err_lhs",
           "err_rhs", "n_evals", "wall_ms", "passed", "note")

ERR_FRACTION = 0.1


@dataclass(frozen=True)
class Row:
    study: str
    d: int | None = None
    p: float | None = None
    beta: float | None = None
    delta: float | None = None
    L: float | None = None
    function_id: str = ""
    quantity: str = ""
    lhs: float = math.nan
    rhs: float = math.nan
    ratio: float = math.nan
    err_lhs: float = 0.0
    err_rhs: float = 0.0
    n_evals: int = 0
    wall_ms: float | None = None
    passed: bool = False
    note: str = ""

    def key(self) -> tuple:
        num = lambda v: (0, 0.0) if v is None else (1, float(v))
        return (self.study, num(self.d), num(self.p), num(self.beta), num(self.delta), num(self.L),
                self.function_id, self.quantity)


def err_ok(value: float, err: float) -> bool:
    """The error estimate is within 10% of the quantity (or at round-off for a zero quantity)."""
    if not math.isfinite(value) or not math.isfinite(err):
        return False
    return err <= ERR_FRACTION * abs(value) + 1e-13


def checked(row: Row, criterion: bool, note: str = "") -> Row:
    """Attach the verdict: the row criterion and the error-estimate rule must both hold."""
    ok = bool(criterion) and err_ok(row.lhs, row.err_lhs) and err_ok(row.rhs, row.err_rhs)
    if criterion and not ok and not note:
        note = "error estimate above 10% of the quantity"
    return replace(row, passed=ok, note=note or row.note)


def failed(row: Row, exc: Exception) -> Row:
    return replace(row, passed=False, note=f"{type(exc).__name__}: {exc}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def sort_rows(rows) -> list[Row]:
    return sorted(rows, key=Row.key)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in sort_rows(rows):
        data = asdict(row)
        writer.writerow([_fmt(data[c]) for c in COLUMNS])
    return buf.getvalue()


def write_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(rows_to_csv(rows))


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def all_passed(rows) -> bool:
    return all(r.passed for r in rows)

