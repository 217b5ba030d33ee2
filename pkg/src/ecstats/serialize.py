"""JSON/CSV conversion. Exact rationals are always written as "num/den"."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from fractions import Fraction


def fraction_str(x: Fraction | int) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)


def parse_number(value):
    """Inverse of to_jsonable for scalars: "num/den" -> Fraction, "inf"/"nan" -> float."""
    if isinstance(value, str):
        return Fraction(value) if "/" in value else float(value)
    return value


def to_jsonable(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, Fraction):
        return fraction_str(obj)
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return to_jsonable(obj.item())
    if dataclasses.is_dataclass(obj):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {_key(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return str(obj)


def _key(k) -> str:
    if isinstance(k, bool):
        return "true" if k else "false"
    return str(k)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=False)


def rows_to_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
