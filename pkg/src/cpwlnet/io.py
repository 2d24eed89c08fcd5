"""JSON/CSV readers and writers shared by the command-line tool.

Floats are written with ``repr`` (shortest string that parses back to the same
double).  Exact rationals are written as ``"p/q"`` strings.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path


class SchemaError(ValueError):
    """A file parsed as JSON but does not match the expected schema."""


def encode_number(v):
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else str(v.numerator)
    return float(v)


def decode_number(v, exact: bool = False):
    if isinstance(v, bool):
        raise SchemaError(f"expected a number, got {v!r}")
    if isinstance(v, str):
        try:
            q = Fraction(v)
        except ValueError as exc:
            raise SchemaError(f"bad number {v!r}") from exc
        return q if exact else float(q)
    if isinstance(v, (int, float)):
        return Fraction(v) if exact else float(v)
    raise SchemaError(f"expected a number, got {type(v).__name__}")


def read_json(path) -> dict:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    return obj


def write_json(path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
