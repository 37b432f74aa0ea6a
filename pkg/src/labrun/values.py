"""Scalar values shared by study configs and secondary-data tables.

Parameters take bool, int, float, or string values. Files on disk (variation
tables, case metadata, secondary CSVs) store them as text, so this module
owns the one serialization used everywhere and its inverse. Keeping both in
one place is what makes the export/parse round trips exact.
"""

from __future__ import annotations

import math
import re
from typing import Union

Scalar = Union[bool, int, float, str]

SCALAR_TYPES = (bool, int, float, str)

_INT_RE = re.compile(r"[+-]?\d+\Z")
# Covers repr() of any finite float, including exponent forms like 1e+20.
_FLOAT_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\Z")
# NaN and infinities count as float cells so the comparison NaN policy can
# see them; they are still rejected as parameter values.
_SPECIAL_FLOAT_RE = re.compile(r"[+-]?(nan|inf|infinity)\Z", re.IGNORECASE)


def is_scalar(value: object) -> bool:
    return isinstance(value, SCALAR_TYPES)


def check_finite(value: Scalar, where: str) -> None:
    """Reject NaN and infinities in parameter values.

    Non-finite parameters would not survive a text round trip and have no
    meaning as study coordinates, so they are refused at config time.
    """
    if isinstance(value, float) and not math.isfinite(value):
        raise ValueError(f"non-finite value in {where}: {value!r}")


def serialize_scalar(value: Scalar) -> str:
    """Render a scalar as the canonical text cell.

    bool becomes true/false, floats use the shortest round-trip form, and
    strings pass through verbatim.
    """
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return value
    raise TypeError(f"unsupported scalar type: {type(value).__name__}")


def coerce_token(text: str) -> Scalar:
    """Inverse of :func:`serialize_scalar` for cells read back from text.

    true/false become bool, integer and decimal literals become numbers,
    everything else stays a string. Strings that themselves look numeric
    (e.g. "007") cannot be distinguished in CSV; that limitation is
    documented rather than papered over.
    """
    if text == "true":
        return True
    if text == "false":
        return False
    if _INT_RE.match(text):
        return int(text)
    if _FLOAT_RE.match(text) or _SPECIAL_FLOAT_RE.match(text):
        return float(text)
    return text


def looks_numeric(text: str) -> bool:
    return bool(
        _INT_RE.match(text) or _FLOAT_RE.match(text) or _SPECIAL_FLOAT_RE.match(text)
    )


def looks_int(text: str) -> bool:
    return bool(_INT_RE.match(text))


def infer_column_type(tokens: list[str]) -> str:
    """Classify a column as "int", "float", or "str" from its cell texts.

    A column is int only if every cell is an integer literal, float if every
    cell is numeric and at least one is not an integer, str otherwise.
    """
    if not tokens:
        return "str"
    if all(looks_int(t) for t in tokens):
        return "int"
    if all(looks_numeric(t) for t in tokens):
        return "float"
    return "str"


def widen_column_type(a: str, b: str) -> str | None:
    """Combine two inferred column types, or None if they conflict.

    int widens to float; any numeric/string mix is a conflict.
    """
    if a == b:
        return a
    if {a, b} == {"int", "float"}:
        return "float"
    return None


def parse_as(column_type: str, token: str) -> Scalar:
    if column_type == "int":
        return int(token)
    if column_type == "float":
        return float(token)
    return token
