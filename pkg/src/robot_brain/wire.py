"""Small helpers for validating decoded JSON objects field by field.

Every helper takes the dotted path of the value it checks so that a
:class:`~robot_brain.errors.ValidationError` always names the offending
field, e.g. ``frames[2].scores.joy``.
"""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, Mapping

from .errors import ValidationError


def canonical_json(obj: Any) -> bytes:
    return json.dumps(
        obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def join(path: str, name: str) -> str:
    return f"{path}.{name}" if path else name


def expect_object(value: Any, path: str, fields: Iterable[str] | None = None) -> Mapping:
    if not isinstance(value, dict):
        raise ValidationError(path or "<root>", "expected a JSON object")
    if fields is not None:
        unknown = sorted(set(value) - set(fields))
        if unknown:
            raise ValidationError(join(path, unknown[0]), "unknown field")
    return value


def field(obj: Mapping, name: str, path: str) -> Any:
    if name not in obj:
        raise ValidationError(join(path, name), "missing field")
    return obj[name]


def as_str(value: Any, path: str, *, non_empty: bool = False) -> str:
    if not isinstance(value, str):
        raise ValidationError(path, "expected a string")
    if non_empty and not value:
        raise ValidationError(path, "must not be empty")
    return value


def as_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(path, "expected a boolean")
    return value


def as_int(value: Any, path: str, *, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(path, "expected an integer")
    if minimum is not None and value < minimum:
        raise ValidationError(path, f"must be >= {minimum}")
    return value


def as_float(value: Any, path: str, lo: float | None = None, hi: float | None = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, "expected a number")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ValidationError(path, f"{value!r} outside [{lo}, {hi}]")
    return value


def as_unit(value: Any, path: str) -> float:
    return as_float(value, path, 0.0, 1.0)


def as_enum(value: Any, path: str, allowed: Iterable[str]) -> str:
    allowed = tuple(allowed)
    if not isinstance(value, str) or value not in allowed:
        raise ValidationError(path, f"{value!r} not one of {', '.join(allowed)}")
    return value


def as_list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise ValidationError(path, "expected a JSON array")
    return value
