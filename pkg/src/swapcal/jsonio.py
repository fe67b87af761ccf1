"""Deterministic JSON output and tolerant-but-strict JSON input."""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .errors import ParseError


def _float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot encode non-finite float {x!r} as JSON")
    if x == 0:
        return "0.0"  # also folds -0.0
    s = format(x, ".17g")
    if "e" not in s and "." not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    pad = "\n" + " " * (indent * (level + 1)) if indent else ""
    end = "\n" + " " * (indent * level) if indent else ""
    sep = "," + pad if indent else ", "
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = (json.dumps(str(k)) + ": " + _encode(v, indent, level + 1) for k, v in obj.items())
        return "{" + pad + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + pad + sep.join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int = 0) -> str:
    """JSON text with every float written at 17 significant digits.

    Key order is preserved, so equal inputs always give identical bytes.
    """
    return _encode(obj, indent, 0)


def write(path: str | Path, obj) -> None:
    Path(path).write_text(dumps(obj, indent=2) + "\n")


def read(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from exc
