"""Deterministic JSON serialisation and atomic file output.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, and files are written to a temporary name and renamed so a
failure never leaves a partial output behind.
"""

from __future__ import annotations

import json
import math
import os
from typing import Any

from .errors import InputError


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    return f"{x:.17g}"


def dumps(obj: Any, indent: int = 0) -> str:
    """Serialise ``obj`` to JSON with deterministic float formatting."""
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        inner = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {dumps(v, indent + 1)}' for k, v in obj.items()
        )
        return "{\n" + inner + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        items = [dumps(v, indent + 1) for v in obj]
        flat = "[" + ", ".join(items) + "]"
        if len(flat) <= 100 and "\n" not in flat:
            return flat
        inner = ",\n".join(f"{pad}  {it}" for it in items)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    # numpy scalars and similar
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent)
    raise TypeError(f"cannot serialise {type(obj).__name__} to JSON")


def write_file(path: str, text: str) -> None:
    """Write ``text`` to ``path`` atomically (write-then-rename)."""
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def write_json(path: str, obj: Any) -> None:
    write_file(path, dumps(obj) + "\n")


def read_json(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
