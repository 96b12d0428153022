"""Canonical JSON output shared by every artifact writer.

Rules: object keys sorted, floats printed with 9 significant digits, no
whitespace dependence on platform.  Two runs over identical inputs must
produce byte-identical files; nothing here may consult wall-clock time or
hash-randomized iteration order.
"""

from __future__ import annotations

import json
import math
from typing import Any, TextIO


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite float in canonical output")
    if x == 0.0:
        return "0"  # normalize -0.0
    s = f"{x:.9g}"
    return s


def dumps_canonical(obj: Any) -> str:
    out: list[str] = []
    _write(obj, out)
    return "".join(out)


def dump_canonical(obj: Any, fp: TextIO) -> None:
    fp.write(dumps_canonical(obj))
    fp.write("\n")


def _write(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        first = True
        for key in sorted(obj.keys()):
            if not isinstance(key, str):
                raise TypeError(f"non-string key {key!r} in canonical output")
            if not first:
                out.append(",")
            first = False
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _write(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _write(item, out)
        out.append("]")
    else:
        raise TypeError(f"unsupported type in canonical output: {type(obj)}")


def load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fp:
        return json.load(fp)


def save_canonical(obj: Any, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        dump_canonical(obj, fp)
