"""Flat ``key = value`` text format shared by material files and run configs.

One assignment per line; ``#`` starts a comment. Values are Python-style
literals (numbers, quoted strings, lists). Bare words, also inside lists, are
read as strings and ``true``/``false`` as booleans.
"""

import ast
import math
from typing import Any

from .errors import ConfigurationError


def parse_value(raw: str) -> Any:
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null"):
        return None
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        pass
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        return [parse_value(p.strip()) for p in inner.split(",")] if inner else []
    return raw


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot serialize non-finite value {value!r}")
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(format_value(v) for v in value) + "]"
    if isinstance(value, str):
        return repr(value)
    return repr(value)


def parse_kv(text: str) -> list[tuple[int, str, Any]]:
    """Return ``(line_number, key, value)`` triples in file order."""
    entries = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = _strip_comment(line).strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = body.partition("=")
        key = key.strip()
        raw = raw.strip()
        if not key:
            raise ConfigurationError(f"line {lineno}: missing key")
        if key in seen:
            raise ConfigurationError(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        entries.append((lineno, key, parse_value(raw)))
    return entries


def dump_kv(items: dict[str, Any], header: str | None = None) -> str:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for key, value in items.items():
        lines.append(f"{key} = {format_value(value)}")
    return "\n".join(lines) + "\n"


def _strip_comment(line: str) -> str:
    # '#' inside a quoted string is kept
    quote = None
    for i, ch in enumerate(line):
        if quote:
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            quote = ch
        elif ch == "#":
            return line[:i]
    return line
