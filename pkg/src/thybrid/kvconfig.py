"""Tiny ``key = value`` text format with optional ``[block]`` sections.

Blocks may repeat (unlike configparser), which is what scenario feature
lists need. ``#`` starts a comment.
"""
from __future__ import annotations

from .errors import FormatError


def parse(text: str):
    """Return ``(top_level, blocks)``; ``blocks`` is a list of ``(name, dict)``."""
    top, blocks = {}, []
    current = top
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise FormatError(f"bad block header {raw.strip()!r}", line=lineno)
            current = {}
            blocks.append((line[1:-1].strip().lower(), current))
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key = key.strip().lower().replace("-", "_")
        if not key:
            raise FormatError("empty key", line=lineno)
        if key in current:
            raise FormatError(f"duplicate key {key!r}", line=lineno)
        current[key] = value.strip()
    return top, blocks


def read(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def floats(value: str, n: int | None = None, key: str = "value"):
    try:
        out = tuple(float(tok) for tok in value.replace(",", " ").split())
    except ValueError:
        raise FormatError(f"{key}: expected numbers, got {value!r}") from None
    if n is not None and len(out) != n:
        raise FormatError(f"{key}: expected {n} numbers, got {len(out)}")
    return out


def fmt(value) -> str:
    if isinstance(value, (tuple, list)):
        return " ".join(fmt(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_bool(value: str, key: str = "value") -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise FormatError(f"{key}: expected a boolean, got {value!r}")
