"""Tiny flat `key = value` config format with dotted section names.

Used for synthesis specs and column-remap files. Lines starting with `#`
and blank lines are ignored; keys may repeat (last one wins).
"""

from __future__ import annotations

from pathlib import Path

__all__ = ["parse_kv_file", "parse_kv_text", "format_kv"]


def parse_kv_text(text: str, source: str = "<string>") -> dict:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ValueError(f"{source}:{lineno}: empty key")
        values[key] = value.strip()
    return values


def parse_kv_file(path) -> dict:
    path = Path(path)
    return parse_kv_text(path.read_text(), source=str(path))


def format_kv(values: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in values.items())
