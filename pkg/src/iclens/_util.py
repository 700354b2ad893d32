"""Small file and JSON helpers."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import LoadError


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def load_json(path, what: str = "file"):
    path = Path(path)
    if not path.is_file():
        raise LoadError(f"missing {what}: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise LoadError(f"unreadable {what} {path}: {e}") from e
