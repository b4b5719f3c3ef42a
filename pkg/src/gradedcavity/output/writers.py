"""Atomic result-file writers.

Every file goes to a temp file in the target directory, is fsynced and then
renamed over the destination, so readers see either the old or the new file.
"""

from __future__ import annotations

import contextlib
import csv
import io
import logging
import os
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import orjson

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def write_bytes_atomic(path: Path, data: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_path, path)
    except BaseException:
        # Clean up temp file on any failure
        with contextlib.suppress(OSError):
            os.unlink(tmp_path)
        raise
    logger.debug("Wrote %s (%d bytes)", path, len(data))
    return path


def write_text(path: Path, text: str) -> Path:
    return write_bytes_atomic(path, text.encode())


def dumps_json(payload: Any) -> bytes:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return orjson.dumps(payload, option=JSON_OPTIONS) + b"\n"


def write_json(path: Path, payload: Any) -> Path:
    return write_bytes_atomic(path, dumps_json(payload))


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV with floats in repr form so values round-trip exactly."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    return write_text(path, csv_text(header, rows))


class OutputSet:
    """Writes files under one directory and remembers them for the manifest."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self._files: list[str] = []

    @property
    def files(self) -> list[str]:
        """Paths relative to root, in write order."""
        return list(self._files)

    def _record(self, path: Path) -> Path:
        name = path.relative_to(self.root).as_posix()
        if name not in self._files:
            self._files.append(name)
        return path

    def json(self, name: str, payload: Any) -> Path:
        return self._record(write_json(self.root / name, payload))

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        return self._record(write_csv(self.root / name, header, rows))

    def text(self, name: str, text: str) -> Path:
        return self._record(write_text(self.root / name, text))
