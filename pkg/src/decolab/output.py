"""Deterministic CSV and manifest emission."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from decolab.errors import IoError

__all__ = ["format_value", "emit_csv", "sha256_file", "TaskRecord", "RunManifest", "write_manifest"]

_locks: dict[str, threading.Lock] = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    key = str(path.resolve())
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


def format_value(v) -> str:
    """17 significant digits for reals; NaN/inf spelled out; strings verbatim."""
    if isinstance(v, str):
        return v
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    x = float(v)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def emit_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write an RFC-4180 CSV with LF line endings.

    Rows must have as many fields as the header.  Output depends only on the
    values, so identical inputs give byte-identical files.
    """
    path = Path(path)
    header = list(header)
    lines = []
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) != len(header):
            raise IoError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
        lines.append([format_value(v) for v in row])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with _lock_for(path):
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(lines)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class TaskRecord:
    name: str
    status: str = "ok"  # ok | partial | failed
    outputs: list[str] = field(default_factory=list)
    figure: str | None = None
    parameters: dict[str, Any] = field(default_factory=dict)
    messages: list[str] = field(default_factory=list)
    error: str | None = None

    def as_dict(self) -> dict:
        d = {"name": self.name, "status": self.status, "outputs": list(self.outputs)}
        if self.figure is not None:
            d["figure"] = self.figure
        if self.parameters:
            d["parameters"] = self.parameters
        if self.messages:
            d["messages"] = list(self.messages)
        if self.error is not None:
            d["error"] = self.error
        return d


@dataclass
class RunManifest:
    command: str
    version: str
    config: dict
    tasks: list[TaskRecord]
    files: dict[str, str]
    wall_time_s: float
    defaults: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def status(self) -> str:
        states = {t.status for t in self.tasks}
        if states <= {"ok"}:
            return "ok"
        if states == {"failed"}:
            return "failed"
        return "partial"

    @property
    def exit_code(self) -> int:
        return 0 if self.status == "ok" else 2

    def as_dict(self) -> dict:
        return {
            "tool": "decolab",
            "version": self.version,
            "command": self.command,
            "status": self.status,
            "wall_time_s": self.wall_time_s,
            "config": self.config,
            "defaults": list(self.defaults),
            "warnings": list(self.warnings),
            "tasks": [t.as_dict() for t in self.tasks],
            "files": dict(sorted(self.files.items())),
        }


def write_manifest(path: str | Path, manifest: RunManifest) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest.as_dict(), fh, indent=2, allow_nan=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
