"""Run manifest: what was run, with which config, and which files it wrote."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from gradedcavity import __version__

MANIFEST_NAME = "manifest.json"


@dataclass
class ResultManifest:
    """Everything except `timing` is identical across reruns of one config."""

    config_hash: str
    command: str
    arguments: dict[str, Any] = field(default_factory=dict)
    code_version: str = __version__
    files: list[str] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)
    convention_constant: float | None = None
    units: dict[str, Any] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    status: str = "ok"
    exit_code: int = 0
    _started: float = field(default_factory=time.perf_counter, repr=False)

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    def finish(self, files: list[str], *, status: str = "ok", exit_code: int = 0) -> None:
        self.files = sorted({*files, MANIFEST_NAME})
        self.status = status
        self.exit_code = exit_code
        self.timing["wall_seconds"] = time.perf_counter() - self._started

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "code_version": self.code_version,
            "command": self.command,
            "arguments": self.arguments,
            "files": self.files,
            "timing": self.timing,
            "convention_constant": self.convention_constant,
            "units": self.units,
            "warnings": self.warnings,
            "errors": self.errors,
            "status": self.status,
            "exit_code": self.exit_code,
        }
