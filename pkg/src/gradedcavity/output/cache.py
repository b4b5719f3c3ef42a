"""Content-addressed spectrum cache under <out_dir>/cache/<sha256>.json."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import asdict
from pathlib import Path
from typing import TYPE_CHECKING, Any

import orjson

from gradedcavity import __version__
from gradedcavity.output.writers import write_bytes_atomic
from gradedcavity.spectrum.table import SpectrumTable

if TYPE_CHECKING:
    from gradedcavity.metrics import MetricsRegistry
    from gradedcavity.spectrum.solver import SolverSettings
    from gradedcavity.types import CavityGeometry, DielectricProfile

logger = logging.getLogger(__name__)


def cache_key(
    kind: str,
    geometry: CavityGeometry,
    profile: DielectricProfile,
    omega_max: float,
    settings: SolverSettings,
    **extra: Any,
) -> str:
    """Hash of everything that determines a table's content, plus the code version."""
    payload = {
        "kind": kind,
        "geometry": asdict(geometry),
        "profile": asdict(profile),
        "omega_max": omega_max,
        "settings": settings.provenance(),
        "code_version": __version__,
        **extra,
    }
    return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()


class SpectrumCache:
    def __init__(self, directory: Path, metrics: MetricsRegistry | None = None) -> None:
        self.directory = directory
        self._metrics = metrics

    def path_for(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def _count(self, name: str) -> None:
        if self._metrics is not None:
            self._metrics.counter_inc(name)

    def get(self, key: str) -> SpectrumTable | None:
        path = self.path_for(key)
        if not path.exists():
            self._count("cache_misses")
            return None
        try:
            table = SpectrumTable.from_json(path.read_bytes())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            logger.warning("Ignoring unreadable cache entry %s: %s", path, exc)
            self._count("cache_misses")
            return None
        self._count("cache_hits")
        logger.debug("Cache hit %s (%d modes)", key[:12], len(table))
        return table

    def put(self, key: str, table: SpectrumTable) -> Path:
        path = write_bytes_atomic(self.path_for(key), table.to_json())
        logger.debug("Cached %d modes as %s", len(table), key[:12])
        return path
