"""Tests for atomic writers, the spectrum cache and the run manifest."""

from __future__ import annotations

import math
import os
from pathlib import Path
from unittest.mock import patch

import orjson
import pytest

from gradedcavity.metrics import MetricsRegistry
from gradedcavity.output.cache import SpectrumCache, cache_key
from gradedcavity.output.manifest import MANIFEST_NAME, ResultManifest
from gradedcavity.output.writers import (
    OutputSet,
    csv_text,
    dumps_json,
    write_bytes_atomic,
    write_json,
)
from gradedcavity.spectrum.solver import SolverSettings
from gradedcavity.spectrum.table import ModeRecord, SpectrumTable
from gradedcavity.types import CavityGeometry, DielectricProfile, ModeIndex, Polarization

GEOMETRY = CavityGeometry(1.0, 1.0, 1.0)
PROFILE = DielectricProfile(beta=1.0, alpha=1.0)


def _table() -> SpectrumTable:
    records = [
        ModeRecord(ModeIndex(Polarization.TE, 1, 0, 1), 3.1, math.pi, 0.0),
        ModeRecord(ModeIndex(Polarization.TM, 1, 1, 1), 4.4, math.pi, math.pi),
    ]
    return SpectrumTable.build(GEOMETRY, PROFILE, 5.0, records)


class TestWriters:
    def test_json_is_canonical(self, tmp_path: Path) -> None:
        path = write_json(tmp_path / "out.json", {"b": 1, "a": [1.5, None]})
        data = path.read_bytes()
        assert data.endswith(b"\n")
        assert data.index(b'"a"') < data.index(b'"b"')
        assert orjson.loads(data) == {"a": [1.5, None], "b": 1}

    def test_dumps_is_deterministic(self) -> None:
        assert dumps_json({"x": 0.1, "y": 2}) == dumps_json({"y": 2, "x": 0.1})

    def test_creates_parent_directories(self, tmp_path: Path) -> None:
        path = write_bytes_atomic(tmp_path / "a" / "b" / "c.bin", b"data")
        assert path.read_bytes() == b"data"

    def test_failed_replace_leaves_no_temp_file(self, tmp_path: Path) -> None:
        target = tmp_path / "out.json"
        target.write_bytes(b"old")
        with (
            patch("gradedcavity.output.writers.os.replace", side_effect=OSError("disk full")),
            pytest.raises(OSError, match="disk full"),
        ):
            write_bytes_atomic(target, b"new")
        assert target.read_bytes() == b"old"
        assert os.listdir(tmp_path) == ["out.json"]

    def test_csv_floats_round_trip(self) -> None:
        text = csv_text(["a", "b", "c"], [[0.1, None, "TE"], [1e-300, 2, True]])
        lines = text.splitlines()
        assert lines[0] == "a,b,c"
        assert lines[1] == "0.1,,TE"
        assert lines[2] == "1e-300,2,True"
        assert float(lines[2].split(",")[0]) == 1e-300

    def test_output_set_records_relative_names(self, tmp_path: Path) -> None:
        out = OutputSet(tmp_path / "run")
        out.json("a.json", {})
        out.csv("b.csv", ["x"], [[1.0]])
        out.text("a.json", "{}\n")
        assert out.files == ["a.json", "b.csv"]
        assert (tmp_path / "run" / "b.csv").read_text() == "x\n1.0\n"


class TestCacheKey:
    def test_depends_on_cutoff(self) -> None:
        settings = SolverSettings()
        assert cache_key("spectrum", GEOMETRY, PROFILE, 5.0, settings) != cache_key(
            "spectrum", GEOMETRY, PROFILE, 6.0, settings,
        )

    def test_depends_on_profile(self) -> None:
        settings = SolverSettings()
        graded = DielectricProfile(beta=1.0, alpha=0.5)
        assert cache_key("spectrum", GEOMETRY, PROFILE, 5.0, settings) != cache_key(
            "spectrum", GEOMETRY, graded, 5.0, settings,
        )

    def test_ignores_thread_count(self) -> None:
        assert cache_key("spectrum", GEOMETRY, PROFILE, 5.0, SolverSettings()) == cache_key(
            "spectrum", GEOMETRY, PROFILE, 5.0, SolverSettings(threads=8),
        )


class TestSpectrumCache:
    def test_put_then_get(self, tmp_path: Path) -> None:
        metrics = MetricsRegistry()
        cache = SpectrumCache(tmp_path / "cache", metrics)
        table = _table()
        cache.put("abc", table)
        loaded = cache.get("abc")
        assert loaded is not None
        assert loaded.records == table.records
        assert loaded.content_hash() == table.content_hash()
        assert metrics.counter("cache_hits") == 1

    def test_miss(self, tmp_path: Path) -> None:
        metrics = MetricsRegistry()
        assert SpectrumCache(tmp_path, metrics).get("missing") is None
        assert metrics.counter("cache_misses") == 1

    def test_corrupt_entry_is_a_miss(self, tmp_path: Path) -> None:
        metrics = MetricsRegistry()
        cache = SpectrumCache(tmp_path, metrics)
        cache.path_for("bad").write_bytes(b"{not json")
        assert cache.get("bad") is None
        assert metrics.counter("cache_misses") == 1


class TestManifest:
    def test_finish(self) -> None:
        manifest = ResultManifest(config_hash="h", command="spectrum")
        manifest.finish(["spectrum.csv", "spectrum.csv", "metrics.json"], exit_code=0)
        assert manifest.files == ["manifest.json", "metrics.json", "spectrum.csv"]
        assert manifest.timing["wall_seconds"] >= 0.0

    def test_warnings_are_deduplicated(self) -> None:
        manifest = ResultManifest(config_hash="h", command="observables")
        manifest.warn("incomplete")
        manifest.warn("incomplete")
        assert manifest.warnings == ["incomplete"]

    def test_to_dict(self) -> None:
        manifest = ResultManifest(config_hash="h", command="verify", arguments={"n_modes": 3})
        manifest.finish([MANIFEST_NAME], status="failed", exit_code=3)
        data = manifest.to_dict()
        assert data["status"] == "failed"
        assert data["exit_code"] == 3
        assert data["arguments"] == {"n_modes": 3}
        assert data["units"] == {}
        assert "_started" not in data
