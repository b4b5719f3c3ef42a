"""Shared test fixtures."""

from __future__ import annotations

from pathlib import Path

import pytest

from gradedcavity.config import RunConfig, load_config
from gradedcavity.fields.mode_fields import attach_normalizations
from gradedcavity.spectrum.solver import enumerate_modes
from gradedcavity.spectrum.table import SpectrumTable
from gradedcavity.types import CavityGeometry, DielectricProfile


@pytest.fixture
def default_config() -> RunConfig:
    return load_config(Path("/dev/null"))  # All defaults


@pytest.fixture
def small_config(tmp_path: Path) -> RunConfig:
    """Defaults with a low cutoff and output under tmp_path."""
    cfg = load_config(Path("/dev/null"))
    cfg.solver.omega_max = 5.0
    cfg.output.out_dir = str(tmp_path / "results")
    return cfg


@pytest.fixture(scope="session")
def unit_cube() -> CavityGeometry:
    return CavityGeometry(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def graded_profile() -> DielectricProfile:
    return DielectricProfile(beta=1.0, alpha=1.0)


@pytest.fixture(scope="session")
def graded_table(unit_cube: CavityGeometry, graded_profile: DielectricProfile) -> SpectrumTable:
    """Normalized spectrum of the unit cube with alpha = beta = 1 up to omega = 7."""
    return attach_normalizations(enumerate_modes(unit_cube, graded_profile, 7.0))
