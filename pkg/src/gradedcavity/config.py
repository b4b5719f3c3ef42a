"""Configuration loading from TOML with dataclass defaults."""

from __future__ import annotations

import hashlib
import logging
import math
import tomllib
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, TypeGuard

import orjson

from gradedcavity.types import RegulatorKind, UnitSystem

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parent.parent.parent / "config" / "default.toml"

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class GeometryConfig:
    """Box edge lengths (natural units, or metres when units = "SI")."""

    Lx: float = 1.0
    Ly: float = 1.0
    Lz: float = 1.0


@dataclass
class ProfileConfig:
    alpha: float = 1.0
    beta: float = 1.0


@dataclass
class SolverConfig:
    omega_max: float = 12.0
    mode_count: int = 0  # > 0: raise omega_max until the table holds this many modes
    scan_fraction: float = 0.125
    max_halvings: int = 4
    small_alpha_threshold: float = 1e-4
    include_tm_zero: bool = True
    reference_eps_r: float = 0.0  # 0 = beta * exp(alpha / 2)
    threads: int = 1


@dataclass
class RegulatorConfig:
    kind: str = "exponential"  # "exponential", "gaussian" or "none"
    kappa: float = 0.2
    allow_truncated: bool = False


@dataclass
class QuadratureConfig:
    z_rtol: float = 1e-10
    xy_extra_order: int = 16
    tail_rtol: float = 1e-2
    verify_rtol: float = 1e-6


@dataclass
class OutputConfig:
    out_dir: str = "results"
    use_cache: bool = True


@dataclass
class RunConfig:
    units: str = "natural"  # "natural" or "SI"
    log_level: str = "INFO"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    regulator: RegulatorConfig = field(default_factory=RegulatorConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


def _apply_toml_section(obj: object, data: Mapping[str, Any]) -> None:
    """Recursively apply TOML dict values onto a dataclass instance."""
    for key, value in data.items():
        if not hasattr(obj, key):
            logger.warning("Unknown config key: %s", key)
            continue
        current = getattr(obj, key)
        if isinstance(value, Mapping) and hasattr(current, "__dataclass_fields__"):
            _apply_toml_section(current, value)
        elif (
            isinstance(current, float)
            and isinstance(value, int)
            and not isinstance(value, bool)
        ):
            # TOML writes 1 for 1.0
            setattr(obj, key, float(value))
        else:
            setattr(obj, key, value)


class ConfigError(ValueError):
    """Raised when configuration validation fails."""


def _is_number(value: object) -> TypeGuard[float]:
    return isinstance(value, int | float) and not isinstance(value, bool)


def validate_config(cfg: RunConfig) -> list[str]:
    """Validate config values and return list of errors (empty = valid)."""
    errors: list[str] = []

    def positive(name: str, value: object) -> None:
        if not (_is_number(value) and math.isfinite(value) and value > 0):
            errors.append(f"{name} must be a positive finite number, got {value!r}")

    def in_range(name: str, value: object, lo: float, hi: float) -> None:
        if not (_is_number(value) and lo <= value <= hi):
            errors.append(f"{name} must be in [{lo:g}, {hi:g}], got {value!r}")

    # Run
    if cfg.units not in {u.value for u in UnitSystem}:
        errors.append("units must be 'natural' or 'SI'")
    if str(cfg.log_level).upper() not in LOG_LEVELS:
        errors.append(f"log_level must be one of {', '.join(LOG_LEVELS)}")

    # Geometry and profile
    positive("geometry.Lx", cfg.geometry.Lx)
    positive("geometry.Ly", cfg.geometry.Ly)
    positive("geometry.Lz", cfg.geometry.Lz)
    positive("profile.beta", cfg.profile.beta)
    in_range("profile.alpha", cfg.profile.alpha, 0.0, 50.0)

    # Solver
    positive("solver.omega_max", cfg.solver.omega_max)
    in_range("solver.mode_count", cfg.solver.mode_count, 0, 100_000)
    in_range("solver.scan_fraction", cfg.solver.scan_fraction, 1e-4, 0.5)
    in_range("solver.max_halvings", cfg.solver.max_halvings, 1, 12)
    in_range("solver.small_alpha_threshold", cfg.solver.small_alpha_threshold, 0.0, 1e-2)
    in_range("solver.reference_eps_r", cfg.solver.reference_eps_r, 0.0, math.inf)
    in_range("solver.threads", cfg.solver.threads, 1, 256)
    if not isinstance(cfg.solver.include_tm_zero, bool):
        errors.append("solver.include_tm_zero must be true or false")
    for name in ("mode_count", "max_halvings", "threads"):
        if not isinstance(getattr(cfg.solver, name), int):
            errors.append(f"solver.{name} must be an integer")

    # Regulator
    if cfg.regulator.kind not in {k.value for k in RegulatorKind}:
        errors.append("regulator.kind must be 'exponential', 'gaussian', or 'none'")
    in_range("regulator.kappa", cfg.regulator.kappa, 0.0, math.inf)

    # Quadrature
    in_range("quadrature.z_rtol", cfg.quadrature.z_rtol, 1e-14, 1e-3)
    in_range("quadrature.xy_extra_order", cfg.quadrature.xy_extra_order, 0, 256)
    in_range("quadrature.tail_rtol", cfg.quadrature.tail_rtol, 1e-15, 1.0)
    in_range("quadrature.verify_rtol", cfg.quadrature.verify_rtol, 1e-14, 1.0)

    # Output
    if not cfg.output.out_dir:
        errors.append("output.out_dir must not be empty")

    return errors


def _raise_if_invalid(cfg: RunConfig) -> None:
    errors = validate_config(cfg)
    if errors:
        for err in errors:
            logger.error("Config validation error: %s", err)
        raise ConfigError(f"Invalid configuration: {'; '.join(errors)}")


def load_config(path: Path | None = None) -> RunConfig:
    """Load config from TOML file, falling back to defaults."""
    cfg = RunConfig()
    config_path = path or DEFAULT_CONFIG_PATH
    if config_path.exists():
        with open(config_path, "rb") as f:
            try:
                data = tomllib.load(f)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"Cannot parse {config_path}: {exc}") from exc
        _apply_toml_section(cfg, data)
        logger.info("Loaded config from %s", config_path)
    else:
        logger.info("No config file at %s, using defaults", config_path)

    _raise_if_invalid(cfg)
    return cfg


def apply_overrides(cfg: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Set dotted keys ("profile.alpha") on cfg in place; None values are skipped."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        *path, key = dotted.split(".")
        target: object = cfg
        for part in path:
            target = getattr(target, part, None)
            if target is None or not hasattr(target, "__dataclass_fields__"):
                raise ConfigError(f"Unknown config section in override: {dotted}")
        if not hasattr(target, key):
            raise ConfigError(f"Unknown config key in override: {dotted}")
        _apply_toml_section(target, {key: value})
        logger.debug("Override %s = %r", dotted, value)
    _raise_if_invalid(cfg)
    return cfg


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    return asdict(cfg)


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    cfg = RunConfig()
    _apply_toml_section(cfg, data)
    _raise_if_invalid(cfg)
    return cfg


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the sorted-key JSON encoding of the whole config."""
    encoded = orjson.dumps(config_to_dict(cfg), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(encoded).hexdigest()
