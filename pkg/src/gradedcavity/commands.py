"""Batch commands behind the CLI: spectrum, verify, observables, sweep, field.

Each command resolves the config into natural units, writes its files under
<out_dir>/<command>/ through an OutputSet and finishes with manifest.json.
Library exceptions are mapped to exit codes here; anything unmapped is a bug
and propagates.
"""

from __future__ import annotations

import copy
import dataclasses
import logging
import re
import time
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from gradedcavity.config import ConfigError, RunConfig, apply_overrides, config_hash
from gradedcavity.fields.mode_fields import (
    FIELD_CSV_COLUMNS,
    NormalizationError,
    StepSizeError,
    UnsolvedModeError,
    attach_normalizations,
    field_grid_rows,
)
from gradedcavity.fields.quadrature import QuadratureError
from gradedcavity.observables.regularization import (
    Regulator,
    RegulatorError,
    TableMismatchError,
    VacuumSumResult,
    homogeneous_subtraction,
    regularized_sum,
)
from gradedcavity.observables.vacuum import (
    ModeCheck,
    check_mode,
    expected_force_difference,
    face_force_closed_form,
    measure_convention_constant,
)
from gradedcavity.output.cache import SpectrumCache, cache_key
from gradedcavity.output.manifest import MANIFEST_NAME, ResultManifest
from gradedcavity.output.writers import OutputSet
from gradedcavity.special.bessel import BesselDomainError
from gradedcavity.spectrum.homogeneous import homogeneous_limit_eps, homogeneous_spectrum
from gradedcavity.spectrum.solver import RootScanError, SolverSettings, enumerate_modes
from gradedcavity.spectrum.table import ModeRecord, SpectrumTable
from gradedcavity.types import (
    CavityGeometry,
    DielectricProfile,
    ModeIndex,
    ModeIndexError,
    Observable,
    Polarization,
    RegulatorKind,
    UnitSystem,
)
from gradedcavity.units import (
    UnitScales,
    energy_to_si,
    force_to_si,
    geometry_to_natural,
    kappa_to_natural,
    omega_to_natural,
    scales_for,
    unit_tag,
)

if TYPE_CHECKING:
    from gradedcavity.metrics import MetricsRegistry

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_TOLERANCE = 4

# lowest profiled modes the observables command measures the convention constant on
CONVENTION_MODES = 2
# mode_count targets raise omega_max by this factor per attempt
GROWTH_FACTOR = 1.25
MAX_GROWTH_STEPS = 40

SWEEP_PARAMETERS = {
    "alpha": "profile.alpha",
    "beta": "profile.beta",
    "kappa": "regulator.kappa",
    "Lz": "geometry.Lz",
}
SWEEP_COLUMNS = (
    "parameter", "value", "observable", "result", "mode_count",
    "tail_bound", "complete", "kappa", "status",
)

SOLVER_ERRORS: tuple[type[BaseException], ...] = (
    RootScanError,
    NormalizationError,
    QuadratureError,
    UnsolvedModeError,
    BesselDomainError,
    ArithmeticError,
)
VALIDATION_ERRORS: tuple[type[BaseException], ...] = (
    ConfigError,
    ModeIndexError,
    RegulatorError,
    TableMismatchError,
    StepSizeError,
    ValueError,
)


def exit_code_for(exc: BaseException) -> int | None:
    """Exit status for a library exception; None when it is not a known failure."""
    # Solver errors first: several of them subclass ValueError.
    if isinstance(exc, SOLVER_ERRORS):
        return EXIT_SOLVER
    if isinstance(exc, VALIDATION_ERRORS):
        return EXIT_VALIDATION
    return None


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResolvedRun:
    """A validated config turned into natural-unit library objects."""

    cfg: RunConfig
    units: UnitSystem
    scales: UnitScales
    geometry: CavityGeometry
    profile: DielectricProfile
    omega_max: float
    regulator: Regulator
    settings: SolverSettings
    reference_eps_r: float
    out_dir: Path

    @property
    def mode_count(self) -> int:
        return self.cfg.solver.mode_count

    @property
    def unit_tag(self) -> dict[str, Any]:
        return unit_tag(self.units, self.scales)

    def to_output_units(self, observable: Observable, value: float) -> float:
        if observable is Observable.ENERGY:
            return energy_to_si(value, self.scales)
        return force_to_si(value, self.scales)


def resolve(cfg: RunConfig) -> ResolvedRun:
    units = UnitSystem(cfg.units)
    given = CavityGeometry(cfg.geometry.Lx, cfg.geometry.Ly, cfg.geometry.Lz)
    scales = scales_for(units, given)
    profile = DielectricProfile(beta=cfg.profile.beta, alpha=cfg.profile.alpha)
    return ResolvedRun(
        cfg=cfg,
        units=units,
        scales=scales,
        geometry=geometry_to_natural(given, scales),
        profile=profile,
        omega_max=omega_to_natural(cfg.solver.omega_max, scales),
        regulator=Regulator(
            RegulatorKind(cfg.regulator.kind),
            kappa_to_natural(cfg.regulator.kappa, scales),
        ),
        settings=SolverSettings(
            scan_fraction=cfg.solver.scan_fraction,
            max_halvings=cfg.solver.max_halvings,
            small_alpha_threshold=cfg.solver.small_alpha_threshold,
            include_tm_zero=cfg.solver.include_tm_zero,
            threads=cfg.solver.threads,
        ),
        reference_eps_r=cfg.solver.reference_eps_r or homogeneous_limit_eps(profile),
        out_dir=Path(cfg.output.out_dir),
    )


# ---------------------------------------------------------------------------
# Spectrum with cache
# ---------------------------------------------------------------------------


def _solve_at(
    run: ResolvedRun,
    omega_max: float,
    metrics: MetricsRegistry | None,
    memo: dict[str, SpectrumTable] | None,
) -> SpectrumTable:
    key = cache_key("spectrum", run.geometry, run.profile, omega_max, run.settings)
    if memo is not None and key in memo:
        return memo[key]
    cache = SpectrumCache(run.out_dir / "cache", metrics) if run.cfg.output.use_cache else None
    table = cache.get(key) if cache is not None else None
    if table is None:
        table = enumerate_modes(
            run.geometry, run.profile, omega_max, settings=run.settings, metrics=metrics,
        )
        table = attach_normalizations(table, threads=run.settings.threads)
        if cache is not None:
            cache.put(key, table)
    if memo is not None:
        memo[key] = table
    return table


def solve_spectrum(
    run: ResolvedRun,
    *,
    metrics: MetricsRegistry | None = None,
    memo: dict[str, SpectrumTable] | None = None,
) -> SpectrumTable:
    """Normalized spectrum up to omega_max, grown until it holds mode_count modes."""
    omega_max = run.omega_max
    for _ in range(MAX_GROWTH_STEPS):
        table = _solve_at(run, omega_max, metrics, memo)
        if metrics is not None:
            metrics.gauge_set("spectrum_modes", len(table))
        if len(table) >= run.mode_count:
            return table
        logger.info(
            "%d modes below omega_max=%g, need %d; raising the cutoff",
            len(table), omega_max, run.mode_count,
        )
        omega_max *= GROWTH_FACTOR
    raise ConfigError(
        f"mode_count={run.mode_count} not reached within {MAX_GROWTH_STEPS} cutoff increases"
    )


def reference_spectrum(run: ResolvedRun, omega_max: float) -> SpectrumTable:
    """Homogeneous reference table at the same cutoff."""
    return homogeneous_spectrum(
        run.geometry,
        run.reference_eps_r,
        omega_max,
        eps0=run.profile.eps0,
        mu0=run.profile.mu0,
        hbar=run.profile.hbar,
        include_tm_zero=run.settings.include_tm_zero,
    )


# ---------------------------------------------------------------------------
# Command harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommandOutcome:
    exit_code: int
    manifest: ResultManifest
    directory: Path


CommandBody = Callable[[ResolvedRun, OutputSet, ResultManifest], int]


@contextmanager
def _stage(manifest: ResultManifest, name: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        manifest.timing[f"{name}_seconds"] = time.perf_counter() - start


def _execute(
    command: str,
    cfg: RunConfig,
    arguments: dict[str, Any],
    body: CommandBody,
    metrics: MetricsRegistry | None,
) -> CommandOutcome:
    run = resolve(cfg)
    out = OutputSet(run.out_dir / command)
    manifest = ResultManifest(config_hash=config_hash(cfg), command=command, arguments=arguments)
    manifest.units = run.unit_tag
    status = "ok"
    try:
        exit_code = body(run, out, manifest)
        if exit_code == EXIT_TOLERANCE:
            status = "tolerance_violation"
        elif exit_code != EXIT_OK:
            status = "failed"
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        logger.error("%s failed: %s", command, exc)
        manifest.errors.append(f"{type(exc).__name__}: {exc}")
        exit_code, status = code, "failed"
    if metrics is not None:
        out.json("metrics.json", metrics.snapshot())
        out.text("metrics.prom", metrics.format_prometheus())
    manifest.finish([*out.files, MANIFEST_NAME], status=status, exit_code=exit_code)
    out.json(MANIFEST_NAME, manifest.to_dict())
    logger.info(
        "%s finished with status %s (exit %d), %d files in %s",
        command, status, exit_code, len(manifest.files), out.root,
    )
    return CommandOutcome(exit_code=exit_code, manifest=manifest, directory=out.root)


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig, *, metrics: MetricsRegistry | None = None) -> CommandOutcome:
    """Solve the spectrum and write spectrum.csv and spectrum.json."""

    def body(run: ResolvedRun, out: OutputSet, manifest: ResultManifest) -> int:
        with _stage(manifest, "solve"):
            table = solve_spectrum(run, metrics=metrics)
        out.text("spectrum.csv", table.to_csv())
        out.json("spectrum.json", {**table.to_dict(), "units": run.unit_tag})
        if not table.records:
            manifest.warn(f"no modes below omega_max={table.omega_max!r}")
        return EXIT_OK

    return _execute("spectrum", cfg, {}, body, metrics)


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _check_or_error(
    run: ResolvedRun, mode: ModeRecord, metrics: MetricsRegistry | None,
) -> ModeCheck | str:
    try:
        return check_mode(
            mode,
            run.geometry,
            run.profile,
            rtol=run.cfg.quadrature.z_rtol,
            extra_order=run.cfg.quadrature.xy_extra_order,
            metrics=metrics,
        )
    except (QuadratureError, ArithmeticError, ValueError) as exc:
        logger.error("%s: quadrature failed: %s", mode.index.label(), exc)
        return f"{mode.index.label()}: {exc}"


def _closed_form_ratio(run: ResolvedRun, mode: ModeRecord) -> float:
    delta = face_force_closed_form(
        mode, run.geometry, run.profile, 0.0,
    ) - face_force_closed_form(mode, run.geometry, run.profile, run.geometry.L_z)
    return delta / expected_force_difference(mode, run.geometry, run.profile)


def cmd_verify(
    cfg: RunConfig, n_modes: int, *, metrics: MetricsRegistry | None = None,
) -> CommandOutcome:
    """Energy and force-difference identities over the n_modes lowest modes."""
    if n_modes < 1:
        raise ConfigError(f"n_modes must be >= 1, got {n_modes}")

    def body(run: ResolvedRun, out: OutputSet, manifest: ResultManifest) -> int:
        tolerance = run.cfg.quadrature.verify_rtol
        with _stage(manifest, "solve"):
            table = solve_spectrum(run, metrics=metrics)
        modes = [r for r in table.records if r.has_profile][:n_modes]
        skipped = sum(1 for r in table.records if not r.has_profile)
        if skipped:
            manifest.warn(f"{skipped} closed-form modes have no Bessel profile to verify")
        if not modes:
            manifest.warn("nothing to verify")
            out.json("verify.json", {
                "status": "nothing to verify",
                "requested": n_modes,
                "mode_count": 0,
                "tolerance": tolerance,
                "modes": [],
                "failures": [],
            })
            return EXIT_OK
        if len(modes) < n_modes:
            manifest.warn(f"only {len(modes)} of {n_modes} requested modes below omega_max")

        with _stage(manifest, "quadrature"):
            threads = run.settings.threads
            if threads > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(lambda m: _check_or_error(run, m, metrics), modes))
            else:
                results = [_check_or_error(run, m, metrics) for m in modes]
        checks = [r for r in results if isinstance(r, ModeCheck)]
        failures = [r for r in results if isinstance(r, str)]

        report: dict[str, Any] = {
            "requested": n_modes,
            "mode_count": len(modes),
            "tolerance": tolerance,
            "failures": failures,
        }
        violated = bool(failures)
        if checks:
            measurement = measure_convention_constant(checks)
            c = measurement.constant
            manifest.convention_constant = c
            entries = []
            for check in checks:
                entry = check.to_dict(c)
                entry["energy_deviation"] = abs(check.energy_ratio / c - 1.0)
                entry["force_deviation"] = abs(check.force_ratio(c) - 1.0)
                entry["force_ratio_closed_form"] = _closed_form_ratio(run, check.mode) / c
                entries.append(entry)
            max_force = max(e["force_deviation"] for e in entries)
            report.update({
                "convention_constant": c,
                "convention_spread": measurement.max_relative_spread,
                "max_energy_deviation": max(e["energy_deviation"] for e in entries),
                "max_force_deviation": max_force,
                "modes": entries,
            })
            violated = violated or measurement.max_relative_spread > tolerance
            violated = violated or max_force > tolerance
        else:
            report["modes"] = []

        report["status"] = "failed" if failures else "violated" if violated else "ok"
        out.json("verify.json", report)
        if failures:
            manifest.errors.extend(failures)
            return EXIT_SOLVER
        if violated:
            manifest.warn(f"verification tolerance {tolerance:g} exceeded")
            return EXIT_TOLERANCE
        return EXIT_OK

    return _execute("verify", cfg, {"n_modes": n_modes}, body, metrics)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def _result_payload(run: ResolvedRun, result: VacuumSumResult) -> dict[str, Any]:
    data = result.to_dict()
    data["units"] = run.units.value
    data["value_natural"] = result.value
    data["value"] = run.to_output_units(result.observable, result.value)
    if data["tail_bound"] is not None:
        data["tail_bound"] = run.to_output_units(result.observable, result.tail_bound)
    data["kappa"] = run.cfg.regulator.kappa
    return data


def observable_results(run: ResolvedRun, table: SpectrumTable) -> dict[str, VacuumSumResult]:
    """Energy, force difference and (for kappa > 0) the homogeneous subtraction."""
    tail_rtol = run.cfg.quadrature.tail_rtol
    allow = run.cfg.regulator.allow_truncated
    results = {
        "energy": regularized_sum(
            table, run.regulator, Observable.ENERGY, allow_truncated=allow, tail_rtol=tail_rtol,
        ),
        "force_difference": regularized_sum(
            table, run.regulator, Observable.FORCE_DIFFERENCE,
            allow_truncated=allow, tail_rtol=tail_rtol,
        ),
    }
    if not run.regulator.is_trivial:
        reference = reference_spectrum(run, table.omega_max)
        results["subtraction"] = homogeneous_subtraction(
            table, reference, run.regulator, tail_rtol=tail_rtol,
        )
    return results


def measured_convention_constant(
    run: ResolvedRun, table: SpectrumTable, metrics: MetricsRegistry | None,
) -> float | None:
    """Energy quadrature over the lowest profiled modes; None for closed-form tables."""
    modes = [r for r in table.records if r.has_profile][:CONVENTION_MODES]
    if not modes:
        return None
    checks = [
        check_mode(
            mode,
            run.geometry,
            run.profile,
            rtol=run.cfg.quadrature.z_rtol,
            extra_order=run.cfg.quadrature.xy_extra_order,
            metrics=metrics,
        )
        for mode in modes
    ]
    measurement = measure_convention_constant(checks)
    logger.info(
        "Convention constant %.12g from %d modes (spread %.2g)",
        measurement.constant, measurement.count, measurement.max_relative_spread,
    )
    return measurement.constant


def cmd_observables(
    cfg: RunConfig, *, metrics: MetricsRegistry | None = None,
) -> CommandOutcome:
    """Regularized energy, force difference and homogeneous subtraction as JSON."""

    def body(run: ResolvedRun, out: OutputSet, manifest: ResultManifest) -> int:
        with _stage(manifest, "solve"):
            table = solve_spectrum(run, metrics=metrics)
        with _stage(manifest, "sums"):
            results = observable_results(run, table)
        with _stage(manifest, "quadrature"):
            c = measured_convention_constant(run, table, metrics)
        if c is None:
            manifest.warn("convention constant not measured: no Bessel-profile modes")
        else:
            manifest.convention_constant = c
            results = {
                name: dataclasses.replace(result, convention_constant=c)
                for name, result in results.items()
            }
        if "subtraction" not in results:
            manifest.warn("homogeneous subtraction skipped: regulator is trivial")
        for name, result in results.items():
            out.json(f"{name}.json", _result_payload(run, result))
            if not result.complete:
                manifest.warn(f"{name}: tail bound exceeds tail_rtol; result is incomplete")
        return EXIT_OK

    return _execute("observables", cfg, {}, body, metrics)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_rows(
    parameter: str, value: float, run: ResolvedRun, results: dict[str, VacuumSumResult],
) -> list[list[Any]]:
    rows = []
    for name, result in results.items():
        payload = _result_payload(run, result)
        rows.append([
            parameter, value, name, payload["value"], result.mode_count,
            payload["tail_bound"], result.complete, payload["kappa"], "ok",
        ])
    return rows


def cmd_sweep(
    cfg: RunConfig,
    parameter: str,
    values: Sequence[float],
    *,
    metrics: MetricsRegistry | None = None,
) -> CommandOutcome:
    """Long-format CSV with one row per (value, observable); failed points are marked."""
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(
            f"sweep parameter must be one of {', '.join(SWEEP_PARAMETERS)}, got {parameter!r}"
        )
    if not values:
        raise ConfigError("sweep needs at least one value")
    dotted = SWEEP_PARAMETERS[parameter]

    def body(run: ResolvedRun, out: OutputSet, manifest: ResultManifest) -> int:
        memo: dict[str, SpectrumTable] = {}
        rows: list[list[Any]] = []
        failed = 0
        for i, value in enumerate(values):
            try:
                point_cfg = apply_overrides(copy.deepcopy(run.cfg), {dotted: float(value)})
                point = resolve(point_cfg)
                with _stage(manifest, f"point_{i}"):
                    table = solve_spectrum(point, metrics=metrics, memo=memo)
                    results = observable_results(point, table)
            except Exception as exc:
                code = exit_code_for(exc)
                if code is None:
                    raise
                failed += 1
                message = f"{parameter}={value!r}: {type(exc).__name__}: {exc}"
                logger.error("Sweep point failed: %s", message)
                manifest.errors.append(message)
                rows.append([parameter, value, "", None, 0, None, False, None, "failed"])
                continue
            for name, result in results.items():
                if not result.complete:
                    manifest.warn(f"{parameter}={value!r} {name}: result is incomplete")
            rows.extend(_sweep_rows(parameter, value, point, results))
        out.csv("sweep.csv", SWEEP_COLUMNS, rows)
        return EXIT_SOLVER if failed else EXIT_OK

    arguments = {"parameter": parameter, "values": [float(v) for v in values]}
    return _execute("sweep", cfg, arguments, body, metrics)


# ---------------------------------------------------------------------------
# field
# ---------------------------------------------------------------------------


_MODE_PATTERN = re.compile(
    r"^\s*(TE|TM)\s*[(,:\s]\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)?\s*$", re.IGNORECASE,
)


def parse_mode_index(text: str) -> ModeIndex:
    """Parse "TE(1,0,1)" or "TE,1,0,1"."""
    match = _MODE_PATTERN.match(text)
    if match is None:
        raise ModeIndexError(f"cannot parse mode index {text!r}; expected e.g. TE(1,0,1)")
    pol, n_x, n_y, p = match.groups()
    return ModeIndex(Polarization(pol.upper()), int(n_x), int(n_y), int(p))


@dataclass(frozen=True)
class GridSpec:
    """Points per axis, walls included."""

    nx: int = 5
    ny: int = 5
    nz: int = 5

    def __post_init__(self) -> None:
        if min(self.nx, self.ny, self.nz) < 2:
            raise ConfigError(f"field grid needs >= 2 points per axis, got {self}")

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        """Parse "n" or "nx,ny,nz"."""
        try:
            counts = [int(part) for part in text.split(",")]
        except ValueError as exc:
            raise ConfigError(f"invalid grid spec {text!r}") from exc
        if len(counts) == 1:
            counts *= 3
        if len(counts) != 3:
            raise ConfigError(f"grid spec needs 1 or 3 counts, got {text!r}")
        return cls(*counts)

    def axes(self, geometry: CavityGeometry) -> tuple[list[float], list[float], list[float]]:
        return (
            np.linspace(0.0, geometry.L_x, self.nx).tolist(),
            np.linspace(0.0, geometry.L_y, self.ny).tolist(),
            np.linspace(0.0, geometry.L_z, self.nz).tolist(),
        )


def field_file_name(index: ModeIndex) -> str:
    return f"field_{index.pol.value}_{index.n_x}_{index.n_y}_{index.p}.csv"


def cmd_field(
    cfg: RunConfig,
    index: ModeIndex,
    grid: GridSpec | None = None,
    *,
    metrics: MetricsRegistry | None = None,
) -> CommandOutcome:
    """Complex A, e, b, d of one mode on a tensor grid (natural units)."""
    grid = grid or GridSpec()

    def body(run: ResolvedRun, out: OutputSet, manifest: ResultManifest) -> int:
        with _stage(manifest, "solve"):
            table = solve_spectrum(run, metrics=metrics)
        record = table.lookup(index)
        if not record.has_profile:
            raise UnsolvedModeError(
                f"{index.label()} comes from the homogeneous closed form and has no field profile"
            )
        xs, ys, zs = grid.axes(run.geometry)
        with _stage(manifest, "fields"):
            rows = field_grid_rows(record, run.geometry, run.profile, xs, ys, zs)
        out.csv(field_file_name(index), FIELD_CSV_COLUMNS, rows)
        if rows and not np.isfinite(np.asarray(rows)).all():
            manifest.warn("non-finite field values in output")
        return EXIT_OK

    arguments = {"mode": index.label(), "grid": [grid.nx, grid.ny, grid.nz]}
    return _execute("field", cfg, arguments, body, metrics)
