"""Entry point: ``python -m gradedcavity [spectrum|verify|observables|sweep|field]``.

Loads the TOML config, applies command-line overrides and runs one batch
command. Exit codes: 0 success, 2 validation error, 3 solver failure,
4 tolerance violation.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from gradedcavity.commands import (
    EXIT_OK,
    EXIT_VALIDATION,
    SWEEP_PARAMETERS,
    CommandOutcome,
    GridSpec,
    cmd_field,
    cmd_observables,
    cmd_spectrum,
    cmd_sweep,
    cmd_verify,
    exit_code_for,
    parse_mode_index,
)
from gradedcavity.config import RunConfig, apply_overrides, load_config
from gradedcavity.logging_setup import setup_logging
from gradedcavity.metrics import MetricsRegistry
from gradedcavity.output.manifest import MANIFEST_NAME
from gradedcavity.types import RegulatorKind, UnitSystem

logger = logging.getLogger(__name__)


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, help="Config file path")
    common.add_argument("--json-log", action="store_true", help="JSON log output")
    common.add_argument("--metrics", action="store_true", help="Write metrics.json with the run")
    common.add_argument("--Lx", type=float, help="Box length along x")
    common.add_argument("--Ly", type=float, help="Box length along y")
    common.add_argument("--Lz", type=float, help="Box length along the grading axis")
    common.add_argument("--alpha", type=float, help="Grading exponent")
    common.add_argument("--beta", type=float, help="Permittivity at z = 0 in units of eps0")
    common.add_argument("--omega-max", type=float, help="Spectrum cutoff")
    common.add_argument("--mode-count", type=int, help="Grow the cutoff to reach this many modes")
    common.add_argument("--kappa", type=float, help="Regulator parameter")
    common.add_argument(
        "--regulator", choices=[k.value for k in RegulatorKind], help="Regulator kind",
    )
    common.add_argument(
        "--allow-truncated", action="store_true", default=None,
        help="Permit unregulated (kappa = 0) sums",
    )
    common.add_argument("--units", choices=[u.value for u in UnitSystem], help="Unit system")
    common.add_argument("--out", "-o", type=str, help="Output directory")
    common.add_argument("--threads", type=int, help="Worker threads")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradedcavity",
        description="Spectrum, mode fields and vacuum observables of a graded-dielectric cavity",
    )
    sub = parser.add_subparsers(dest="command")
    common = _common_parser()

    sub.add_parser("spectrum", parents=[common], help="Solve and write the mode spectrum")

    verify_parser = sub.add_parser(
        "verify", parents=[common], help="Check energy and force identities per mode",
    )
    verify_parser.add_argument("--n-modes", "-n", type=int, default=50, help="Modes to verify")

    sub.add_parser(
        "observables", parents=[common], help="Regularized energy and force difference",
    )

    sweep_parser = sub.add_parser("sweep", parents=[common], help="Sweep one parameter")
    sweep_parser.add_argument(
        "--parameter", "-p", required=True, choices=list(SWEEP_PARAMETERS),
        help="Parameter to vary",
    )
    sweep_parser.add_argument(
        "--values", "-v", required=True, type=_float_list, help="Comma-separated values",
    )

    field_parser = sub.add_parser("field", parents=[common], help="Write one mode's fields")
    field_parser.add_argument("--mode", "-m", required=True, help="Mode index, e.g. TE(1,0,1)")
    field_parser.add_argument(
        "--grid", "-g", default="5", help='Points per axis: "n" or "nx,ny,nz"',
    )

    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "geometry.Lx": args.Lx,
        "geometry.Ly": args.Ly,
        "geometry.Lz": args.Lz,
        "profile.alpha": args.alpha,
        "profile.beta": args.beta,
        "solver.omega_max": args.omega_max,
        "solver.mode_count": args.mode_count,
        "solver.threads": args.threads,
        "regulator.kind": args.regulator,
        "regulator.kappa": args.kappa,
        "regulator.allow_truncated": args.allow_truncated,
        "units": args.units,
        "output.out_dir": args.out,
    }


def _dispatch(
    args: argparse.Namespace, cfg: RunConfig, metrics: MetricsRegistry | None,
) -> CommandOutcome:
    if args.command == "spectrum":
        return cmd_spectrum(cfg, metrics=metrics)
    if args.command == "verify":
        return cmd_verify(cfg, args.n_modes, metrics=metrics)
    if args.command == "observables":
        return cmd_observables(cfg, metrics=metrics)
    if args.command == "sweep":
        return cmd_sweep(cfg, args.parameter, args.values, metrics=metrics)
    return cmd_field(
        cfg, parse_mode_index(args.mode), GridSpec.parse(args.grid), metrics=metrics,
    )


def main(argv: list[str] | None = None) -> None:
    """CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        sys.exit(EXIT_VALIDATION)

    setup_logging(json_output=args.json_log)
    try:
        cfg = load_config(Path(args.config) if args.config else None)
        apply_overrides(cfg, _overrides(args))
        setup_logging(level=cfg.log_level, json_output=args.json_log)
        metrics = MetricsRegistry() if args.metrics else None
        outcome = _dispatch(args, cfg, metrics)
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        logger.error("%s: %s", type(exc).__name__, exc)
        sys.exit(code)

    print(outcome.directory / MANIFEST_NAME)
    if outcome.exit_code != EXIT_OK:
        sys.exit(outcome.exit_code)


if __name__ == "__main__":
    main()
