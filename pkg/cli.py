#!/usr/bin/env python3
"""
Emission Command Line

Subcommands:
  run      run the configured methods for one parameter set
  sweep    multi-D1 deviation sweep over (lambda_c, alpha)
  compare  peak positions and widths of saved spectra
  table1   canned reproduction of the deviation table
  figures  canned reproduction of the spectrum figures

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from emission.artifacts import load_state, read_spectrum, write_peak_report
from emission.errors import ConfigurationError, EmissionError
from emission.peaks import compare
from emission.runner import EmissionRunner, SCALE_PRESETS, figures, sweep, table1
from emission.types import Method, PeakReport, RunOutcome, SweepPointResult, SweepSpec
from emission_config_manager import EmissionConfigManager

try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False
    load_dotenv = None

logger = logging.getLogger(__name__)
console = Console()

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=console, rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="config.json", help="JSON run configuration")
    common.add_argument("--output-dir", default=None, help="Directory for artifacts")
    common.add_argument("--jobs", type=int, default=None, help="Worker processes for sweeps")
    common.add_argument("--seed", type=int, default=None, help="Seed of the initial-state noise")
    common.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a dotted config key, e.g. integrator.dt=0.005",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only")

    parser = argparse.ArgumentParser(
        prog="emission", description="Qubit spontaneous emission: multi-D1, TRWA and RWA spectra"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", parents=[common], help="Run the configured methods")
    run.add_argument("--method", default=None, help="Comma-separated subset of multid1,trwa,rwa")
    run.add_argument("--restart", default=None, help="Continue multi-D1 from a state snapshot")

    sweep_cmd = commands.add_parser("sweep", parents=[common], help="Deviation sweep")
    source = sweep_cmd.add_mutually_exclusive_group(required=True)
    source.add_argument("--sweep", dest="sweep_file", default=None, help="JSON sweep file")
    source.add_argument("--lambda-c", type=_float_list, default=None, help="lambda_c values")
    sweep_cmd.add_argument("--alpha", type=_float_list, default=None, help="alpha values")

    compare_cmd = commands.add_parser("compare", parents=[common], help="Peak report of spectra")
    compare_cmd.add_argument("spectra", nargs="+", help="Spectrum CSV files")
    compare_cmd.add_argument("--threshold", type=float, default=None, help="Relative peak height")

    for name, text in (("table1", "Deviation table"), ("figures", "Spectrum figures")):
        preset = commands.add_parser(name, parents=[common], help=text)
        preset.add_argument("--scale", choices=sorted(SCALE_PRESETS), default="desk")
        if name == "figures":
            preset.add_argument("--panel", action="append", default=None, help="e.g. fig2a")

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides = dict(EmissionConfigManager.parse_assignment(a) for a in args.assignments)
    if args.seed is not None:
        overrides["ansatz.seed"] = args.seed
    method = getattr(args, "method", None)
    if method:
        overrides["methods"] = [m.strip() for m in method.split(",") if m.strip()]
    return overrides


def _output_dir(args: argparse.Namespace, manager: EmissionConfigManager) -> Path:
    return Path(
        args.output_dir
        or os.environ.get("EMISSION_OUTPUT_DIR")
        or manager.get_output_directory()
    )


def _jobs(args: argparse.Namespace) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    try:
        return max(1, int(os.environ.get("EMISSION_JOBS", "1")))
    except ValueError:
        raise ConfigurationError("EMISSION_JOBS must be an integer", ["EMISSION_JOBS"])


def _print_run(outcome: RunOutcome) -> None:
    table = Table(title=f"Run {outcome.run_id}")
    table.add_column("method")
    table.add_column("status")
    table.add_column("max sigma^2")
    for m in outcome.methods:
        sigma2 = f"{m.sigma2_max:.4g}" if m.sigma2_max is not None else "-"
        table.add_row(m.method.value, m.status if m.ok else f"[red]{m.status}[/red]", sigma2)
    console.print(table)
    console.print(f"Artifacts in {outcome.output_dir}")


def _print_sweep(results: List[SweepPointResult]) -> None:
    table = Table(title="Max sigma^2 [M]")
    table.add_column("lambda_c")
    table.add_column("alpha")
    table.add_column("max sigma^2 [M]")
    for r in results:
        cell = (
            f"{r.sigma2_max:.4f} [{r.multiplicity}]" if r.status == "ok" else f"[red]failed[/red] [{r.multiplicity}]"
        )
        table.add_row(f"{r.lambda_c:g}", f"{r.alpha:g}", cell)
    console.print(table)


def _print_peaks(reports: List[PeakReport]) -> None:
    table = Table(title="Peaks")
    for column in ("spectrum", "position", "height", "FWHM"):
        table.add_column(column)
    for report in reports:
        for peak in report.peaks:
            fwhm = f"{peak.fwhm:.4f}" if peak.fwhm is not None else "-"
            table.add_row(report.label, f"{peak.position:.4f}", f"{peak.height:.4g}", fwhm)
        if not report.peaks:
            table.add_row(report.label, "-", "-", "-")
    console.print(table)


def cmd_run(args, manager: EmissionConfigManager) -> int:
    config = manager.get_run_config(_overrides(args))
    restart = load_state(Path(args.restart)) if args.restart else None
    if restart is not None and Method.MULTID1 not in config.methods:
        raise ConfigurationError("--restart requires the multid1 method", ["methods"])
    outcome = EmissionRunner(config, _output_dir(args, manager)).run(restart)
    _print_run(outcome)
    return outcome.exit_code


def cmd_sweep(args, manager: EmissionConfigManager) -> int:
    config = manager.get_run_config(_overrides(args))
    if args.sweep_file:
        spec = EmissionConfigManager.load_sweep_spec(args.sweep_file)
    else:
        if not args.alpha:
            raise ConfigurationError("--lambda-c needs --alpha", ["alpha"])
        spec = SweepSpec(lambda_c_values=args.lambda_c, alpha_values=args.alpha)
    results = sweep(spec, config, _output_dir(args, manager), _jobs(args))
    _print_sweep(results)
    return EXIT_OK if all(r.status == "ok" for r in results) else EXIT_NUMERICAL


def cmd_compare(args, manager: EmissionConfigManager) -> int:
    config = manager.get_run_config(_overrides(args))
    threshold = args.threshold if args.threshold is not None else config.spectrum.peak_threshold
    spectra = [read_spectrum(Path(p)) for p in args.spectra]
    labels = [Path(p).stem for p in args.spectra]
    reports = compare(spectra, threshold, labels)
    output = _output_dir(args, manager)
    write_peak_report(reports, output / "peaks.csv")
    _print_peaks(reports)
    return EXIT_OK


def cmd_table1(args, manager: EmissionConfigManager) -> int:
    config = manager.get_run_config(_overrides(args))
    results = table1(config, args.scale, _output_dir(args, manager), _jobs(args))
    _print_sweep(results)
    return EXIT_OK if all(r.status == "ok" for r in results) else EXIT_NUMERICAL


def cmd_figures(args, manager: EmissionConfigManager) -> int:
    config = manager.get_run_config(_overrides(args))
    outcomes = figures(config, args.scale, _output_dir(args, manager), args.panel)
    for outcome in outcomes.values():
        _print_run(outcome)
    return EXIT_OK if all(o.ok for o in outcomes.values()) else EXIT_NUMERICAL


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "table1": cmd_table1,
    "figures": cmd_figures,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Entry point; returns the process exit code"""
    if DOTENV_AVAILABLE:
        load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose, args.quiet)

    try:
        manager = EmissionConfigManager(args.config)
        return COMMANDS[args.command](args, manager)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}")
        if e.fields:
            logger.error(f"Offending fields: {', '.join(e.fields)}")
        return EXIT_VALIDATION
    except (ValidationError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_VALIDATION
    except EmissionError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
