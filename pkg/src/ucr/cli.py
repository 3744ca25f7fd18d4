"""``ucr`` command line: decide, sweep, validate and db."""

import argparse
import logging
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from .config import ScenarioError, format_scenario, load_env, load_scenario
from .core import UcrArgumentError, UcrError, capacity, db_to_linear
from .cqidb import CqiDatabase, CqiNotFound
from .modes import FULL_CQI_DECIDERS, MODES, ROW_COLUMNS, describe, no_access
from .montecarlo import (
    REPORT_COLUMNS,
    SUITE_ALIASES,
    SUITE_ALL,
    SUITES,
    TrialPlan,
    resolve_suite,
    run_suite,
)
from .partial import CASE_NO_ACCESS, PARTIAL_CQI_DECIDERS, PartialDecision, RayleighCqi

LOG = logging.getLogger(__name__)

EXIT_ACCESS = 0
EXIT_ERROR = 1
EXIT_NO_ACCESS = 2

FLOAT_FORMAT = "%.12e"

SWEEP_VARIABLES = (
    "rho",
    "gain2_21_over_gain2_22",
    "mean_over_gain2_22",
    "p2_db",
    "delta_c1_target",
)
SCALES = ("linear", "log")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    points: int = 50
    scale: str = "linear"

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise UcrArgumentError(
                message=f"sweep variable must be one of {', '.join(SWEEP_VARIABLES)}, "
                f"got {self.variable!r}"
            )
        if self.scale not in SCALES:
            raise UcrArgumentError(message=f"scale must be linear or log, got {self.scale!r}")
        if self.points < 2:
            raise UcrArgumentError(message=f"a sweep needs at least 2 points, got {self.points}")
        if not self.start < self.stop:
            raise UcrArgumentError(
                message=f"sweep start must be below stop, got {self.start} >= {self.stop}"
            )
        if self.scale == "log" and self.start <= 0:
            raise UcrArgumentError(message="log sweeps need a positive start")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


class _Parser(argparse.ArgumentParser):
    # usage errors share the generic error exit code, 2 means "no access"
    def error(self, message):
        raise UcrArgumentError(message=f"{self.prog}: {message}")


def _scenario_options(parser):
    parser.add_argument("--scenario", help="scenario file (default: $UCR_SCENARIO)")
    parser.add_argument("--mode", help=f"decoding mode: {', '.join(MODES)}")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a scenario key (repeatable)",
    )
    parser.add_argument("--out", help="write CSV here instead of standard output")
    parser.add_argument(
        "--print-config", action="store_true", help="echo the effective scenario and exit"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ucr", description="Underlay cognitive radio link planner")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="more logging (repeatable)"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    decide = commands.add_parser("decide", help="one access decision")
    _scenario_options(decide)

    sweep = commands.add_parser("sweep", help="decisions over a parameter range")
    _scenario_options(sweep)
    sweep.add_argument("--variable", required=True, help=", ".join(SWEEP_VARIABLES))
    sweep.add_argument("--start", type=float, required=True)
    sweep.add_argument("--stop", type=float, required=True)
    sweep.add_argument("--points", type=int, default=50)
    sweep.add_argument("--scale", default="linear", help="linear or log")

    validate = commands.add_parser("validate", help="Monte Carlo checks")
    _scenario_options(validate)
    validate.add_argument(
        "--suite",
        default=SUITE_ALL,
        help=f"{', '.join(SUITES)} or all (aliases: {', '.join(SUITE_ALIASES)})",
    )
    validate.add_argument("--trials", type=int)
    validate.add_argument("--seed", type=int)
    validate.add_argument("--workers", type=int)

    db = commands.add_parser("db", help="CQI statistics store")
    db.add_argument("--db", dest="store", help="store file (default: $UCR_DB_PATH)")
    db_commands = db.add_subparsers(dest="db_command", required=True)
    db_import = db_commands.add_parser("import", help="merge a CSV file into the store")
    db_import.add_argument("path")
    db_lookup = db_commands.add_parser("lookup", help="print the mean for a location")
    db_lookup.add_argument("node_id")
    db_lookup.add_argument("cell_id")
    db_export = db_commands.add_parser("export", help="write the store as sorted CSV")
    db_export.add_argument("path")
    return parser


def _settings(args) -> Dict[str, object]:
    settings: Dict[str, object] = {}
    for flag, key in (
        ("scenario", "UCR_SCENARIO"),
        ("mode", "UCR_MODE"),
        ("store", "UCR_DB_PATH"),
        ("trials", "UCR_TRIALS"),
        ("seed", "UCR_SEED"),
        ("workers", "UCR_WORKERS"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            settings[key] = value
    return load_env(settings)


def _setup_logging(verbose: int, level_name: str):
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, str(level_name).upper(), logging.WARNING)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger("ucr").setLevel(level)


def _write_csv(frame: pd.DataFrame, out: Optional[str]):
    options = dict(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    if out:
        frame.to_csv(out, **options)
    else:
        sys.stdout.write(frame.to_csv(**options))


def _load(args, settings):
    path = settings.get("UCR_SCENARIO")
    if not path:
        raise ScenarioError(message="no scenario given (--scenario or UCR_SCENARIO)")
    scenario = load_scenario(path, args.overrides)
    # a scenario's db_path wins over the environment default
    if scenario.db_path is None and settings.get("UCR_DB_PATH"):
        scenario = replace(scenario, db_path=settings["UCR_DB_PATH"])
    return scenario


def _mode(args, scenario, settings) -> str:
    mode = args.mode or scenario.mode or settings.get("UCR_MODE")
    if mode is None:
        raise ScenarioError(message="no mode given (--mode, scenario 'mode' or UCR_MODE)")
    if mode not in MODES:
        raise UcrArgumentError(
            message=f"mode must be one of {', '.join(MODES)}, got {mode!r}", data={"key": "mode"}
        )
    return mode


def decide(cfg, mode, rayleigh: Optional[RayleighCqi]):
    """Dispatch to the full- or partial-CQI decision for ``mode``."""
    if cfg.full_cqi:
        return FULL_CQI_DECIDERS[mode](cfg)
    if rayleigh is None:
        rayleigh = RayleighCqi(cfg.mean_gain2)
    return PARTIAL_CQI_DECIDERS[mode](cfg, rayleigh)


def _decide_or_refuse(scenario, mode):
    try:
        rayleigh = scenario.resolve_rayleigh()
    except CqiNotFound as exc:
        LOG.warning("%s; staying out of the primary band", exc.message)
        return PartialDecision(
            **no_access(scenario.config, mode, branch="no-cqi"), case_id=CASE_NO_ACCESS
        )
    return decide(scenario.config, mode, rayleigh)


def run_decide(args, settings) -> int:
    scenario = _load(args, settings)
    if args.print_config:
        sys.stdout.write(format_scenario(scenario))
        return EXIT_ACCESS
    mode = _mode(args, scenario, settings)
    decision = _decide_or_refuse(scenario, mode)
    LOG.info("decision: %s", describe(decision))
    _write_csv(pd.DataFrame([decision.as_row()], columns=list(ROW_COLUMNS)), args.out)
    return EXIT_ACCESS if decision.access else EXIT_NO_ACCESS


def sweep_point(cfg, variable: str, x: float):
    """Scenario at one sweep abscissa."""
    if variable == "rho":
        return cfg.replace(rho=x)
    if variable == "gain2_21_over_gain2_22":
        return cfg.replace(gain2_21=x * cfg.gain2_22)
    if variable == "mean_over_gain2_22":
        return cfg.replace(gain2_21=None, mean_gain2=x * cfg.gain2_22)
    if variable == "p2_db":
        return cfg.replace(p2_local_max=db_to_linear(x) * cfg.n0)
    # delta_c1_target: the penalty budget expressed in bit/s/Hz
    return cfg.replace(rho=x / capacity(cfg.g11))


def run_sweep(args, settings) -> int:
    spec = SweepSpec(args.variable, args.start, args.stop, args.points, args.scale)
    scenario = _load(args, settings)
    if args.print_config:
        sys.stdout.write(format_scenario(scenario))
        return EXIT_ACCESS
    mode = _mode(args, scenario, settings)
    rayleigh = None
    if spec.variable != "mean_over_gain2_22" and not scenario.config.full_cqi:
        rayleigh = scenario.resolve_rayleigh()
    rows: List[Dict[str, object]] = []
    for x in spec.values():
        cfg = sweep_point(scenario.config, spec.variable, float(x))
        decision = decide(cfg, mode, rayleigh)
        rows.append({"x": float(x), **decision.as_row()})
    LOG.info("sweep of %s over %d points", spec.variable, len(rows))
    _write_csv(pd.DataFrame(rows, columns=["x", *ROW_COLUMNS]), args.out)
    return EXIT_ACCESS


def run_validate(args, settings) -> int:
    scenario = _load(args, settings)
    if args.print_config:
        sys.stdout.write(format_scenario(scenario))
        return EXIT_ACCESS
    suite = resolve_suite(args.suite)
    plan = TrialPlan(
        trials=settings["UCR_TRIALS"], seed=settings["UCR_SEED"], workers=settings["UCR_WORKERS"]
    )
    rayleigh = scenario.resolve_rayleigh()
    if rayleigh is None:
        scenario.config.require_partial("validate")
    reports = run_suite(suite, scenario.config, rayleigh, plan)
    frame = pd.DataFrame([report.as_row() for report in reports], columns=list(REPORT_COLUMNS))
    _write_csv(frame, args.out)
    failed = [report.name for report in reports if not report.passed]
    if failed:
        LOG.warning("failed checks: %s", ", ".join(failed))
        return EXIT_ERROR
    return EXIT_ACCESS


def run_db(args, settings) -> int:
    store = settings.get("UCR_DB_PATH")
    if not store:
        raise UcrArgumentError(message="no CQI store given (--db or UCR_DB_PATH)")
    db = CqiDatabase()
    if args.db_command == "import":
        try:
            db.load(store)
        except FileNotFoundError:
            LOG.info("creating CQI store %s", store)
        count = db.load(args.path)
        db.export(store)
        LOG.info("imported %d records (%d duplicates)", count, db.duplicate_count)
        return EXIT_ACCESS
    db.load(store)
    if args.db_command == "lookup":
        rayleigh = db.lookup(args.node_id, args.cell_id)
        sys.stdout.write(f"{rayleigh.mean_gain2:.16e}\n")
        return EXIT_ACCESS
    db.export(args.path)
    return EXIT_ACCESS


COMMANDS = {
    "decide": run_decide,
    "sweep": run_sweep,
    "validate": run_validate,
    "db": run_db,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        settings = _settings(args)
        _setup_logging(args.verbose, settings["UCR_LOG_LEVEL"])
        return COMMANDS[args.command](args, settings)
    except UcrError as exc:
        LOG.debug("command failed", exc_info=True)
        sys.stderr.write(f"ucr: error: {exc.message}\n")
        return exc.status
    except OSError as exc:
        sys.stderr.write(f"ucr: error: {exc}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
