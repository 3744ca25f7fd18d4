"""Scenario files, command-line overrides and environment defaults."""

import logging
from dataclasses import dataclass, field
from os import environ
from typing import Dict, Iterable, Optional

from .core import ScenarioConfig, UcrError, db_to_linear
from .cqidb import CqiDatabase, CqiNotFound
from .modes import MODES
from .partial import RayleighCqi

LOG = logging.getLogger(__name__)

DEFAULTS = {
    "UCR_TRIALS": 1_000_000,
    "UCR_SEED": 0,
    "UCR_WORKERS": 1,
    "UCR_LOG_LEVEL": "WARNING",
}

FLOAT_KEYS = (
    "gain2_11",
    "gain2_12",
    "gain2_22",
    "gain2_21",
    "p1",
    "p2_local_max",
    "n0",
    "rho",
    "outage_threshold_primary",
    "outage_threshold_secondary",
    "epsilon",
    "mean_gain2",
    "scaling",
)
OPTIONAL_KEYS = ("gain2_21", "mean_gain2", "scaling")
BOOL_KEYS = ("high_snr",)
DB_KEYS = ("p1_db", "p2_db")
TEXT_KEYS = ("mode", "db_path", "node_id", "cell_id")
SCENARIO_KEYS = FLOAT_KEYS + BOOL_KEYS + DB_KEYS + TEXT_KEYS
REQUIRED_KEYS = ("gain2_11", "gain2_12", "gain2_22")

# a dB key and its linear twin may not both be given
POWER_TWINS = {"p1_db": "p1", "p2_db": "p2_local_max"}


class ScenarioError(UcrError):
    def __init__(self, message="Invalid scenario", status=1, data=None):
        super().__init__(message, status, data)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(name: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ScenarioError(
            message=f"{name} must be an integer, got {text!r}", data={"key": name}
        ) from None


def load_env(config: Dict[str, object]) -> Dict[str, object]:
    """
    Read UCR_* env vars into config only if they're not already set,
    then fill what is still missing from DEFAULTS.
    """
    # Scenario and database paths
    if "UCR_SCENARIO" in environ and "UCR_SCENARIO" not in config:
        config["UCR_SCENARIO"] = environ["UCR_SCENARIO"]

    if "UCR_MODE" in environ and "UCR_MODE" not in config:
        config["UCR_MODE"] = environ["UCR_MODE"]

    if "UCR_DB_PATH" in environ and "UCR_DB_PATH" not in config:
        config["UCR_DB_PATH"] = environ["UCR_DB_PATH"]

    # Monte Carlo plan
    for name in ("UCR_TRIALS", "UCR_SEED", "UCR_WORKERS"):
        if name in environ and name not in config:
            config[name] = _parse_int(name, environ[name])

    if "UCR_LOG_LEVEL" in environ and "UCR_LOG_LEVEL" not in config:
        config["UCR_LOG_LEVEL"] = environ["UCR_LOG_LEVEL"].upper()

    for name, value in DEFAULTS.items():
        config.setdefault(name, value)
    return config


@dataclass(frozen=True)
class Scenario:
    config: ScenarioConfig
    mode: Optional[str] = None
    db_path: Optional[str] = None
    node_id: Optional[str] = None
    cell_id: Optional[str] = None
    # accepted keys exactly as given, for --print-config
    given: Dict[str, str] = field(default_factory=dict)

    def resolve_rayleigh(self, db: Optional[CqiDatabase] = None) -> Optional[RayleighCqi]:
        """Rayleigh law of |a21|^2: explicit mean first, database second.

        Returns ``None`` under full CQI; raises :class:`CqiNotFound` when the
        location has no statistics.
        """
        if self.config.full_cqi:
            return None
        if self.config.mean_gain2 is not None:
            return RayleighCqi(self.config.mean_gain2)
        if self.node_id is None or self.cell_id is None:
            raise CqiNotFound(
                message="partial-CQI scenario needs mean_gain2 or node_id and cell_id",
                data={"node_id": self.node_id, "cell_id": self.cell_id},
            )
        if db is None:
            if self.db_path is None:
                raise CqiNotFound(
                    message="partial-CQI scenario has no mean_gain2 and no CQI database",
                    data={"node_id": self.node_id, "cell_id": self.cell_id},
                )
            db = CqiDatabase.from_file(self.db_path)
        return db.lookup(self.node_id, self.cell_id)


def split_assignment(text: str, where: str):
    if "=" not in text:
        raise ScenarioError(
            message=f"{where}: expected 'key = value', got {text.strip()!r}",
            data={"where": where},
        )
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def _check_key(key: str, where: str):
    if key not in SCENARIO_KEYS:
        raise ScenarioError(
            message=f"{where}: unknown scenario key {key!r}", data={"key": key, "where": where}
        )


def _convert(key: str, text: str):
    if key in TEXT_KEYS:
        return text
    if key in OPTIONAL_KEYS and text.lower() == "none":
        return None
    try:
        if key in BOOL_KEYS:
            return _parse_bool(text)
        return float(text)
    except ValueError:
        raise ScenarioError(
            message=f"{key}: cannot parse {text!r}", data={"key": key}
        ) from None


def read_assignments(text: str, source: str = "<scenario>") -> Dict[str, str]:
    """``key = value`` lines with ``#`` comments; duplicate or unknown keys are fatal."""
    values: Dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{line_no}"
        key, value = split_assignment(line, where)
        _check_key(key, where)
        if key in values:
            raise ScenarioError(
                message=f"{where}: duplicate key {key!r}", data={"key": key, "line": line_no}
            )
        values[key] = value
    for db_key, linear_key in POWER_TWINS.items():
        if db_key in values and linear_key in values:
            raise ScenarioError(
                message=f"{source}: give either {db_key} or {linear_key}, not both",
                data={"key": db_key},
            )
    return values


def apply_overrides(values: Dict[str, str], overrides: Iterable[str]) -> Dict[str, str]:
    merged = dict(values)
    for item in overrides:
        key, value = split_assignment(item, "--set")
        _check_key(key, "--set")
        for db_key, linear_key in POWER_TWINS.items():
            if key == db_key:
                merged.pop(linear_key, None)
            elif key == linear_key:
                merged.pop(db_key, None)
        merged[key] = value
    return merged


def build_scenario(values: Dict[str, str]) -> Scenario:
    missing = [key for key in REQUIRED_KEYS if key not in values]
    if "p1" not in values and "p1_db" not in values:
        missing.append("p1")
    if "p2_local_max" not in values and "p2_db" not in values:
        missing.append("p2_local_max")
    if missing:
        raise ScenarioError(
            message=f"missing scenario keys: {', '.join(missing)}", data={"key": missing[0]}
        )

    parsed = {key: _convert(key, text) for key, text in values.items()}
    mode = parsed.pop("mode", None)
    if mode is not None and mode not in MODES:
        raise ScenarioError(
            message=f"mode must be one of {', '.join(MODES)}, got {mode!r}",
            data={"key": "mode"},
        )
    extras = {key: parsed.pop(key, None) for key in ("db_path", "node_id", "cell_id")}
    n0 = parsed.get("n0", 1.0)
    for db_key, linear_key in POWER_TWINS.items():
        if db_key in parsed:
            parsed[linear_key] = db_to_linear(parsed.pop(db_key)) * n0

    try:
        config = ScenarioConfig(**parsed)
    except UcrError as exc:
        key = (exc.data or {}).get("field")
        raise ScenarioError(
            message=f"{key}: {exc.message}" if key else exc.message, data={"key": key}
        ) from exc
    LOG.debug("scenario: %s", config)
    return Scenario(config=config, mode=mode, given=dict(values), **extras)


def parse_scenario(text: str, overrides: Iterable[str] = (), source="<scenario>") -> Scenario:
    return build_scenario(apply_overrides(read_assignments(text, source), overrides))


def load_scenario(path, overrides: Iterable[str] = ()) -> Scenario:
    try:
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ScenarioError(
            message=f"cannot read scenario {path}: {exc.strerror}", data={"path": str(path)}
        ) from exc
    return parse_scenario(text, overrides, source=str(path))


def format_scenario(scenario: Scenario) -> str:
    """Every accepted key with its effective value, one ``key = value`` per line.

    A power given in dB is echoed as a comment after the linear values, so the
    output parses back to the same scenario.
    """
    lines = []
    for name in ScenarioConfig.field_names():
        value = getattr(scenario.config, name)
        if value is None:
            text = "none"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        else:
            text = repr(float(value))
        lines.append(f"{name} = {text}")
    for key in DB_KEYS:
        if key in scenario.given:
            lines.append(f"# {key} = {scenario.given[key]}")
    for key in TEXT_KEYS:
        value = getattr(scenario, key)
        if value is not None:
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
