"""Location-keyed store of Rayleigh means for the Tx2->Rx1 link.

The store maps ``(node_id, cell_id)`` to E|a21|^2. It lives in a plain CSV
file with the header ``node_id,cell_id,mean_gain2,updated_at``.
"""

import csv
import logging
import threading
from dataclasses import dataclass
from typing import Dict, Iterator, Tuple

import numpy as np

from .core import UcrError
from .partial import RayleighCqi

LOG = logging.getLogger(__name__)

HEADER = ("node_id", "cell_id", "mean_gain2", "updated_at")
FORBIDDEN_CHARS = (",", "\n", "\r", '"')


class CqiParseError(UcrError):
    def __init__(self, message="Malformed CQI database line", status=1, data=None):
        super().__init__(message, status, data)


class CqiValidationError(UcrError, ValueError):
    def __init__(self, message="Invalid CQI database record", status=1, data=None):
        super().__init__(message, status, data)


class CqiNotFound(UcrError, LookupError):
    def __init__(self, message="No CQI statistics for this location", status=1, data=None):
        super().__init__(message, status, data)


@dataclass(frozen=True)
class CqiRecord:
    node_id: str
    cell_id: str
    mean_gain2: float
    updated_at: float = 0.0

    def __post_init__(self):
        for name in ("node_id", "cell_id"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise CqiValidationError(
                    message=f"{name} must be a non-empty string", data={"field": name}
                )
            if any(ch in value for ch in FORBIDDEN_CHARS):
                raise CqiValidationError(
                    message=f"{name} {value!r} contains a delimiter character",
                    data={"field": name},
                )
        if not (np.isfinite(self.mean_gain2) and self.mean_gain2 > 0):
            raise CqiValidationError(
                message=f"mean_gain2 must be positive, got {self.mean_gain2!r}",
                data={"field": "mean_gain2", "key": self.key},
            )
        if not (np.isfinite(self.updated_at) and self.updated_at >= 0):
            raise CqiValidationError(
                message=f"updated_at must be a non-negative timestamp, got {self.updated_at!r}",
                data={"field": "updated_at", "key": self.key},
            )

    @property
    def key(self) -> Tuple[str, str]:
        return (self.node_id, self.cell_id)

    def to_fields(self) -> Tuple[str, str, str, str]:
        # 17 significant digits read back to the same double
        return (
            self.node_id,
            self.cell_id,
            f"{self.mean_gain2:.16e}",
            repr(float(self.updated_at)),
        )


def _parse_float(text, name, line_no):
    try:
        return float(text)
    except ValueError:
        raise CqiParseError(
            message=f"line {line_no}: {name} is not a number: {text!r}",
            data={"line": line_no, "field": name},
        ) from None


def read_records(path) -> Iterator[Tuple[int, CqiRecord]]:
    """Yield ``(line number, record)`` pairs from a CQI CSV file."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        for row in reader:
            line_no = reader.line_num
            if line_no == 1:
                if tuple(row) != HEADER:
                    raise CqiParseError(
                        message=f"line 1: expected header {','.join(HEADER)!r}",
                        data={"line": 1},
                    )
                continue
            if not row:
                continue
            if len(row) != len(HEADER):
                raise CqiParseError(
                    message=f"line {line_no}: expected {len(HEADER)} fields, got {len(row)}",
                    data={"line": line_no},
                )
            node_id, cell_id, mean_text, stamp_text = row
            mean = _parse_float(mean_text, "mean_gain2", line_no)
            stamp = _parse_float(stamp_text, "updated_at", line_no)
            try:
                record = CqiRecord(node_id, cell_id, mean, stamp)
            except CqiValidationError as exc:
                raise CqiValidationError(
                    message=f"line {line_no}: {exc.message}",
                    data={**(exc.data or {}), "line": line_no},
                ) from None
            yield line_no, record


class CqiDatabase:
    """In-memory table of :class:`CqiRecord`, loaded from and saved to CSV.

    Lookups may run concurrently once loading is done; loads and exports
    assume a single writer.
    """

    def __init__(self):
        self._records: Dict[Tuple[str, str], CqiRecord] = {}
        self._lock = threading.RLock()
        self.duplicate_count = 0

    def __len__(self):
        return len(self._records)

    def __iter__(self) -> Iterator[CqiRecord]:
        return iter([self._records[key] for key in sorted(self._records)])

    def __contains__(self, key):
        return tuple(key) in self._records

    def put(self, record: CqiRecord):
        with self._lock:
            self._records[record.key] = record

    def load(self, path) -> int:
        """Import a CSV file; returns the number of distinct keys it held.

        Later lines win over earlier ones with the same key. Nothing is
        merged if any line fails to parse.
        """
        loaded: Dict[Tuple[str, str], CqiRecord] = {}
        duplicates = 0
        for line_no, record in read_records(path):
            if record.key in loaded:
                duplicates += 1
                LOG.warning(
                    "%s line %d: duplicate key %s/%s, keeping the later record",
                    path,
                    line_no,
                    *record.key,
                )
            loaded[record.key] = record
        with self._lock:
            self._records.update(loaded)
            self.duplicate_count += duplicates
        LOG.info("loaded %d CQI records from %s", len(loaded), path)
        return len(loaded)

    def lookup(self, node_id: str, cell_id: str) -> RayleighCqi:
        record = self._records.get((node_id, cell_id))
        if record is None:
            raise CqiNotFound(
                message=f"no CQI statistics for node {node_id!r} in cell {cell_id!r}",
                data={"node_id": node_id, "cell_id": cell_id},
            )
        return RayleighCqi(record.mean_gain2)

    def export(self, path) -> int:
        with self._lock:
            records = list(self)
            with open(path, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle, lineterminator="\n")
                writer.writerow(HEADER)
                writer.writerows(record.to_fields() for record in records)
        LOG.info("exported %d CQI records to %s", len(records), path)
        return len(records)

    @classmethod
    def from_file(cls, path) -> "CqiDatabase":
        db = cls()
        db.load(path)
        return db
