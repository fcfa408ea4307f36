"""Run reports: trajectory CSV files and JSON summaries.

CSV output uses RFC-4180 quoting with CRLF line ends and writes reals with
17 significant digits; NaN cells are left empty.  JSON reports carry a hash
of the canonical spec so identical inputs give identical files apart from
the timestamp.
"""

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources

from . import __version__
from .numerics import NumericalError

TOOL = "sta-forge"
SCHEMA_FILE = "run_report.schema.json"


def format_real(value):
    """17 significant digits; NaN (an undefined grid cell) becomes an empty field."""
    value = float(value)
    if math.isnan(value):
        return ""
    return format(value, ".17g")


def write_csv(path, header, rows):
    """Write ``rows`` (sequences of reals) under ``header``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row of length {len(row)} under {len(header)} columns")
            writer.writerow([format_real(v) for v in row])


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def spec_hash(command, spec):
    """SHA-256 of the command name and resolved spec in canonical JSON."""
    payload = canonical_json({"command": command, "spec": spec})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class RunReport:
    command: str
    method: str
    spec: dict
    scalars: dict
    trajectory_file: str
    timestamp: str
    version: str = __version__
    notes: tuple = field(default=())

    def __post_init__(self):
        for name, value in self.scalars.items():
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"scalar {name!r} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise NumericalError(f"scalar result {name!r} is not finite ({value!r})")

    @property
    def spec_hash(self):
        return spec_hash(self.command, self.spec)

    def to_dict(self):
        return {
            "tool": TOOL,
            "command": self.command,
            "method": self.method,
            "spec": self.spec,
            "scalars": {k: float(v) for k, v in self.scalars.items()},
            "trajectory_file": self.trajectory_file,
            "notes": list(self.notes),
            "provenance": {"version": self.version, "spec_sha256": self.spec_hash},
            "timestamp": self.timestamp,
        }


def utc_timestamp():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_report(path, report):
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def load_schema():
    """The JSON schema every report validates against."""
    text = resources.files("sta_forge").joinpath("schema", SCHEMA_FILE).read_text("utf-8")
    return json.loads(text)
