"""Python access to the unified-memory simulator core."""

import csv
import io
import json
import os

from ._umsim import (
    ConfigError,
    OutOfMemory,
    cost_of_migration,
    resolve_access,
    setup_oversubscription,
    statevector_bytes,
)
from . import _umsim

__all__ = [
    "ConfigError",
    "OutOfMemory",
    "compare",
    "cost_of_migration",
    "resolve_access",
    "run_scenario",
    "setup_oversubscription",
    "statevector_bytes",
]


def run_scenario(source, base_dir="."):
    """Run a scenario given as a file path or as scenario text; returns the report dict."""
    if "\n" not in source and os.path.exists(source):
        text = _umsim.run_scenario_file(os.fspath(source))
    else:
        text = _umsim.run_scenario_text(source, os.fspath(base_dir))
    return json.loads(text)


def compare(reports):
    """Speedup rows of report dicts against the first one."""
    rows = _umsim.compare_reports([json.dumps(r) for r in reports])
    out = []
    for row in csv.DictReader(io.StringIO(rows)):
        out.append(
            {
                "metric": row["metric"],
                "report": int(row["report"]),
                "time_s": float(row["time_s"]),
                "speedup": float(row["speedup"]),
            }
        )
    return out
