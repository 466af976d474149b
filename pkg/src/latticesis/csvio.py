"""Plot-ready CSV with ``#`` comment headers."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from . import __version__

THRESHOLD_CURVE_COLUMNS = ("p", "d", "q0")
SOLVER_COLUMNS = ("p", "q", "d", "f_mf", "regime", "residual", "q0")
ANALYSIS_COLUMNS = ("p", "q", "d", "L", "seed", "tau", "burn_in", "f_inf", "std_err",
                    "n_eff", "extinct")
TRAJECTORY_COLUMNS = ("tick", "infected_fraction")
QSTAR_COLUMNS = ("p", "d", "L", "seed", "q_star", "bracket_low", "bracket_high",
                 "resolution", "q0_mf", "probes")


def format_value(value) -> str:
    """Deterministic text for a CSV cell; floats use the shortest round-trip repr."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


class CsvWriter:
    """Writes a comment header, one column line, then rows as they arrive."""

    def __init__(self, stream, columns, header_lines=()):
        self.stream = stream
        self.columns = tuple(columns)
        for line in header_lines:
            stream.write(f"# {line}\n")
        self._writer = csv.writer(stream, lineterminator="\n")
        self._writer.writerow(self.columns)

    def write(self, row):
        if isinstance(row, dict):
            cells = [row.get(c) for c in self.columns]
        else:
            cells = list(row)
        self._writer.writerow([format_value(c) for c in cells])
        self.stream.flush()


def header_lines(command: str, master_seed, settings: dict) -> list[str]:
    lines = [f"latticesis {__version__}", f"command: {command}"]
    if master_seed is not None:
        lines.append(f"master_seed: {master_seed}")
    for key, value in settings.items():
        lines.append(f"{key}: {value}")
    return lines


def read_csv(source) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Parse a file written by :class:`CsvWriter`.

    Returns ``(header, columns, rows)``; ``header`` maps ``key: value``
    comment lines.
    """
    if isinstance(source, str):
        text = source
    else:
        text = source.read()
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].strip().partition(": ")
            if sep:
                header[key] = value
        elif line.strip():
            body.append(line)
    reader = csv.reader(io.StringIO("\n".join(body)))
    rows = list(reader)
    if not rows:
        return header, [], []
    return header, rows[0], rows[1:]
