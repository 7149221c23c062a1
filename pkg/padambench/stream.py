"""
Reading and writing error series and aggregates.

Series are CSV with the fixed header ``optimizer,seed,step,error,channel``,
LF line endings and floats rendered with 17 significant digits, so equal
runs give byte-identical files. A diverged run ends with a row whose error
field is the literal ``diverged``.
"""

import io
import json
from typing import Any, Iterable, Iterator, NamedTuple, TextIO

HEADER = ("optimizer", "seed", "step", "error", "channel")
DIVERGED = "diverged"


class SeriesRow(NamedTuple):
    """One logged error; ``error`` is None on the terminal diverged row."""

    optimizer: str
    seed: int
    step: int
    error: float | None
    channel: int

    @property
    def diverged(self) -> bool:
        return self.error is None


def format_float(value: float) -> str:
    """Render with 17 significant digits (round-trips any float64)."""
    return format(value, ".17g")


def _render_row(row: SeriesRow) -> str:
    error = DIVERGED if row.error is None else format_float(row.error)
    return f"{row.optimizer},{row.seed},{row.step},{error},{row.channel}\n"


def _parse_row(line: str, line_number: int) -> SeriesRow:
    fields = line.rstrip("\n").split(",")
    if len(fields) != len(HEADER):
        raise ValueError(f"Line {line_number}: expected {len(HEADER)} fields, got {len(fields)}")
    optimizer, seed, step, error, channel = fields
    return SeriesRow(
        optimizer=optimizer,
        seed=int(seed),
        step=int(step),
        error=None if error == DIVERGED else float(error),
        channel=int(channel),
    )


def write_series(rows: Iterable[SeriesRow], file: TextIO, header: bool = True) -> int:
    """
    Write rows as CSV to a text file object.

    Open files with ``newline=""`` (or ``"\\n"``) so line endings stay LF on
    every platform.

    Args:
        rows: Series rows in output order.
        file: A text file-like object to write to.
        header: Whether to write the header line first.

    Returns:
        Number of data rows written.
    """
    if header:
        file.write(",".join(HEADER) + "\n")
    count = 0
    for row in rows:
        file.write(_render_row(row))
        count += 1
    return count


def read_series(file: TextIO) -> Iterator[SeriesRow]:
    """
    Iterate over the rows of a series CSV written by write_series.

    Raises:
        ValueError: If the header or a row is malformed.
    """
    first = file.readline()
    if not first:
        return
    if first.rstrip("\n") != ",".join(HEADER):
        raise ValueError(f"Unexpected header: {first.rstrip()!r}")
    for line_number, line in enumerate(file, start=2):
        if line.strip():
            yield _parse_row(line, line_number)


def render_series(rows: Iterable[SeriesRow]) -> str:
    """CSV text of the rows, header included."""
    buffer = io.StringIO(newline="")
    write_series(rows, buffer)
    return buffer.getvalue()


def parse_series(text: str) -> list[SeriesRow]:
    """Rows of a CSV text produced by render_series."""
    return list(read_series(io.StringIO(text, newline="")))


def write_aggregate(obj: dict[str, Any], file: TextIO) -> int:
    """Write an aggregate record as indented JSON; returns characters written."""
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    file.write(text)
    return len(text)
