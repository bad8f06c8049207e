""" Utilities for use with click speedmeter commands """

import csv
import os
import shutil
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np
from click import secho
from kedro.framework.cli.utils import KedroCliError

from .model import ComplexResponse


class DataFileError(ValueError):
    """Raised for malformed input data; carries the 1-based line number."""

    def __init__(self, path: Path, line: int, message: str):
        super().__init__("{0}, line {1}: {2}".format(path, line, message))
        self.path = path
        self.line = line


def format_float(value: float) -> str:
    """
    Format a number with 9 significant digits in ``e`` notation.

    Args:
        value: Number to format.

    Returns:
        String such as ``8.50000000e-05``.
    """
    return "{0:.8e}".format(float(value))


def format_value(value) -> str:
    """Report representation of a scalar: booleans as ``true``/``false``,
    integers as is, other numbers via ``format_float``."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


@contextmanager
def atomic_write(path: Path, verbose: bool = False) -> Iterator[TextIO]:
    """
    Write a file through a temporary sibling that replaces ``path`` only
    once writing succeeded.

    Args:
        path: Destination path.
        verbose: Echo the name of the created file.

    Raises:
        KedroCliError: If the destination cannot be written.

    Yields:
        Text stream with LF line endings.
    """
    path = Path(path)
    try:
        handle, tmp_name = tempfile.mkstemp(
            dir=str(path.parent), prefix=".{0}.".format(path.name), suffix=".tmp"
        )
    except OSError as exc:
        raise KedroCliError("Cannot write `{0}`: {1}".format(path, exc)) from exc
    try:
        with os.fdopen(handle, "w", encoding="ascii", newline="\n") as stream:
            yield stream
        os.replace(tmp_name, str(path))
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    if verbose:
        secho("Creating `{0}`".format(str(path)))


def write_csv(
    path: Path,
    header: Sequence[str],
    columns: Sequence[Sequence],
    verbose: bool = False,
):
    """
    Write columns of numbers (or strings) as a CSV file with a header row.

    Args:
        path: Destination path.
        header: Column names.
        columns: Column values, all of equal length.
        verbose: Echo the name of the created file.
    """
    with atomic_write(path, verbose) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow(
                cell if isinstance(cell, str) else format_float(cell) for cell in row
            )


def write_report(path: Path, entries: Mapping[str, object], verbose: bool = False):
    """Write ``key: value`` lines, one per entry, in insertion order."""
    with atomic_write(path, verbose) as stream:
        for key, value in entries.items():
            stream.write("{0}: {1}\n".format(key, format_value(value)))


def ensure_out_dir(out_path: Path) -> Path:
    """
    Create the output directory if it does not exist.

    Args:
        out_path: Output directory.

    Raises:
        KedroCliError: If the directory cannot be created.

    Returns:
        The output directory.
    """
    out_path = Path(out_path)
    try:
        out_path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise KedroCliError(
            "Cannot create output directory `{0}`: {1}".format(out_path, exc)
        ) from exc
    return out_path


def _numeric_rows(
    path: Path,
) -> Tuple[Optional[List[str]], List[Tuple[int, List[float]]]]:
    """Read a CSV file into an optional header and numbered numeric rows."""
    header = None
    rows = []
    with Path(path).open("r", encoding="utf-8", newline="") as stream:
        for line_no, cells in enumerate(csv.reader(stream), start=1):
            cells = [cell.strip() for cell in cells]
            if not cells or not any(cells) or cells[0].startswith("#"):
                continue
            try:
                values = [float(cell) for cell in cells]
            except ValueError as exc:
                if header is None and not rows:
                    header = [cell.lower() for cell in cells]
                    continue
                raise DataFileError(
                    path, line_no, "not a number: {0}".format(exc)
                ) from exc
            if header is not None and len(values) != len(header):
                raise DataFileError(
                    path,
                    line_no,
                    "expected {0} columns, found {1}".format(len(header), len(values)),
                )
            rows.append((line_no, values))
    return header, rows


def read_transfer_function(path: Path) -> ComplexResponse:
    """
    Read a transfer function CSV with columns ``f_hz, re, im``.

    Extra columns (such as ``mag`` and ``phase_deg``) are ignored when a
    header names the columns.

    Args:
        path: CSV file.

    Raises:
        DataFileError: If a line does not parse, a column is missing or
            the frequencies are not strictly increasing.

    Returns:
        The response.
    """
    header, rows = _numeric_rows(path)
    if not rows:
        raise DataFileError(path, 1, "no data rows")
    if header is None:
        indices = (0, 1, 2)
    else:
        try:
            indices = tuple(header.index(name) for name in ("f_hz", "re", "im"))
        except ValueError as exc:
            raise DataFileError(
                path, 1, "header must name columns f_hz, re and im"
            ) from exc
    previous = None
    freqs, values = [], []
    for line_no, row in rows:
        if len(row) <= max(indices):
            raise DataFileError(path, line_no, "expected at least 3 columns")
        freq, real, imag = (row[i] for i in indices)
        if not all(np.isfinite((freq, real, imag))):
            raise DataFileError(path, line_no, "NaN or Inf value")
        if previous is not None and freq <= previous:
            raise DataFileError(
                path, line_no, "frequencies must be strictly increasing"
            )
        previous = freq
        freqs.append(freq)
        values.append(complex(real, imag))
    return ComplexResponse(np.array(freqs), np.array(values))


def read_time_series(
    path: Path, rate: Optional[float] = None
) -> Tuple[np.ndarray, float]:
    """
    Read a PCC length series.

    Two columns are read as ``t [s], length [m]`` and the sample rate is
    taken from the time column; a single column needs ``rate``.

    Args:
        path: CSV file.
        rate: Sample rate [Hz] of single-column input.

    Raises:
        DataFileError: If a line does not parse, the time column is not
            uniform or a single column comes without ``rate``.

    Returns:
        Length samples and sample rate.
    """
    _, rows = _numeric_rows(path)
    if not rows:
        raise DataFileError(path, 1, "no data rows")
    width = len(rows[0][1])
    for line_no, row in rows:
        if len(row) != width:
            raise DataFileError(
                path, line_no, "expected {0} columns, found {1}".format(width, len(row))
            )
    data = np.array([row for _, row in rows])
    if width == 1:
        if rate is None:
            raise DataFileError(path, rows[0][0], "single-column input needs --rate")
        return data[:, 0], float(rate)
    if width != 2:
        raise DataFileError(path, rows[0][0], "expected 1 or 2 columns")

    times = data[:, 0]
    if len(times) < 2:
        return data[:, 1], float(rate) if rate else 1.0
    # time stamps are rounded to 9 significant digits when written,
    # so the allowed deviation grows with |t|
    step = float(times[-1] - times[0]) / (len(times) - 1)
    deviation = np.abs(times - times[0] - np.arange(len(times)) * step)
    jitter = deviation > 1e-3 * abs(step) + 1e-8 * np.abs(times)
    if step <= 0 or np.any(jitter):
        bad = int(np.argmax(jitter)) if np.any(jitter) else 1
        raise DataFileError(path, rows[bad][0], "time column is not uniformly sampled")
    return data[:, 1], 1.0 / step


def copy_template_files(
    out_path: Path,
    template_path: Path,
    template_files: Sequence[str],
    verbose: bool = False,
):
    """
    If necessary copy files from a template directory into the output
    directory.

    Args:
        out_path: Destination path.
        template_path: Source path.
        template_files: Files to copy.
        verbose: Echo the names of any created files.

    """
    for file_ in template_files:
        dest = out_path / file_
        if not dest.exists():
            src = template_path / file_
            shutil.copyfile(str(src), str(dest))
            if verbose:
                secho("Creating `{0}`".format(str(dest)))
