"""CSV output with '#' metadata headers and atomic writes."""

import math
import os
import tempfile

import numpy as np

from . import __version__
from .spectral import Frame, SpectralField


def fmt(x):
    """Deterministic text for a scalar: ints verbatim, floats as shortest round-trip repr."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if x == 0:
            return "0.0"
        return repr(x)
    return str(x)


def metadata_lines(command, config):
    lines = [f"# nf4nls {__version__}", f"# command={command}"]
    lines += [f"# {k}={fmt(v)}" for k, v in config.items()]
    return lines


def atomic_write(path, text):
    """Write through a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(columns, rows, header=()):
    lines = list(header)
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, command="", config=None, extra_header=()):
    header = metadata_lines(command, config or {}) + list(extra_header)
    atomic_write(path, render_csv(columns, rows, header))


def field_header(f):
    return f"# frame={f.frame.value} N={f.N} t={fmt(f.time)}"


def field_rows(f):
    return [(int(n), c.real, c.imag) for n, c in zip(f.n, f.coeffs)]


def write_field_csv(path, f, command="", config=None):
    write_csv(path, ["n", "re", "im"], field_rows(f), command, config, extra_header=[field_header(f)])


def read_csv(path):
    """(metadata lines, column names, rows as lists of strings); '#' lines after the column header are kept inline."""
    meta, columns, rows = [], None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if columns is None:
                if line.startswith("#"):
                    meta.append(line)
                else:
                    columns = line.split(",")
            else:
                rows.append(line if line.startswith("#") else line.split(","))
    return meta, columns, rows


def read_field_csv(path):
    meta, columns, rows = read_csv(path)
    tag = next(m for m in meta if m.startswith("# frame="))
    parts = dict(p.split("=", 1) for p in tag[2:].split())
    N = int(parts["N"])
    coeffs = np.zeros(2 * N + 1, dtype=complex)
    for n, re, im in rows:
        coeffs[int(n) + N] = complex(float(re), float(im))
    return SpectralField(Frame(parts["frame"]), N, coeffs, float(parts["t"]))
