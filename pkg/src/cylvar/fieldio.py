"""CSV field dumps and atomic file writes."""
import io
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .grids import Grid2, Grid3, ScalarField, VectorField3

FLOAT_FMT = "%.17g"

_SCALAR_HEADER = re.compile(
    r"^# scalar nr=(?P<nr>\d+) nz=(?P<nz>\d+) rmax=(?P<rmax>\S+) zmax=(?P<zmax>\S+)$"
)
_VECTOR_HEADER = re.compile(r"^# vector n=(?P<n>\d+) L=(?P<L>\S+)$")


class DumpFormatError(ValueError):
    pass


def fmt(x):
    return FLOAT_FMT % x


def atomic_write_text(path, text):
    """Write ``text`` to a sibling temp file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _rows(columns):
    buf = io.StringIO()
    np.savetxt(buf, np.column_stack(columns), fmt=FLOAT_FMT, delimiter=",")
    return buf.getvalue()


def scalar_dump_text(u):
    g = u.grid
    R, Z = g.mesh()
    header = f"# scalar nr={g.nr} nz={g.nz} rmax={fmt(g.r_max)} zmax={fmt(g.z_max)}\n"
    return header + _rows([R.ravel(), Z.ravel(), u.values.ravel()])


def vector_dump_text(U):
    g = U.grid
    X1, X2, X3 = g.mesh()
    header = f"# vector n={g.n} L={fmt(g.half_width)}\n"
    v = U.values.reshape(-1, 3)
    return header + _rows([X1.ravel(), X2.ravel(), X3.ravel(), v[:, 0], v[:, 1], v[:, 2]])


def write_scalar(u, path):
    atomic_write_text(path, scalar_dump_text(u))


def write_vector(U, path):
    atomic_write_text(path, vector_dump_text(U))


def _read_body(lines, ncols, nrows, path):
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != nrows:
        raise DumpFormatError(f"{path}: expected {nrows} data rows, found {len(body)}")
    try:
        data = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise DumpFormatError(f"{path}: unparsable data row ({exc})") from exc
    if data.shape != (nrows, ncols):
        raise DumpFormatError(f"{path}: expected {ncols} columns per row")
    return data


def read_scalar(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DumpFormatError(f"{path}: empty file")
    m = _SCALAR_HEADER.match(lines[0].strip())
    if m is None:
        raise DumpFormatError(f"{path}: line 1: malformed scalar header {lines[0]!r}")
    try:
        grid = Grid2(int(m["nr"]), int(m["nz"]), float(m["rmax"]), float(m["zmax"]))
    except ValueError as exc:
        raise DumpFormatError(f"{path}: line 1: {exc}") from exc
    data = _read_body(lines, 3, grid.nr * grid.nz, path)
    return ScalarField(grid, data[:, 2].reshape(grid.nr, grid.nz))


def read_vector(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DumpFormatError(f"{path}: empty file")
    m = _VECTOR_HEADER.match(lines[0].strip())
    if m is None:
        raise DumpFormatError(f"{path}: line 1: malformed vector header {lines[0]!r}")
    grid = Grid3(int(m["n"]), float(m["L"]))
    data = _read_body(lines, 6, grid.n ** 3, path)
    return VectorField3(grid, data[:, 3:].reshape(grid.n, grid.n, grid.n, 3))
