"""Line-oriented text format for grids.

Example (two unit squares)::

    # comment lines and blank lines are ignored
    dim 2
    vertices 6
    0 0
    1 0
    2 0
    0 1
    1 1
    2 1
    cells 2
    0 1 4 3
    1 2 5 4
    cell_centers
    0.5 0.5
    1.5 0.5

2D cells list their vertices counter-clockwise; 3D cells are hexahedra
(8 vertices, bottom face then top face) or tetrahedra (4 vertices). The
``cell_centers`` block is optional; vertex centroids are used without it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DegenerateGridError, InvalidArgumentError, MeshFormatError
from .geometry import Grid, grid_from_cells


def _numbers(text: str, lineno: int, kind, count: int | None = None) -> list:
    try:
        vals = [kind(t) for t in text.split()]
    except ValueError:
        raise MeshFormatError(f"expected {kind.__name__} values, got {text.strip()!r}", lineno) from None
    if count is not None and len(vals) != count:
        raise MeshFormatError(f"expected {count} values, got {len(vals)}", lineno)
    return vals


def _header(lines, pos: int, key: str) -> tuple[int, int]:
    """Parse ``key N`` at ``lines[pos]``; returns (N, next position)."""
    if pos >= len(lines):
        raise MeshFormatError(f"unexpected end of file, expected '{key}'", lines[-1][0] if lines else 1)
    lineno, text = lines[pos]
    parts = text.split()
    if len(parts) != 2 or parts[0] != key:
        raise MeshFormatError(f"expected '{key} <count>', got {text.strip()!r}", lineno)
    try:
        n = int(parts[1])
    except ValueError:
        raise MeshFormatError(f"'{key}' count must be an integer", lineno) from None
    if n < 0:
        raise MeshFormatError(f"'{key}' count must be nonnegative", lineno)
    return n, pos + 1


def _block(lines, pos: int, n: int, what: str) -> list:
    if pos + n > len(lines):
        last = lines[-1][0] if lines else 1
        raise MeshFormatError(f"unexpected end of file in {what} block", last)
    return lines[pos : pos + n]


def parse_mesh(text: str) -> Grid:
    """Build a grid from the text format.

    Raises:
        MeshFormatError: The text is malformed, or the cells do not form a
            valid grid; the message starts with the offending line number.
    """
    lines = []
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if s:
            lines.append((i, s))
    dim, pos = _header(lines, 0, "dim")
    if dim not in (2, 3):
        raise MeshFormatError("dim must be 2 or 3", lines[0][0])
    nv, pos = _header(lines, pos, "vertices")
    nodes = np.array([_numbers(t, ln, float, dim) for ln, t in _block(lines, pos, nv, "vertices")]).reshape(nv, dim)
    if not np.all(np.isfinite(nodes)):
        raise MeshFormatError("vertex coordinates must be finite", lines[pos][0])
    pos += nv
    nc, pos = _header(lines, pos, "cells")
    cell_start = pos
    cells = []
    for ln, t in _block(lines, pos, nc, "cells"):
        c = _numbers(t, ln, int)
        if len(c) < 3:
            raise MeshFormatError("a cell needs at least 3 vertices", ln)
        if min(c) < 0 or max(c) >= nv:
            raise MeshFormatError(f"vertex index out of range 0..{nv - 1}", ln)
        cells.append(c)
    pos += nc
    centers = None
    if pos < len(lines):
        ln, t = lines[pos]
        if t.split() != ["cell_centers"]:
            raise MeshFormatError(f"unexpected content {t!r}", ln)
        block = _block(lines, pos + 1, nc, "cell_centers")
        centers = np.array([_numbers(tt, ll, float, dim) for ll, tt in block]).reshape(nc, dim)
        pos += 1 + nc
        if pos < len(lines):
            raise MeshFormatError("trailing content after cell_centers", lines[pos][0])
    try:
        return grid_from_cells(nodes, cells, centers)
    except (InvalidArgumentError, DegenerateGridError) as exc:
        line = lines[cell_start][0] if nc else None
        raise MeshFormatError(f"invalid cells: {exc}", line) from exc


def read_mesh(path) -> Grid:
    """Read a grid file.

    Raises:
        OSError: The file cannot be read.
        MeshFormatError: The content is malformed.
    """
    return parse_mesh(Path(path).read_text())


def format_mesh(grid: Grid) -> str:
    """Serialize a grid, including its cell centers."""
    out = [f"dim {grid.dim}", f"vertices {grid.nodes.shape[0]}"]
    out += [" ".join(repr(float(x)) for x in p) for p in grid.nodes]
    out.append(f"cells {grid.num_cells}")
    out += [" ".join(str(int(v)) for v in c) for c in grid.cells]
    out.append("cell_centers")
    out += [" ".join(repr(float(x)) for x in p) for p in grid.cell_centers]
    return "\n".join(out) + "\n"


def write_mesh(grid: Grid, path) -> None:
    Path(path).write_text(format_mesh(grid))
