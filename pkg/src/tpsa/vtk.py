"""Legacy ASCII VTK (version 3.0) export of cell fields."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .assembly import DiscreteSolution
from .geometry import Grid

# VTK cell type ids
VTK_TRIANGLE = 5
VTK_POLYGON = 7
VTK_QUAD = 9
VTK_TETRA = 10
VTK_HEXAHEDRON = 12


def _cell_type(dim: int, nverts: int) -> int:
    if dim == 2:
        return {3: VTK_TRIANGLE, 4: VTK_QUAD}.get(nverts, VTK_POLYGON)
    return VTK_TETRA if nverts == 4 else VTK_HEXAHEDRON


def _fmt(x: float) -> str:
    return repr(float(x))


def format_vtk(grid: Grid, fields: dict, title: str = "tpsa solution") -> str:
    """Unstructured grid with cell data.

    Parameters:
        grid: The grid; 2D points get a zero z coordinate.
        fields: Name -> array of shape ``(num_cells,)`` (scalar) or
            ``(num_cells, k)``; vectors with 2 or 3 components are written as
            VECTORS (2D padded with zero), other widths as SCALARS with
            ``k`` components.
        title: Header line (newlines are replaced).
    """
    nodes = grid.nodes
    pts = np.zeros((nodes.shape[0], 3))
    pts[:, : grid.dim] = nodes
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {pts.shape[0]} double")
    lines += [" ".join(_fmt(x) for x in p) for p in pts]
    size = sum(len(c) + 1 for c in grid.cells)
    lines.append(f"CELLS {grid.num_cells} {size}")
    lines += [" ".join(str(int(v)) for v in (len(c), *c)) for c in grid.cells]
    lines.append(f"CELL_TYPES {grid.num_cells}")
    lines += [str(_cell_type(grid.dim, len(c))) for c in grid.cells]
    if fields:
        lines.append(f"CELL_DATA {grid.num_cells}")
    for name, values in fields.items():
        v = np.asarray(values, dtype=float).reshape(grid.num_cells, -1)
        k = v.shape[1]
        if k in (2, 3) and k == grid.dim:
            vec = np.zeros((grid.num_cells, 3))
            vec[:, :k] = v
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(x) for x in row) for row in vec]
        else:
            lines.append(f"SCALARS {name} double {k}")
            lines.append("LOOKUP_TABLE default")
            lines += [" ".join(_fmt(x) for x in row) for row in v]
    return "\n".join(lines) + "\n"


def write_vtk(path, grid: Grid, solution: DiscreteSolution, title: str = "tpsa solution") -> None:
    """Write u, r, p and w of a solution as cell data."""
    fields = {"u": solution.u, "r": solution.r, "p": solution.p, "w": solution.w}
    Path(path).write_text(format_vtk(grid, fields, title))
