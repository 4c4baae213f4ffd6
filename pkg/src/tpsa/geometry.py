"""Admissible grids, incidence and averaging maps, and geometric diagnostics.

A grid is a partition of the domain into star-shaped cells with designated
centers. Every face has exactly two neighbors ``(i, j)`` and a unit normal
pointing out of ``i``. Faces on the domain boundary get a *boundary cell*
``j`` that coincides with the face itself; boundary cells are numbered
``num_cells + b`` where ``b`` is the ordinal of the face among the boundary
faces (in face order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sps

from .errors import DegenerateGridError, InvalidArgumentError

# Local face loops of the two supported 3D cell types (VTK vertex ordering).
HEX_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))
TET_FACES = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))


def _readonly(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable cell/face description of an admissible grid.

    Attributes:
        dim: Spatial dimension, 2 or 3.
        nodes: Vertex coordinates, ``shape=(num_nodes, dim)``.
        cells: Vertex index list of each cell (CCW in 2D, VTK order in 3D).
        cell_centers: Designated cell centers x_i, ``shape=(num_cells, dim)``.
        cell_volumes: Cell measures |ω_i|.
        face_nodes: Vertex index list of each face.
        face_centers: Face centers x_k, ``shape=(num_faces, dim)``.
        face_areas: Face measures |ζ_k|.
        face_normals: Unit normals n_k, oriented out of ``face_cells[:, 0]``.
        face_cells: Neighbor pair ``(i, j)`` per face; for boundary faces ``j`` is
            the boundary cell index ``num_cells + ordinal``.
        shape: Logical Cartesian shape ``(nx, ny[, nz])`` when the grid came from
            a tensor-product construction, otherwise None.
        extent: Bounding box ``((lo, hi), ...)`` per axis.
    """

    dim: int
    nodes: np.ndarray
    cells: tuple
    cell_centers: np.ndarray
    cell_volumes: np.ndarray
    face_nodes: tuple
    face_centers: np.ndarray
    face_areas: np.ndarray
    face_normals: np.ndarray
    face_cells: np.ndarray
    shape: tuple | None = None
    extent: tuple | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_cells(self) -> int:
        return self.cell_volumes.size

    @property
    def num_faces(self) -> int:
        return self.face_areas.size

    @property
    def num_boundary(self) -> int:
        return int(np.count_nonzero(self.is_boundary))

    @property
    def is_boundary(self) -> np.ndarray:
        return self.face_cells[:, 1] >= self.num_cells

    @property
    def boundary_faces(self) -> np.ndarray:
        """Face indices of boundary faces, in boundary-cell order."""
        return np.flatnonzero(self.is_boundary)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @property
    def dist_i(self) -> np.ndarray:
        """δ_k^i = (x_k - x_i)·n_k, distance from the center of ``i`` to the face plane."""
        if "dist_i" not in self._cache:
            ci = self.face_cells[:, 0]
            d = np.sum((self.face_centers - self.cell_centers[ci]) * self.face_normals, axis=1)
            self._cache["dist_i"] = _readonly(d)
        return self._cache["dist_i"]

    @property
    def dist_j(self) -> np.ndarray:
        """δ_k^j = (x_j - x_k)·n_k for interior faces; 0 on the boundary (geometric part).

        The distance used by the discretization on a boundary face equals the
        Robin weight of the field in question, see :func:`face_distances`.
        """
        if "dist_j" not in self._cache:
            d = np.zeros(self.num_faces)
            inner = self.interior_faces
            cj = self.face_cells[inner, 1]
            d[inner] = np.sum(
                (self.cell_centers[cj] - self.face_centers[inner]) * self.face_normals[inner], axis=1
            )
            self._cache["dist_j"] = _readonly(d)
        return self._cache["dist_j"]

    @property
    def diameter(self) -> float:
        """Characteristic grid size δ: largest cell diameter (spacing for Cartesian grids)."""
        if self.shape is not None and self.extent is not None:
            return max((hi - lo) / n for (lo, hi), n in zip(self.extent, self.shape))
        h = 0.0
        for c in self.cells:
            pts = self.nodes[list(c)]
            diff = pts[:, None, :] - pts[None, :, :]
            h = max(h, float(np.sqrt((diff**2).sum(axis=2)).max()))
        return h

    def boundary_sides(self, tol: float = 1e-10) -> np.ndarray:
        """Label each boundary face with the side of the bounding box it lies on.

        Returns:
            Array of strings, one per boundary face: ``left``/``right`` (x),
            ``bottom``/``top`` (y), ``front``/``back`` (z), or ``other``.
        """
        names = (("left", "right"), ("bottom", "top"), ("front", "back"))
        lo = self.nodes.min(axis=0)
        hi = self.nodes.max(axis=0)
        bf = self.boundary_faces
        out = np.full(bf.size, "other", dtype=object)
        for ax in range(self.dim):
            scale = max(hi[ax] - lo[ax], 1.0)
            x = self.face_centers[bf, ax]
            n = self.face_normals[bf, ax]
            low = (np.abs(x - lo[ax]) <= tol * scale) & (n < -0.5)
            high = (np.abs(x - hi[ax]) <= tol * scale) & (n > 0.5)
            out[low & (out == "other")] = names[ax][0]
            out[high & (out == "other")] = names[ax][1]
        return out


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------


def _polygon_area(pts: np.ndarray) -> float:
    # Shift to the first vertex: the shoelace sum cancels badly for small cells.
    rel = pts - pts[0]
    x, y = rel[:, 0], rel[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _newell(pts: np.ndarray) -> np.ndarray:
    rel = pts - pts[0]
    nxt = np.roll(rel, -1, axis=0)
    return 0.5 * np.cross(rel, nxt).sum(axis=0)


def _polygon_centroid_3d(pts: np.ndarray, normal: np.ndarray) -> np.ndarray:
    p0 = pts[0]
    total = 0.0
    acc = np.zeros(3)
    for a, b in zip(pts[1:-1], pts[2:]):
        area = 0.5 * np.dot(np.cross(a - p0, b - p0), normal)
        acc += area * (p0 + a + b) / 3.0
        total += area
    return acc / total


def _line_intersection(a, b, p, q):
    """Point where segment line a-b meets line p-q (2D), or None if parallel."""
    m = np.column_stack([b - a, p - q])
    if abs(np.linalg.det(m)) < 1e-14 * np.linalg.norm(b - a) * max(np.linalg.norm(q - p), 1e-300):
        return None
    s, _ = np.linalg.solve(m, p - a)
    return a + s * (b - a)


def _assemble_faces(num_cells, cell_face_loops):
    """Deduplicate faces; the first cell that lists a face becomes its ``i`` neighbor."""
    index: dict[tuple, int] = {}
    loops: list[tuple] = []
    owners: list[list[int]] = []
    for c, flist in enumerate(cell_face_loops):
        for loop in flist:
            key = tuple(sorted(loop))
            k = index.get(key)
            if k is None:
                index[key] = len(loops)
                loops.append(tuple(loop))
                owners.append([c])
            else:
                if len(owners[k]) != 1:
                    raise InvalidArgumentError(f"face {key} shared by more than two cells")
                owners[k].append(c)
    nf = len(loops)
    face_cells = np.zeros((nf, 2), dtype=int)
    nb = 0
    for k, own in enumerate(owners):
        face_cells[k, 0] = own[0]
        if len(own) == 2:
            face_cells[k, 1] = own[1]
        else:
            face_cells[k, 1] = num_cells + nb
            nb += 1
    return loops, face_cells


def grid_from_cells(
    nodes: np.ndarray,
    cells: Sequence[Sequence[int]],
    cell_centers: np.ndarray | None = None,
    *,
    face_center_rule: str = "centroid",
    shape: tuple | None = None,
    extent: tuple | None = None,
) -> Grid:
    """Build a grid from vertex coordinates and cell vertex lists.

    In 2D cells are polygons with vertices listed counter-clockwise. In 3D
    cells are tetrahedra (4 vertices) or hexahedra (8 vertices, VTK order).

    Parameters:
        nodes: Vertex coordinates, ``shape=(num_nodes, dim)``.
        cells: Vertex indices per cell.
        cell_centers: Designated cell centers. Defaults to vertex centroids.
        face_center_rule: ``"centroid"`` places x_k at the face centroid;
            ``"orthogonal"`` (2D only) places x_k where the line between the
            neighboring cell centers crosses the face (orthogonal projection of
            x_i for boundary faces), which makes face-orthogonal meshes satisfy
            the orthogonality condition exactly.
        shape: Logical Cartesian shape, if any.
        extent: Bounding box per axis, if known.

    Returns:
        The grid. No admissibility checks are performed; see
        :func:`check_admissibility`.
    """
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] not in (2, 3):
        raise InvalidArgumentError("nodes must have shape (num_nodes, 2|3)")
    dim = nodes.shape[1]
    cells = tuple(tuple(int(v) for v in c) for c in cells)
    nc = len(cells)
    if nc == 0:
        raise InvalidArgumentError("grid needs at least one cell")
    for c in cells:
        if min(c) < 0 or max(c) >= len(nodes):
            raise InvalidArgumentError(f"cell {c} references a missing vertex")

    if dim == 2:
        loops = [[(c[a], c[(a + 1) % len(c)]) for a in range(len(c))] for c in cells]
        volumes = np.array([_polygon_area(nodes[list(c)]) for c in cells])
    else:
        loops = []
        for c in cells:
            if len(c) == 8:
                tmpl = HEX_FACES
            elif len(c) == 4:
                tmpl = TET_FACES
            else:
                raise InvalidArgumentError(f"3D cells must have 4 or 8 vertices, got {len(c)}")
            loops.append([tuple(c[v] for v in f) for f in tmpl])
        volumes = None

    vcentroid = np.array([nodes[list(c)].mean(axis=0) for c in cells])
    centers = vcentroid if cell_centers is None else np.asarray(cell_centers, dtype=float)
    if centers.shape != (nc, dim):
        raise InvalidArgumentError("cell_centers has the wrong shape")

    face_loops, face_cells = _assemble_faces(nc, loops)
    nf = len(face_loops)
    areas = np.zeros(nf)
    normals = np.zeros((nf, dim))
    fcenters = np.zeros((nf, dim))
    for k, loop in enumerate(face_loops):
        pts = nodes[list(loop)]
        if dim == 2:
            t = pts[1] - pts[0]
            ln = float(np.hypot(t[0], t[1]))
            areas[k] = ln
            normals[k] = (t[1] / ln, -t[0] / ln)  # outward for a CCW owner
            fcenters[k] = pts.mean(axis=0)
        else:
            nv = _newell(pts)
            a = float(np.linalg.norm(nv))
            areas[k] = a
            normals[k] = nv / a
            fcenters[k] = _polygon_centroid_3d(pts, normals[k])
            # Orient the normal out of the owner regardless of loop orientation.
            if np.dot(fcenters[k] - vcentroid[face_cells[k, 0]], normals[k]) < 0:
                normals[k] = -normals[k]

    if dim == 3:
        # Decompose each cell into tetrahedra over fan triangles of its faces.
        volumes = np.zeros(nc)
        for k, loop in enumerate(face_loops):
            pts = nodes[list(loop)]
            p0 = pts[0]
            tri = sum(np.cross(a - p0, b - p0) for a, b in zip(pts[1:-1], pts[2:]))
            base = abs(np.dot(tri, normals[k])) / 2.0
            for side, c in enumerate(face_cells[k]):
                if c >= nc:
                    continue
                n_out = normals[k] if side == 0 else -normals[k]
                volumes[c] += base * np.dot(p0 - vcentroid[c], n_out) / 3.0

    if face_center_rule == "orthogonal":
        if dim != 2:
            raise InvalidArgumentError("orthogonal face centers are only available in 2D")
        for k, loop in enumerate(face_loops):
            a, b = nodes[loop[0]], nodes[loop[1]]
            i, j = face_cells[k]
            xi = centers[i]
            if j < nc:
                x = _line_intersection(a, b, xi, centers[j])
            else:
                t = (b - a) / np.linalg.norm(b - a)
                x = a + np.dot(xi - a, t) * t
            if x is not None:
                fcenters[k] = x
    elif face_center_rule != "centroid":
        raise InvalidArgumentError(f"unknown face center rule {face_center_rule!r}")

    if extent is None:
        extent = tuple((float(lo), float(hi)) for lo, hi in zip(nodes.min(axis=0), nodes.max(axis=0)))

    return Grid(
        dim=dim,
        nodes=_readonly(nodes),
        cells=cells,
        cell_centers=_readonly(centers),
        cell_volumes=_readonly(volumes),
        face_nodes=tuple(face_loops),
        face_centers=_readonly(fcenters),
        face_areas=_readonly(areas),
        face_normals=_readonly(normals),
        face_cells=_readonly(face_cells, dtype=int),
        shape=shape,
        extent=extent,
    )


def _check_extent(extent, dim):
    if extent is None:
        extent = ((0.0, 1.0),) * dim
    extent = tuple((float(lo), float(hi)) for lo, hi in extent)
    if len(extent) != dim:
        raise InvalidArgumentError(f"extent must have {dim} axes")
    for lo, hi in extent:
        if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
            raise InvalidArgumentError("degenerate extent")
    return extent


def _cartesian_topology(shape):
    """Node count and cell vertex lists of a tensor-product grid."""
    if len(shape) == 2:
        nx, ny = shape
        vid = lambda i, j: i + (nx + 1) * j  # noqa: E731
        cells = [
            (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1))
            for j in range(ny)
            for i in range(nx)
        ]
    else:
        nx, ny, nz = shape
        vid = lambda i, j, k: i + (nx + 1) * (j + (ny + 1) * k)  # noqa: E731
        cells = [
            (
                vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k),
                vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j + 1, k + 1), vid(i, j + 1, k + 1),
            )
            for k in range(nz)
            for j in range(ny)
            for i in range(nx)
        ]
    return cells


def _cartesian_nodes(shape, extent):
    axes = [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(extent, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    # x fastest, then y, then z.
    return np.column_stack([m.ravel(order="F") for m in mesh])


def build_cartesian_grid(nx: int, ny: int, nz: int | None = None, extent=None) -> Grid:
    """Tensor-product grid of ``nx × ny (× nz)`` cells on a box (unit box by default)."""
    shape = (nx, ny) if nz is None else (nx, ny, nz)
    if any(int(n) != n or n < 1 for n in shape):
        raise InvalidArgumentError("cell counts must be positive integers")
    shape = tuple(int(n) for n in shape)
    extent = _check_extent(extent, len(shape))
    nodes = _cartesian_nodes(shape, extent)
    return grid_from_cells(nodes, _cartesian_topology(shape), shape=shape, extent=extent)


def perturb_grid(grid: Grid, order: int, amplitude: float = 0.3, seed: int = 0) -> Grid:
    """Randomly displace the interior vertices of a logically Cartesian grid.

    Each coordinate of each interior vertex moves by an independent uniform
    offset in ``[-a h^order, a h^order] · L`` with ``h = 1/n`` along the axis
    and ``L`` the extent length; boundary vertices stay fixed. Cell centers are
    recomputed as vertex centroids.

    Raises:
        InvalidArgumentError: Grid is not logically Cartesian, bad order/amplitude.
        DegenerateGridError: A perturbed cell has a center on or beyond a face plane.
    """
    if grid.shape is None:
        raise InvalidArgumentError("perturb_grid needs a logically Cartesian grid")
    if grid.dim != 2:
        # Moving hexahedron vertices independently would bend the faces.
        raise InvalidArgumentError("perturb_grid supports 2D grids only (faces must stay planar)")
    if order not in (1, 2):
        raise InvalidArgumentError("order must be 1 or 2")
    if not 0 <= amplitude < 0.5:
        raise InvalidArgumentError("amplitude must lie in [0, 0.5)")
    shape = grid.shape
    extent = grid.extent
    base = _cartesian_nodes(shape, extent)
    if amplitude == 0:
        return grid
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-1.0, 1.0, size=base.shape)
    scale = np.array([amplitude * (hi - lo) * (1.0 / n) ** order for (lo, hi), n in zip(extent, shape)])
    idx = np.indices([n + 1 for n in shape]).reshape(len(shape), -1, order="F")
    on_bnd = np.zeros(base.shape[0], dtype=bool)
    for ax, n in enumerate(shape):
        on_bnd |= (idx[ax] == 0) | (idx[ax] == n)
    offsets[on_bnd] = 0.0
    nodes = grid.nodes + offsets * scale
    out = grid_from_cells(nodes, grid.cells, shape=shape, extent=extent)
    _require_positive_distances(out)
    return out


def _require_positive_distances(grid: Grid) -> None:
    if np.any(grid.cell_volumes <= 0):
        c = int(np.argmin(grid.cell_volumes))
        raise DegenerateGridError(f"cell {c} has nonpositive volume")
    bad = np.flatnonzero(grid.dist_i <= 0)
    if bad.size:
        raise DegenerateGridError(f"δ_k^i ≤ 0 at face {bad[0]}")
    inner = grid.interior_faces
    bad = inner[grid.dist_j[inner] <= 0]
    if bad.size:
        raise DegenerateGridError(f"δ_k^j ≤ 0 at face {bad[0]}")


def _circumcenter(p: np.ndarray) -> np.ndarray:
    # Relative to the first vertex to avoid cancellation on fine grids.
    a = p[0]
    b, c = p[1] - a, p[2] - a
    d = 2.0 * (b[0] * c[1] - b[1] * c[0])
    sb, sc = b @ b, c @ c
    return a + np.array([c[1] * sb - b[1] * sc, b[0] * sc - c[0] * sb]) / d


def _strictly_inside(p: np.ndarray, x: np.ndarray, rel_tol: float = 1e-10) -> bool:
    area = abs(_polygon_area(p))
    for a in range(3):
        e0, e1 = p[a], p[(a + 1) % 3]
        t = e1 - e0
        cross = t[0] * (x[1] - e0[1]) - t[1] * (x[0] - e0[0])
        if cross <= rel_tol * area:
            return False
    return True


def build_simplex_grid(n: int, extent=None) -> Grid:
    """Acute triangulation of a box with ``n`` triangle bases per row.

    Node rows alternate between ``n + 1`` equispaced points (on even rows,
    including the bottom and top sides) and ``n`` staggered points. The first
    and last staggered points sit at distance ``s = (h + h_y) / 2`` from the
    sides, and the side columns are closed by triangles spanning two rows. With
    the row spacing ``h_y`` between ``h / 2`` and ``h`` every triangle is
    acute, so all cell centers are circumcenters and the grid is
    face-orthogonal with faces crossed at their midpoints.

    Raises:
        InvalidArgumentError: ``n < 3`` or the box aspect ratio admits no
            acute row spacing.
    """
    if int(n) != n or n < 3:
        raise InvalidArgumentError("simplex grids need n >= 3")
    n = int(n)
    extent = _check_extent(extent, 2)
    (x0, x1), (y0, y1) = extent
    h = (x1 - x0) / n
    height = y1 - y0
    # number of double rows k with h/2 < height/(2k) < h; h_y ≈ 0.75 h keeps
    # the largest angles near 81 degrees
    lo, hi = height / (2 * h), height / h
    k = int(round(height / (1.5 * h)))
    k = min(max(k, int(np.floor(lo)) + 1), int(np.ceil(hi)) - 1)
    if not lo < k < hi:
        raise InvalidArgumentError("box aspect ratio admits no acute row spacing for this n")
    m = 2 * k
    hy = height / m
    s = 0.5 * (h + hy)
    full = x0 + h * np.arange(n + 1)
    stag = np.concatenate([[x0 + s], x0 + h * (np.arange(1, n - 1) + 0.5), [x1 - s]])
    rows, nodes = [], []
    count = 0
    for j in range(m + 1):
        xs = full if j % 2 == 0 else stag
        rows.append(count + np.arange(xs.size))
        nodes.append(np.column_stack([xs, np.full(xs.size, y0 + j * hy)]))
        count += xs.size
    nodes = np.vstack(nodes)
    cells = []
    for j in range(0, m, 2):
        below, mid, above = rows[j], rows[j + 1], rows[j + 2]
        cells.append((below[0], mid[0], above[0]))
        cells.append((below[n], above[n], mid[n - 1]))
        for edge, upward in ((below, True), (above, False)):
            for i in range(n):
                tri = (edge[i], edge[i + 1], mid[i])
                cells.append(tri if upward else tri[::-1])
                if i < n - 1:
                    tri = (edge[i + 1], mid[i + 1], mid[i])
                    cells.append(tri if upward else tri[::-1])
    centers = []
    for cell in cells:
        p = nodes[list(cell)]
        cc = _circumcenter(p)
        centers.append(cc if _strictly_inside(p, cc) else p.mean(axis=0))
    return grid_from_cells(nodes, cells, np.array(centers), extent=extent)


# ---------------------------------------------------------------------------
# Incidence and averaging
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IncidenceMap:
    """Signed cell-face incidence Δ with interior (Δ_T) and boundary (Δ_B) row blocks."""

    full: sps.csr_matrix
    interior: sps.csr_matrix
    boundary: sps.csr_matrix


def build_incidence(grid: Grid) -> IncidenceMap:
    """Δ_{i,k} = +1 if n_k points out of cell i, -1 for the other neighbor."""
    if "incidence" in grid._cache:
        return grid._cache["incidence"]
    nf = grid.num_faces
    nrows = grid.num_cells + grid.num_boundary
    rows = grid.face_cells.T.ravel()
    cols = np.tile(np.arange(nf), 2)
    vals = np.concatenate([np.ones(nf), -np.ones(nf)])
    full = sps.csr_matrix((vals, (rows, cols)), shape=(nrows, nf))
    inc = IncidenceMap(full=full, interior=full[: grid.num_cells], boundary=full[grid.num_cells :])
    grid._cache["incidence"] = inc
    return inc


def robin_array(grid: Grid, robin) -> np.ndarray:
    """Broadcast a Robin weight (scalar or per boundary face) and validate it."""
    b = np.broadcast_to(np.asarray(robin, dtype=float), (grid.num_boundary,)).copy()
    if np.any(np.isnan(b)) or np.any(b < 0):
        raise InvalidArgumentError("Robin weights must lie in [0, inf]")
    return b


def face_distances(grid: Grid, robin) -> tuple[np.ndarray, np.ndarray]:
    """Distances (δ_k^i, δ_k^j) where boundary δ_k^j equals the field's Robin weight."""
    dj = grid.dist_j.copy()
    dj[grid.boundary_faces] = robin_array(grid, robin)
    return grid.dist_i.copy(), dj


def face_weights(grid: Grid, cell_field) -> tuple[np.ndarray, np.ndarray]:
    """Per-face material values on both sides; boundary cells inherit the interior value."""
    f = np.broadcast_to(np.asarray(cell_field, dtype=float), (grid.num_cells,))
    fi = f[grid.face_cells[:, 0]]
    fj = fi.copy()
    inner = grid.interior_faces
    fj[inner] = f[grid.face_cells[inner, 1]]
    return fi, fj


def averaging_weights(grid: Grid, weight, robin) -> tuple[np.ndarray, np.ndarray]:
    """Ξ_{k,i} and Ξ_{k,j} = 1 - Ξ_{k,i} for every face, with exact Neumann limits."""
    wi, wj = face_weights(grid, weight)
    if np.any(wi <= 0) or np.any(wj <= 0):
        raise InvalidArgumentError("averaging weight must be positive")
    di, dj = face_distances(grid, robin)
    neumann = np.isinf(dj)
    dj_f = np.where(neumann, 1.0, dj)
    xi_i = wi * dj_f / (wi * dj_f + wj * di)
    xi_i[neumann] = 1.0
    return xi_i, 1.0 - xi_i


@dataclass(frozen=True, eq=False)
class AveragingMap:
    """Weighted face averages Ξ and complements Ξ̃ as ``(num_faces, num_cells + num_boundary)`` matrices."""

    xi: sps.csr_matrix
    xi_tilde: sps.csr_matrix
    num_cells: int

    @property
    def interior(self) -> tuple[sps.csr_matrix, sps.csr_matrix]:
        """Columns acting on cell unknowns (Ξ_T, Ξ̃_T)."""
        return self.xi[:, : self.num_cells], self.xi_tilde[:, : self.num_cells]

    @property
    def boundary(self) -> tuple[sps.csr_matrix, sps.csr_matrix]:
        """Columns acting on boundary cells (Ξ_B, Ξ̃_B)."""
        return self.xi[:, self.num_cells :], self.xi_tilde[:, self.num_cells :]


def build_averaging(grid: Grid, weight, robin) -> AveragingMap:
    """Averaging map Ξ and its complement Ξ̃ (Ξ̃_{k,i} = Ξ_{k,j})."""
    xi_i, xi_j = averaging_weights(grid, weight, robin)
    nf = grid.num_faces
    shape = (nf, grid.num_cells + grid.num_boundary)
    rows = np.tile(np.arange(nf), 2)
    cols = grid.face_cells.T.ravel()
    xi = sps.csr_matrix((np.concatenate([xi_i, xi_j]), (rows, cols)), shape=shape)
    xt = sps.csr_matrix((np.concatenate([xi_j, xi_i]), (rows, cols)), shape=shape)
    return AveragingMap(xi=xi, xi_tilde=xt, num_cells=grid.num_cells)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrthogonalityReport:
    per_face: np.ndarray
    max_defect: float


def check_face_orthogonality(grid: Grid) -> OrthogonalityReport:
    """Normalized defect |n_k × (x_k - x_i)| / δ_k^i, maximized over interior neighbors."""
    x_k = grid.face_centers
    n = grid.face_normals
    per_face = np.zeros(grid.num_faces)
    for side in (0, 1):
        cells = grid.face_cells[:, side]
        ok = cells < grid.num_cells
        d = x_k[ok] - grid.cell_centers[cells[ok]]
        if grid.dim == 2:
            cross = np.abs(n[ok, 0] * d[:, 1] - n[ok, 1] * d[:, 0])
        else:
            cross = np.linalg.norm(np.cross(n[ok], d), axis=1)
        dist = grid.dist_i[ok] if side == 0 else grid.dist_j[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(dist > 0, cross / dist, np.inf)
        per_face[ok] = np.maximum(per_face[ok], val)
    mx = float(per_face.max()) if per_face.size else 0.0
    return OrthogonalityReport(per_face=per_face, max_defect=mx)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of :func:`check_admissibility`; ``message`` names the first violated invariant."""

    ok: bool
    message: str
    checks: dict

    def __bool__(self) -> bool:
        return self.ok


def closure_residual(grid: Grid) -> np.ndarray:
    """Per-cell Σ_k |ζ_k| Δ_{i,k} n_k relative to Σ_k |ζ_k|."""
    D = build_incidence(grid).interior
    vec = D @ (grid.face_areas[:, None] * grid.face_normals)
    scale = abs(D) @ grid.face_areas
    return np.linalg.norm(vec, axis=1) / scale


def volume_residual(grid: Grid) -> np.ndarray:
    """Per-cell relative mismatch of Σ_{k∈N_i} |ζ_k| δ_k^i against dim·|ω_i|."""
    s = np.zeros(grid.num_cells)
    np.add.at(s, grid.face_cells[:, 0], grid.face_areas * grid.dist_i)
    inner = grid.interior_faces
    np.add.at(s, grid.face_cells[inner, 1], grid.face_areas[inner] * grid.dist_j[inner])
    target = grid.dim * grid.cell_volumes
    return np.abs(s - target) / np.abs(target)


def check_admissibility(grid: Grid, tol: float = 1e-12) -> AdmissibilityReport:
    """Check the grid invariants in order and report the first failure."""
    checks: dict[str, bool] = {}
    nc = grid.num_cells
    fc = grid.face_cells
    nb = grid.num_boundary
    bcells = fc[grid.is_boundary, 1]
    two = bool(
        np.all(fc[:, 0] < nc)
        and np.all(fc[:, 0] >= 0)
        and np.all(fc[:, 0] != fc[:, 1])
        and np.array_equal(np.sort(bcells), np.arange(nc, nc + nb))
    )
    checks["two neighbors per face"] = two
    checks["positive volumes"] = bool(np.all(grid.cell_volumes > 0))
    inner = grid.interior_faces
    checks["δ_k^i > 0"] = bool(np.all(grid.dist_i > 0) and np.all(grid.dist_j[inner] > 0))
    checks["closure"] = bool(np.all(closure_residual(grid) <= tol)) if two else False
    checks["volume identity"] = bool(np.all(volume_residual(grid) <= tol)) if two else False

    failures = {
        "two neighbors per face": "face without exactly two neighbors",
        "positive volumes": "nonpositive cell volume",
        "δ_k^i > 0": "δ_k^i ≤ 0",
        "closure": "Σ|ζ|Δn ≠ 0 (cell not closed)",
        "volume identity": "Σ|ζ|δ^i ≠ dim·|ω|",
    }
    for name, passed in checks.items():
        if not passed:
            msg = failures[name]
            if name == "δ_k^i > 0":
                bad = np.flatnonzero(grid.dist_i <= 0)
                if bad.size:
                    k = int(bad[0])
                    msg += f" (face {k}, cell {int(fc[k, 0])})"
                else:
                    k = int(inner[grid.dist_j[inner] <= 0][0])
                    msg += f" (face {k}, cell {int(fc[k, 1])})"
            return AdmissibilityReport(ok=False, message=msg, checks=checks)
    return AdmissibilityReport(ok=True, message="admissible", checks=checks)
