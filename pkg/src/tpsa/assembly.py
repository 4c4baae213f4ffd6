"""Global sparse block systems for elasticity/Cosserat/Stokes and poromechanics.

Unknowns are ordered variable-major: all displacement components, all
rotation components, the total pressure p and (for poromechanics) the fluid
pressure w. Within a variable, components are stored one after the other and
cells run fastest, so component ``c`` of cell ``i`` of a variable sits at
``offset + c * num_cells + i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .discretization import FaceCoefficients, face_coefficients, tpfa_stencil, tpsa_blocks
from .errors import InvalidArgumentError, SingularSystemError
from .fields import BoundarySpec, MaterialField, rotation_dim
from .geometry import Grid, build_incidence


@dataclass(frozen=True)
class DofLayout:
    """Offsets of the variable blocks in the global unknown vector."""

    num_cells: int
    dim: int
    dim_r: int
    flow: bool
    gauge: bool = False

    @property
    def sizes(self) -> dict:
        nc = self.num_cells
        s = {"u": self.dim * nc, "r": self.dim_r * nc, "p": nc}
        if self.flow:
            s["w"] = nc
        if self.gauge:
            s["gauge"] = 1
        return s

    @property
    def size(self) -> int:
        return sum(self.sizes.values())

    def slice(self, name: str) -> slice:
        start = 0
        for key, n in self.sizes.items():
            if key == name:
                return slice(start, start + n)
            start += n
        raise KeyError(name)

    def split(self, x: np.ndarray) -> dict:
        """Cell-major views ``(num_cells, ncomp)`` of each variable in ``x``."""
        out = {}
        nc = self.num_cells
        for key in ("u", "r", "p", "w"):
            if key == "w" and not self.flow:
                continue
            block = np.asarray(x)[self.slice(key)]
            out[key] = block.reshape(-1, nc).T.copy() if key in ("u", "r") else block.copy()
        return out

    def join(self, u, r, p, w=None) -> np.ndarray:
        """Inverse of :meth:`split` (gauge entry set to zero)."""
        nc = self.num_cells
        parts = [
            np.asarray(u, dtype=float).reshape(nc, self.dim).T.ravel(),
            np.asarray(r, dtype=float).reshape(nc, self.dim_r).T.ravel(),
            np.asarray(p, dtype=float).reshape(nc),
        ]
        if self.flow:
            parts.append(np.zeros(nc) if w is None else np.asarray(w, dtype=float).reshape(nc))
        if self.gauge:
            parts.append(np.zeros(1))
        return np.concatenate(parts)


@dataclass(frozen=True, eq=False)
class SourceField:
    """Cell values of the right-hand sides (midpoint values of the source fields)."""

    u: np.ndarray
    r: np.ndarray
    p: np.ndarray
    w: np.ndarray

    @classmethod
    def zero(cls, grid: Grid) -> "SourceField":
        nc = grid.num_cells
        return cls(np.zeros((nc, grid.dim)), np.zeros((nc, rotation_dim(grid.dim))), np.zeros(nc), np.zeros(nc))

    def norm(self, grid: Grid) -> float:
        """Volume-weighted L² norm over all components."""
        vol = grid.cell_volumes
        s = (vol * (self.u**2).sum(axis=1)).sum() + (vol * (self.r**2).sum(axis=1)).sum()
        s += (vol * self.p**2).sum() + (vol * self.w**2).sum()
        return float(np.sqrt(s))


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """Cell values of u ``(nc, dim)``, r ``(nc, dim_r)``, p and w ``(nc,)``."""

    u: np.ndarray
    r: np.ndarray
    p: np.ndarray
    w: np.ndarray

    @classmethod
    def from_vector(cls, layout: DofLayout, x: np.ndarray) -> "DiscreteSolution":
        parts = layout.split(x)
        w = parts.get("w", np.zeros(layout.num_cells))
        return cls(u=parts["u"], r=parts["r"], p=parts["p"], w=w)

    def to_vector(self, layout: DofLayout) -> np.ndarray:
        return layout.join(self.u, self.r, self.p, self.w)

    def __sub__(self, other: "DiscreteSolution") -> "DiscreteSolution":
        return DiscreteSolution(self.u - other.u, self.r - other.r, self.p - other.p, self.w - other.w)

    def __mul__(self, c: float) -> "DiscreteSolution":
        return DiscreteSolution(c * self.u, c * self.r, c * self.p, c * self.w)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """Assembled matrix, right-hand side and the DOF layout."""

    matrix: sps.csr_matrix
    rhs: np.ndarray
    layout: DofLayout
    cell_volumes: np.ndarray
    coefficients: FaceCoefficients | None = None

    def block(self, row: str, col: str) -> sps.csr_matrix:
        """Submatrix coupling variable ``row`` (equation) to variable ``col`` (unknown)."""
        return self.matrix[self.layout.slice(row), :][:, self.layout.slice(col)]


def _check_sizes(grid: Grid, materials: MaterialField, bc: BoundarySpec, sources: SourceField | None):
    if materials.num_cells != grid.num_cells:
        raise InvalidArgumentError("material field size does not match the grid")
    if bc.u.weight.size != grid.num_boundary:
        raise InvalidArgumentError("boundary conditions do not match the grid")
    if sources is not None:
        nc = grid.num_cells
        ok = (
            sources.u.shape == (nc, grid.dim)
            and sources.r.shape == (nc, rotation_dim(grid.dim))
            and sources.p.shape == (nc,)
            and sources.w.shape == (nc,)
        )
        if not ok:
            raise InvalidArgumentError("source field does not match the grid")


def _scatter_blocks(grid: Grid, blocks_i: np.ndarray, blocks_j: np.ndarray) -> sps.csr_matrix:
    """Map stacked local blocks to a (face-output × cell-unknown) sparse matrix."""
    nf, nout, nin = blocks_i.shape
    nc = grid.num_cells
    k = np.arange(nf)[:, None, None]
    a = np.arange(nout)[None, :, None]
    b = np.arange(nin)[None, None, :]
    rows = np.broadcast_to(a * nf + k, blocks_i.shape)
    inner = ~grid.is_boundary
    ci = grid.face_cells[:, 0][:, None, None]
    cj = grid.face_cells[:, 1][:, None, None]
    cols_i = np.broadcast_to(b * nc + ci, blocks_i.shape)
    cols_j = np.broadcast_to(b * nc + cj, blocks_j.shape)
    r = np.concatenate([rows.ravel(), rows[inner].ravel()])
    c = np.concatenate([cols_i.ravel(), cols_j[inner].ravel()])
    v = np.concatenate([blocks_i.ravel(), blocks_j[inner].ravel()])
    keep = v != 0
    return sps.csr_matrix((v[keep], (r[keep], c[keep])), shape=(nout * nf, nin * nc))


def _scatter_data(grid: Grid, data: np.ndarray) -> sps.csr_matrix:
    """Map boundary-data blocks to a (face-output × boundary-datum) sparse matrix."""
    nf, nout, ndat = data.shape
    nb = grid.num_boundary
    bf = grid.boundary_faces
    ordinal = np.arange(nb)
    a = np.arange(nout)[None, :, None]
    b = np.arange(ndat)[None, None, :]
    rows = np.broadcast_to(a * nf + bf[:, None, None], (nb, nout, ndat))
    cols = np.broadcast_to(b * nb + ordinal[:, None, None], (nb, nout, ndat))
    v = data[bf]
    keep = v != 0
    return sps.csr_matrix((v[keep], (rows[keep], cols[keep])), shape=(nout * nf, ndat * nb))


def flux_operators(grid: Grid, materials: MaterialField, bc: BoundarySpec, flow: bool = False):
    """Face-flux matrices F (from cell unknowns) and G (from boundary data).

    Face outputs are ordered ``[σ comps, τ comps, v, (χ)]``, each with faces
    running fastest. Boundary data are ordered ``[g^u comps, g^r comps, (g^w)]``
    with boundary faces running fastest.

    Returns:
        Tuple ``(F, G, coefficients)``.
    """
    coeffs = face_coefficients(grid, materials, bc)
    st = tpsa_blocks(grid, coeffs)
    F = _scatter_blocks(grid, st.cell_i, st.cell_j)
    G = _scatter_data(grid, st.data)
    if flow:
        tp = tpfa_stencil(grid, coeffs)
        Fw = _scatter_blocks(grid, tp.cell_i[:, None, None], tp.cell_j[:, None, None])
        Gw = _scatter_data(grid, tp.data[:, None, None])
        F = sps.block_diag([F, Fw], format="csr")
        G = sps.block_diag([G, Gw], format="csr")
    return F, G, coeffs


def boundary_data_vector(grid: Grid, bc: BoundarySpec, flow: bool) -> np.ndarray:
    parts = [bc.u.data.T.ravel(), bc.r.data.T.ravel()]
    if flow:
        parts.append(bc.w.data.ravel())
    return np.concatenate(parts)


def _assemble(grid, materials, bc, sources, flow: bool, allow_pure_neumann: bool) -> BlockSystem:
    _check_sizes(grid, materials, bc, sources)
    materials.validate(flow=flow)
    if not allow_pure_neumann and grid.num_boundary and np.all(bc.u.is_neumann):
        raise SingularSystemError("pure Neumann displacement conditions leave rigid motions undetermined")
    if flow and np.all(materials.eta <= 0) and grid.num_boundary and np.all(bc.w.is_neumann):
        raise SingularSystemError("pure Neumann fluid conditions with zero compressibility are singular")

    dim = grid.dim
    dr = rotation_dim(dim)
    nc = grid.num_cells
    layout = DofLayout(num_cells=nc, dim=dim, dim_r=dr, flow=flow)
    nout = dim + dr + 1 + (1 if flow else 0)

    F, G, coeffs = flux_operators(grid, materials, bc, flow)
    div = sps.kron(sps.identity(nout), build_incidence(grid).interior, format="csr")
    A = div @ F

    vol = grid.cell_volumes
    mass = [np.zeros(dim * nc), np.tile(vol / materials.mu, dr), vol * materials.lambda_inv]
    if flow:
        mass.append(-vol * materials.eta)
    A = A - sps.diags(np.concatenate(mass))
    if flow:
        p = layout.slice("p")
        w = layout.slice("w")
        c = vol * materials.theta * materials.lambda_inv
        idx_p = np.arange(p.start, p.stop)
        idx_w = np.arange(w.start, w.stop)
        coupling = sps.csr_matrix(
            (np.concatenate([-c, c]), (np.concatenate([idx_p, idx_w]), np.concatenate([idx_w, idx_p]))),
            shape=A.shape,
        )
        A = A + coupling

    if sources is None:
        sources = SourceField.zero(grid)
    f = [sources.u.T.ravel(), sources.r.T.ravel(), sources.p]
    if flow:
        f.append(sources.w)
    weights = np.concatenate([np.tile(vol, dim), np.tile(vol, dr), vol] + ([vol] if flow else []))
    rhs = weights * np.concatenate(f) - div @ (G @ boundary_data_vector(grid, bc, flow))
    A = sps.csr_matrix(A)
    A.eliminate_zeros()
    return BlockSystem(matrix=A, rhs=rhs, layout=layout, cell_volumes=vol, coefficients=coeffs)


def assemble_elastic(
    grid: Grid,
    materials: MaterialField,
    bc: BoundarySpec,
    sources: SourceField | None = None,
    *,
    allow_pure_neumann: bool = False,
) -> BlockSystem:
    """System for (u, r, p): divergence of the TPSA fluxes minus the mass terms.

    Rows read ``Δσ = |ω| f^u``, ``Δτ - |ω| μ⁻¹ r = |ω| f^r`` and
    ``Δv - |ω| λ⁻¹ p = |ω| f^p``; boundary data move to the right-hand side.

    Raises:
        SingularSystemError: All displacement conditions are Neumann.
        InvalidArgumentError: Sizes or parameters are inconsistent.
    """
    return _assemble(grid, materials, bc, sources, False, allow_pure_neumann)


def assemble_poromech(
    grid: Grid,
    materials: MaterialField,
    bc: BoundarySpec,
    sources: SourceField | None = None,
    *,
    allow_pure_neumann: bool = False,
) -> BlockSystem:
    """System for (u, r, p, w): the elastic system plus the Darcy block.

    The fluid row reads ``Δχ + |ω| ϑλ⁻¹ p + |ω| η w = |ω| f^w`` and the
    pressure row gains ``-|ω| ϑλ⁻¹ w``.

    Raises:
        NonDegeneracyError: Some cell has κ = 0 and η = 0.
    """
    return _assemble(grid, materials, bc, sources, True, allow_pure_neumann)


def handle_incompressible_limit(system: BlockSystem, materials: MaterialField, bc: BoundarySpec | None = None) -> BlockSystem:
    """Append a Lagrange multiplier enforcing Σ_i |ω_i| p_i = 0.

    With λ⁻¹ = 0 (or an undrained, incompressible fluid, see
    :meth:`MaterialField.pressure_kernel`) and displacement prescribed on the
    whole boundary, constant total pressures lie in the kernel of the system;
    the multiplier fixes the mean and restores a nonsingular matrix.

    Raises:
        InvalidArgumentError: The parameters admit no constant pressure mode,
            some displacement condition is not Dirichlet, or the system already
            has a multiplier.
    """
    if materials.pressure_kernel(system.layout.flow) is None:
        raise InvalidArgumentError("incompressible limit requires lambda_inv = 0 (or an undrained incompressible fluid)")
    if bc is not None and not np.all(bc.u.is_dirichlet):
        raise InvalidArgumentError("incompressible limit requires Dirichlet displacement conditions")
    layout = system.layout
    if layout.gauge:
        raise InvalidArgumentError("system already carries a pressure gauge")
    n = layout.size
    p = layout.slice("p")
    c = np.zeros(n)
    c[p] = system.cell_volumes
    col = sps.csr_matrix(c[:, None])
    A = sps.bmat([[system.matrix, col], [col.T, None]], format="csr")
    rhs = np.concatenate([system.rhs, [0.0]])
    new_layout = DofLayout(layout.num_cells, layout.dim, layout.dim_r, layout.flow, gauge=True)
    return BlockSystem(
        matrix=A, rhs=rhs, layout=new_layout, cell_volumes=system.cell_volumes, coefficients=system.coefficients
    )
