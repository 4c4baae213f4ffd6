"""Two-point stress (TPSA) and two-point flux (TPFA) face stencils.

Every numerical flux is an integrated quantity, i.e. already multiplied by the
face measure |ζ_k|. Orientation follows the face normal: Δ*z = z_i - z_j with
n_k pointing out of cell i.

Per face, the local unknowns of each neighbor are stacked as
``[u (dim), r (dim_r), p]`` and the elastic fluxes as
``[σ (dim), τ (dim_r), v]``, with dim_r = 1 in 2D and 3 in 3D.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fields import BoundarySpec, MaterialField, rotation_dim
from .geometry import Grid, face_distances, face_weights
from .tensor_ops import asym_adjoint


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """num / den with 0/0 = 0 (both arguments nonnegative)."""
    out = np.zeros(np.broadcast(num, den).shape)
    ok = den > 0
    np.divide(num, den, out=out, where=ok)
    return out


def _harmonic_transmissibility(wi, wj, di, dj) -> np.ndarray:
    """w_i w_j / (w_i d_j + w_j d_i), i.e. δ⁻¹ times the distance-weighted harmonic mean.

    An infinite d_j gives 0; vanishing weights give 0.
    """
    inf = np.isinf(dj)
    djf = np.where(inf, 0.0, dj)
    t = _safe_div(wi * wj, wi * djf + wj * di)
    t[inf] = 0.0
    return t


@dataclass(frozen=True, eq=False)
class FaceCoefficients:
    """Material-weighted face quantities, one entry per face.

    Attributes:
        t2mu: δ_k⁻¹ 2μ̄_k.
        mu_bar: Harmonic shear weight μ̄_k.
        xi_i, xi_j: Averaging weights Ξ_{k,i}, Ξ_{k,j} (Ξ̃_{k,i} = Ξ_{k,j}).
        delta_mu: μ-weighted distance δ^μ_k.
        t_ell: (δ^r_k)⁻¹ ℓ̄²_k.
        ell_bar2: Harmonic Cosserat weight ℓ̄²_k.
        t_kappa: δ_k⁻¹ κ̄_k.
        kappa_bar: Harmonic permeability κ̄_k.
        g_sigma: Weight of g^u in σ on boundary faces, (b + 2μ)/(b + δ^i).
        g_couple: Weight of g^u in τ and v on boundary faces, Ξ_{k,j} + δ^μ.
        g_tau: Weight of g^r in τ on boundary faces, (b^r + ℓ²)/(b^r + δ^i).
        g_chi: Weight of g^w in χ on boundary faces, (b^w - κ)/(b^w + δ^i).
    """

    t2mu: np.ndarray
    mu_bar: np.ndarray
    xi_i: np.ndarray
    xi_j: np.ndarray
    delta_mu: np.ndarray
    t_ell: np.ndarray
    ell_bar2: np.ndarray
    t_kappa: np.ndarray
    kappa_bar: np.ndarray
    g_sigma: np.ndarray
    g_couple: np.ndarray
    g_tau: np.ndarray
    g_chi: np.ndarray


def face_coefficients(grid: Grid, materials: MaterialField, bc: BoundarySpec) -> FaceCoefficients:
    """Harmonic means, averaging weights and boundary-data weights for all faces.

    Boundary faces use the interior cell's material on both sides and the
    field's Robin weight as the distance of the boundary neighbor.
    """
    if materials.num_cells != grid.num_cells:
        raise InvalidArgumentError("material field does not match the grid")
    if np.any(materials.mu <= 0):
        raise InvalidArgumentError("mu must be positive")
    bf = grid.boundary_faces
    di, dj = face_distances(grid, bc.u.weight)
    _, dr = face_distances(grid, bc.r.weight)
    _, dw = face_distances(grid, bc.w.weight)
    mi, mj = face_weights(grid, materials.mu)
    li, lj = face_weights(grid, materials.ell**2)
    ki, kj = face_weights(grid, materials.kappa)

    neu = np.isinf(dj)
    djf = np.where(neu, 0.0, dj)
    den = mi * djf + mj * di

    t2mu = 2.0 * _harmonic_transmissibility(mi, mj, di, dj)
    xi_i = np.where(neu, 1.0, mi * djf / den)
    xi_i[neu] = 1.0
    xi_j = 1.0 - xi_i
    delta_mu = np.where(neu, di / (2.0 * mi), di * djf / (2.0 * den))
    mu_bar = np.where(neu, mi, (di + djf) * mi * mj / den)

    t_ell = _harmonic_transmissibility(li, lj, di, dr)
    ell_bar2 = np.where(np.isinf(dr), li, t_ell * (di + np.where(np.isinf(dr), 0.0, dr)))
    t_kappa = _harmonic_transmissibility(ki, kj, di, dw)
    kappa_bar = np.where(np.isinf(dw), ki, t_kappa * (di + np.where(np.isinf(dw), 0.0, dw)))

    g_sigma = np.zeros(grid.num_faces)
    g_couple = np.zeros(grid.num_faces)
    g_tau = np.zeros(grid.num_faces)
    g_chi = np.zeros(grid.num_faces)

    def robin_ratio(b, extra, d):
        # (b + extra) / (b + d) with the Neumann limit 1.
        inf = np.isinf(b)
        bf_ = np.where(inf, 0.0, b)
        out = (bf_ + extra) / (bf_ + d)
        out[inf] = 1.0
        return out

    d_b = di[bf]
    g_sigma[bf] = robin_ratio(dj[bf], 2.0 * mi[bf], d_b)
    g_couple[bf] = xi_j[bf] + delta_mu[bf]
    g_tau[bf] = robin_ratio(dr[bf], li[bf], d_b)
    g_chi[bf] = robin_ratio(dw[bf], -ki[bf], d_b)

    return FaceCoefficients(
        t2mu=t2mu,
        mu_bar=mu_bar,
        xi_i=xi_i,
        xi_j=xi_j,
        delta_mu=delta_mu,
        t_ell=t_ell,
        ell_bar2=ell_bar2,
        t_kappa=t_kappa,
        kappa_bar=kappa_bar,
        g_sigma=g_sigma,
        g_couple=g_couple,
        g_tau=g_tau,
        g_chi=g_chi,
    )


def rotation_couplings(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Couplings (r → σ, u → τ) per face.

    In 3D both equal Rⁿ = S*n. In 2D the rotation is a scalar: r → σ is the
    column ``(n₂, -n₁)`` and u → τ is the row ``(-n₂, n₁)``.
    """
    n = np.asarray(normals, dtype=float)
    if n.shape[-1] == 3:
        R = asym_adjoint(n)
        return R, R
    c_ur = np.stack([n[..., 1], -n[..., 0]], axis=-1)[..., :, None]
    c_ru = np.stack([-n[..., 1], n[..., 0]], axis=-1)[..., None, :]
    return c_ur, c_ru


@dataclass(frozen=True, eq=False)
class FaceStencil:
    """Local flux blocks of one face (or stacked over faces along axis 0).

    ``cell_i`` and ``cell_j`` map the stacked unknowns ``[u, r, p]`` of the two
    neighbors to ``[σ, τ, v]``; ``data`` maps ``[g^u, g^r]`` to the same fluxes.
    For boundary faces ``cell_j`` is zero, for interior faces ``data`` is zero.
    """

    cell_i: np.ndarray
    cell_j: np.ndarray
    data: np.ndarray


def tpsa_blocks(grid: Grid, coeffs: FaceCoefficients) -> FaceStencil:
    """Local TPSA blocks for every face, stacked along the first axis."""
    dim = grid.dim
    dr = rotation_dim(dim)
    nf = grid.num_faces
    nin = dim + dr + 1
    n = grid.face_normals
    area = grid.face_areas
    c_ur, c_ru = rotation_couplings(n)
    eye = np.eye(dim)
    eye_r = np.eye(dr)
    su, sr, sp = slice(0, dim), slice(dim, dim + dr), slice(dim + dr, dim + dr + 1)

    def side(sign, xi_own, xi_other):
        # xi_own is Ξ for this neighbor, xi_other = Ξ̃ for this neighbor.
        b = np.zeros((nf, nin, nin))
        b[:, su, su] = -sign * coeffs.t2mu[:, None, None] * eye
        b[:, su, sr] = -c_ur * xi_other[:, None, None]
        b[:, su, sp] = n[:, :, None] * xi_other[:, None, None]
        b[:, sr, su] = -c_ru * xi_own[:, None, None]
        b[:, sr, sr] = -sign * coeffs.t_ell[:, None, None] * eye_r
        b[:, sp, su] = n[:, None, :] * xi_own[:, None, None]
        b[:, sp, sp] = -sign * coeffs.delta_mu[:, None, None]
        return b * area[:, None, None]

    bnd = grid.is_boundary
    cell_i = side(1.0, coeffs.xi_i, coeffs.xi_j)
    cell_j = side(-1.0, coeffs.xi_j, coeffs.xi_i)
    cell_j[bnd] = 0.0

    data = np.zeros((nf, nin, dim + dr))
    gu, gr = slice(0, dim), slice(dim, dim + dr)
    data[:, su, gu] = coeffs.g_sigma[:, None, None] * eye
    data[:, sr, gu] = -c_ru * coeffs.g_couple[:, None, None]
    data[:, sr, gr] = coeffs.g_tau[:, None, None] * eye_r
    data[:, sp, gu] = n[:, None, :] * coeffs.g_couple[:, None, None]
    data *= area[:, None, None]
    data[~bnd] = 0.0
    return FaceStencil(cell_i=cell_i, cell_j=cell_j, data=data)


def tpsa_internal_stencil(grid: Grid, face: int, coeffs: FaceCoefficients) -> FaceStencil:
    """TPSA blocks of a single interior face."""
    if grid.is_boundary[face]:
        raise InvalidArgumentError(f"face {face} is a boundary face; use tpsa_boundary_stencil")
    st = tpsa_blocks(grid, coeffs)
    return FaceStencil(cell_i=st.cell_i[face], cell_j=st.cell_j[face], data=st.data[face])


def tpsa_boundary_stencil(grid: Grid, face: int, coeffs: FaceCoefficients) -> FaceStencil:
    """TPSA blocks of a single boundary face, including the boundary-data block."""
    if not grid.is_boundary[face]:
        raise InvalidArgumentError(f"face {face} is an interior face; use tpsa_internal_stencil")
    st = tpsa_blocks(grid, coeffs)
    return FaceStencil(cell_i=st.cell_i[face], cell_j=st.cell_j[face], data=st.data[face])


@dataclass(frozen=True, eq=False)
class TpfaStencil:
    """Scalar two-point flux weights χ_k = c_i w_i + c_j w_j + c_g g^w."""

    cell_i: np.ndarray
    cell_j: np.ndarray
    data: np.ndarray


def tpfa_stencil(grid: Grid, coeffs: FaceCoefficients) -> TpfaStencil:
    """Darcy flux weights for all faces."""
    area = grid.face_areas
    bnd = grid.is_boundary
    ci = area * coeffs.t_kappa
    cj = np.where(bnd, 0.0, -ci)
    cg = np.where(bnd, area * coeffs.g_chi, 0.0)
    return TpfaStencil(cell_i=ci, cell_j=cj, data=cg)


def _cell_values(grid: Grid, field: np.ndarray, ncomp: int) -> tuple[np.ndarray, np.ndarray]:
    """Values on both sides of each face; the j side is zero on boundary faces."""
    f = np.asarray(field, dtype=float).reshape(grid.num_cells, ncomp)
    vi = f[grid.face_cells[:, 0]]
    vj = np.zeros_like(vi)
    inner = grid.interior_faces
    vj[inner] = f[grid.face_cells[inner, 1]]
    return vi, vj


def face_fluxes(
    grid: Grid, coeffs: FaceCoefficients, bc: BoundarySpec, u: np.ndarray, r: np.ndarray, p: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Evaluate (σ_k, τ_k, v_k) for cell fields of shape (nc, dim), (nc, dim_r), (nc,)."""
    dim = grid.dim
    dr = rotation_dim(dim)
    st = tpsa_blocks(grid, coeffs)
    ui, uj = _cell_values(grid, u, dim)
    ri, rj = _cell_values(grid, r, dr)
    pi, pj = _cell_values(grid, p, 1)
    zi = np.hstack([ui, ri, pi])
    zj = np.hstack([uj, rj, pj])
    g = np.zeros((grid.num_faces, dim + dr))
    bf = grid.boundary_faces
    g[bf] = np.hstack([bc.u.data, bc.r.data])
    flux = (
        np.einsum("kab,kb->ka", st.cell_i, zi)
        + np.einsum("kab,kb->ka", st.cell_j, zj)
        + np.einsum("kab,kb->ka", st.data, g)
    )
    return flux[:, :dim], flux[:, dim : dim + dr], flux[:, dim + dr]


def face_displacement(
    grid: Grid, coeffs: FaceCoefficients, bc: BoundarySpec, u: np.ndarray, p: np.ndarray
) -> np.ndarray:
    """Face displacement u_k = Ξ_k u - δ^μ_k n_k Δ*_k p, with boundary data on boundary faces."""
    dim = grid.dim
    ui, uj = _cell_values(grid, u, dim)
    pi, pj = _cell_values(grid, p, 1)
    n = grid.face_normals
    uk = coeffs.xi_i[:, None] * ui + coeffs.xi_j[:, None] * uj - coeffs.delta_mu[:, None] * n * (pi - pj)
    bf = grid.boundary_faces
    uk[bf] += coeffs.g_couple[bf, None] * bc.u.data
    return uk


def recover_couple_stress(grid: Grid, tau: np.ndarray, u_face: np.ndarray) -> np.ndarray:
    """Couple stress ν_k = 2(τ_k + |ζ_k| Rⁿ_k u_k), integrated over the face."""
    _, c_ru = rotation_couplings(grid.face_normals)
    rot = np.einsum("kab,kb->ka", c_ru, np.asarray(u_face, dtype=float).reshape(grid.num_faces, grid.dim))
    tau = np.asarray(tau, dtype=float).reshape(rot.shape)
    return 2.0 * (tau + grid.face_areas[:, None] * rot)
