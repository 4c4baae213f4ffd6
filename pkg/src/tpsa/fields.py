"""Material parameters and boundary conditions attached to a grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NonDegeneracyError
from .geometry import Grid

#: Robin weight of a Neumann (natural) condition. Formulas branch on it
#: explicitly; it never enters arithmetic as a large number.
NEUMANN = math.inf
DIRICHLET = 0.0


def _cellwise(grid: Grid, value, name: str) -> np.ndarray:
    a = np.asarray(value, dtype=float)
    try:
        a = np.broadcast_to(a, (grid.num_cells,)).copy()
    except ValueError:
        raise InvalidArgumentError(f"{name} must be a scalar or have one value per cell") from None
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} must be finite")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MaterialField:
    """Per-cell constitutive parameters.

    Attributes:
        mu: Shear modulus μ > 0.
        lambda_inv: Inverse bulk parameter λ⁻¹ ≥ 0 (0 encodes λ = ∞).
        ell: Micropolar length scale ℓ ≥ 0.
        theta: Biot coupling ϑ ≥ 0.
        kappa: Permeability times time step, κ ≥ 0.
        eta_w: Fluid compressibility η_w ≥ 0.
    """

    mu: np.ndarray
    lambda_inv: np.ndarray
    ell: np.ndarray
    theta: np.ndarray
    kappa: np.ndarray
    eta_w: np.ndarray

    @classmethod
    def uniform(
        cls,
        grid: Grid,
        mu=1.0,
        lambda_inv=1.0,
        ell=0.0,
        theta=0.0,
        kappa=1.0,
        eta_w=0.0,
    ) -> "MaterialField":
        """Build from scalars or per-cell arrays and validate the elastic bounds."""
        m = cls(
            mu=_cellwise(grid, mu, "mu"),
            lambda_inv=_cellwise(grid, lambda_inv, "lambda_inv"),
            ell=_cellwise(grid, ell, "ell"),
            theta=_cellwise(grid, theta, "theta"),
            kappa=_cellwise(grid, kappa, "kappa"),
            eta_w=_cellwise(grid, eta_w, "eta_w"),
        )
        m.validate()
        return m

    @property
    def num_cells(self) -> int:
        return self.mu.size

    @property
    def eta(self) -> np.ndarray:
        """Effective compressibility η = η_w + λ⁻¹ϑ²."""
        return self.eta_w + self.lambda_inv * self.theta**2

    @property
    def is_incompressible(self) -> bool:
        return bool(np.all(self.lambda_inv == 0))

    def pressure_kernel(self, flow: bool = False) -> np.ndarray | None:
        """Fluid-pressure direction of the constant total-pressure mode, if any.

        With displacement prescribed on the whole boundary, a constant total
        pressure p = c (together with w = c·k, k returned per cell) solves the
        homogeneous problem when λ⁻¹ = 0 everywhere, or, for poromechanics, when
        the fluid is undrained (κ = 0) and λ⁻¹η_w = 0 everywhere. Returns None
        when no such mode exists.
        """
        if self.is_incompressible:
            return np.zeros(self.num_cells)
        if flow and np.all(self.kappa == 0) and np.all(self.lambda_inv * self.eta_w == 0):
            with np.errstate(divide="ignore", invalid="ignore"):
                k = np.where(self.eta > 0, -self.theta * self.lambda_inv / self.eta, 0.0)
            return k
        return None

    def validate(self, flow: bool = False) -> None:
        """Check parameter bounds; with ``flow`` also the fluid non-degeneracy."""
        if np.any(self.mu <= 0):
            raise InvalidArgumentError("mu must be positive")
        for name in ("lambda_inv", "ell", "theta", "kappa", "eta_w"):
            if np.any(getattr(self, name) < 0):
                raise InvalidArgumentError(f"{name} must be nonnegative")
        if not flow:
            return
        if np.any(self.theta * self.lambda_inv > 1):
            raise InvalidArgumentError("theta * lambda_inv must not exceed 1")
        # A cell whose fluid is impermeable (κ = 0), incompressible (η = 0) and,
        # as a consequence, decoupled (ϑλ⁻¹ = 0) has an all-zero fluid row.
        dead = (self.kappa <= 0) & (self.eta <= 0)
        if np.any(dead):
            c = int(np.flatnonzero(dead)[0])
            raise NonDegeneracyError(
                f"fluid subsystem degenerate in cell {c}: kappa = 0 and eta_w + lambda_inv*theta^2 = 0"
            )


@dataclass(frozen=True, eq=False)
class FieldBC:
    """Robin weight b ∈ [0, ∞] and data g for one field on every boundary face."""

    weight: np.ndarray
    data: np.ndarray

    @property
    def is_dirichlet(self) -> np.ndarray:
        return self.weight == 0

    @property
    def is_neumann(self) -> np.ndarray:
        return np.isinf(self.weight)


def _field_bc(grid: Grid, weight, data, ncomp: int, name: str) -> FieldBC:
    nb = grid.num_boundary
    b = np.asarray(weight, dtype=float)
    try:
        b = np.broadcast_to(b, (nb,)).copy()
    except ValueError:
        raise InvalidArgumentError(f"{name} weight must be scalar or per boundary face") from None
    if np.any(np.isnan(b)) or np.any(b < 0):
        raise InvalidArgumentError(f"{name} Robin weight must lie in [0, inf]")
    g = np.zeros((nb, ncomp)) if data is None else np.asarray(data, dtype=float)
    try:
        g = np.broadcast_to(g.reshape(-1, ncomp) if g.ndim else g, (nb, ncomp)).copy()
    except ValueError:
        raise InvalidArgumentError(f"{name} data must have shape ({nb}, {ncomp})") from None
    if not np.all(np.isfinite(g)):
        raise InvalidArgumentError(f"{name} data must be finite")
    b.setflags(write=False)
    g.setflags(write=False)
    return FieldBC(weight=b, data=g)


def rotation_dim(dim: int) -> int:
    """Number of rotation components: 1 in 2D, 3 in 3D."""
    return 1 if dim == 2 else 3


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Boundary conditions for displacement (u), rotation (r) and fluid pressure (w).

    For every boundary face and field the condition reads, with outward
    normal n and Robin weight b:

    * u: ``b (σ·n - g) = 2μ (g - u)``
    * r: ``b (couple traction - g) = ℓ² (g - r)``
    * w: ``b (χ·n - g) = κ (w - g)``

    so that b = 0 prescribes the value and b = ∞ the flux.
    """

    u: FieldBC
    r: FieldBC
    w: FieldBC

    @classmethod
    def build(
        cls,
        grid: Grid,
        b_u=DIRICHLET,
        b_r=None,
        b_w=DIRICHLET,
        g_u=None,
        g_r=None,
        g_w=None,
    ) -> "BoundarySpec":
        """Create conditions from scalar or per-face weights and data (zero data by default).

        ``b_r`` defaults to ``b_u``.
        """
        if b_r is None:
            b_r = b_u
        return cls(
            u=_field_bc(grid, b_u, g_u, grid.dim, "u"),
            r=_field_bc(grid, b_r, g_r, rotation_dim(grid.dim), "r"),
            w=_field_bc(grid, b_w, g_w, 1, "w"),
        )

    @classmethod
    def dirichlet(cls, grid: Grid) -> "BoundarySpec":
        """Homogeneous Dirichlet conditions for all fields."""
        return cls.build(grid)

    def with_data(self, g_u=None, g_r=None, g_w=None) -> "BoundarySpec":
        """Copy with replaced boundary data (weights unchanged)."""
        nb = self.u.weight.size

        def repl(bc, g, ncomp):
            if g is None:
                return bc
            arr = np.broadcast_to(np.asarray(g, dtype=float).reshape(-1, ncomp), (nb, ncomp)).copy()
            arr.setflags(write=False)
            return FieldBC(weight=bc.weight, data=arr)

        return BoundarySpec(
            u=repl(self.u, g_u, self.u.data.shape[1]),
            r=repl(self.r, g_r, self.r.data.shape[1]),
            w=repl(self.w, g_w, 1),
        )
