"""Discrete norms, error measurement and convergence studies."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import DiscreteSolution, assemble_elastic, assemble_poromech, handle_incompressible_limit
from .discretization import face_coefficients
from .errors import InvalidArgumentError
from .fields import NEUMANN, BoundarySpec, MaterialField
from .geometry import (
    Grid,
    build_cartesian_grid,
    build_incidence,
    build_simplex_grid,
    perturb_grid,
)
from .manufactured import ExactSolution, evaluate_sources, get_solution
from .solver import solve

MODELS = ("elastic", "cosserat", "stokes", "poromech")
GRID_FAMILIES = ("gt1", "gt2", "gt3", "gt4")
SIDES = ("left", "right", "bottom", "top", "front", "back")
SWEEP_PARAMS = ("lambda", "lambda_inv", "ell", "theta", "kappa", "eta_w")


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def _as_columns(values: np.ndarray, n: int, what: str) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] != n:
        raise InvalidArgumentError(f"{what} needs {n} rows, got {v.shape[0]}")
    return v


def _weights(weight, n: int) -> np.ndarray:
    w = np.broadcast_to(np.asarray(weight, dtype=float), (n,))
    if np.any(w < 0):
        raise InvalidArgumentError("norm weights must be nonnegative")
    return w


def cell_norm(values, weight, grid: Grid, seminorm: bool = False) -> float:
    """Weighted cell norm sqrt(Σ_i |ω_i| γ_i u_i·u_i).

    With ``seminorm`` the |ω|-weighted mean of ``values`` is removed first, so
    constants have zero seminorm.

    Raises:
        InvalidArgumentError: Negative weight or mismatched sizes.
    """
    v = _as_columns(values, grid.num_cells, "cell field")
    w = _weights(weight, grid.num_cells)
    vol = grid.cell_volumes
    if seminorm:
        v = v - (vol[:, None] * v).sum(axis=0) / vol.sum()
    return float(np.sqrt((vol * w * (v**2).sum(axis=1)).sum()))


def face_distance(grid: Grid) -> np.ndarray:
    """δ_k = δ_k^i + δ_k^j, with δ_k^j = 0 on boundary faces."""
    d = grid.dist_i.copy()
    d[grid.interior_faces] += grid.dist_j[grid.interior_faces]
    return d


def face_norm(values, weight, grid: Grid) -> float:
    """Weighted face norm sqrt(Σ_k (|ζ_k| δ_k / N) γ_k ψ_k·ψ_k).

    Raises:
        InvalidArgumentError: Negative weight or mismatched sizes.
    """
    v = _as_columns(values, grid.num_faces, "face field")
    w = _weights(weight, grid.num_faces)
    measure = grid.face_areas * face_distance(grid) / grid.dim
    return float(np.sqrt((measure * w * (v**2).sum(axis=1)).sum()))


def _jump(grid: Grid, cell_values: np.ndarray) -> np.ndarray:
    """Δ*u per face with zero boundary values."""
    v = _as_columns(cell_values, grid.num_cells, "cell field")
    return build_incidence(grid).interior.T @ v


def norm_components(sol: DiscreteSolution, materials: MaterialField, grid: Grid, which: str = "elastic") -> dict:
    """Squared contributions of u, r, p (and w) to the solution norm.

    The face terms use coefficients for homogeneous Dirichlet conditions on
    every boundary face, so boundary jumps are measured against zero over the
    distance δ_k^i.
    """
    if which not in ("elastic", "poromech"):
        raise InvalidArgumentError("which must be 'elastic' or 'poromech'")
    coeffs = face_coefficients(grid, materials, BoundarySpec.dirichlet(grid))
    delta = face_distance(grid)
    mu_inv = 1.0 / materials.mu
    out = {
        "u": face_norm(_jump(grid, sol.u) / delta[:, None], coeffs.mu_bar, grid) ** 2
        + cell_norm(sol.u, materials.mu, grid) ** 2,
        "r": face_norm(_jump(grid, sol.r) / delta[:, None], coeffs.ell_bar2, grid) ** 2
        + cell_norm(sol.r, mu_inv, grid) ** 2,
        "p": cell_norm(sol.p, mu_inv, grid, seminorm=True) ** 2,
        "w": 0.0,
    }
    if which == "elastic":
        out["p"] += cell_norm(sol.p, materials.lambda_inv, grid) ** 2
    else:
        out["w"] = (
            face_norm(_jump(grid, sol.w) / delta[:, None], coeffs.kappa_bar, grid) ** 2 + cell_norm(sol.w, 1.0, grid) ** 2
        )
    return out


def solution_norm(sol: DiscreteSolution, materials: MaterialField, grid: Grid, which: str = "elastic") -> float:
    """Energy-type norm of a discrete solution.

    ``elastic``: jump and cell terms for u (weight μ) and r (weights ℓ̄², μ⁻¹),
    ‖p‖ with weight λ⁻¹ and the μ⁻¹-weighted seminorm of p. ``poromech``
    replaces the λ⁻¹ term by the κ̄-weighted jump of w plus ‖w‖.
    """
    return float(np.sqrt(sum(norm_components(sol, materials, grid, which).values())))


@dataclass(frozen=True)
class ErrorReport:
    """Relative errors; component errors share the denominator of ``total``."""

    total: float
    u: float
    r: float
    p: float
    w: float


def compute_error(
    sol: DiscreteSolution,
    exact: ExactSolution | DiscreteSolution,
    materials: MaterialField,
    grid: Grid,
    which: str = "elastic",
    align_pressure: bool | None = None,
) -> ErrorReport:
    """Relative error ‖sol - exact(x_ω)‖ / ‖exact(x_ω)‖ in :func:`solution_norm`.

    If the parameters admit a constant total-pressure mode (λ⁻¹ = 0, or an
    undrained incompressible fluid) the total pressure is only determined up
    to that mode; ``sol`` is then shifted along it so that the mean pressures
    agree before comparing. ``align_pressure`` forces or disables the shift
    (default: whenever the mode exists).

    Raises:
        InvalidArgumentError: The exact solution has zero norm.
    """
    ref = exact.sample(grid) if isinstance(exact, ExactSolution) else exact
    kernel = materials.pressure_kernel(which == "poromech")
    if align_pressure is None:
        align_pressure = kernel is not None
    if align_pressure and kernel is not None:
        vol = grid.cell_volumes
        c = (vol * (ref.p - sol.p)).sum() / vol.sum()
        sol = replace(sol, p=sol.p + c, w=sol.w + c * kernel)
    denom = solution_norm(ref, materials, grid, which)
    if denom == 0 or not math.isfinite(denom):
        raise InvalidArgumentError("exact solution has zero norm; relative error undefined")
    parts = norm_components(sol - ref, materials, grid, which)
    rel = {k: math.sqrt(v) / denom for k, v in parts.items()}
    return ErrorReport(total=math.sqrt(sum(parts.values())) / denom, **rel)


def observed_orders(errors, sizes) -> list:
    """Pairwise orders log(e_c/e_f) / log(n_f/n_c); the first entry is ``nan``."""
    out = [math.nan]
    for (e0, n0), (e1, n1) in zip(zip(errors, sizes), zip(errors[1:], sizes[1:])):
        if e0 > 0 and e1 > 0 and n1 != n0:
            out.append(math.log(e0 / e1) / math.log(n1 / n0))
        else:
            out.append(math.nan)
    return out


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One convergence study: a model, a grid family, levels and a parameter sweep.

    Attributes:
        model: ``elastic``, ``cosserat``, ``stokes`` or ``poromech``.
        grid: ``gt1``..``gt4`` or ``file:<path>`` for an imported mesh.
        levels: Refinement parameters n (cells per side).
        param_name: Swept parameter (``lambda`` is given as λ, ``inf`` allowed).
        param_values: Values of the swept parameter; by default the single
            fixed value of ``param_name``.
        bc: Robin weights per field and side, e.g. ``{"u": {"left": inf}}``;
            missing entries are Dirichlet.
        timing: Record wall times (makes output run-dependent).
    """

    model: str = "elastic"
    grid: str = "gt1"
    levels: tuple = (8, 16, 32, 64)
    param_name: str = "lambda_inv"
    param_values: tuple | None = None
    mu: float = 1.0
    lambda_inv: float = 1.0
    ell: float = 0.0
    theta: float = 0.0
    kappa: float = 1.0
    eta_w: float = 0.0
    solution: str = "elastic_stream"
    seed: int = 1
    amplitude: float = 0.3
    bc: dict = field(default_factory=dict)
    timing: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidArgumentError(f"model: unknown model {self.model!r}")
        if self.grid not in GRID_FAMILIES and not self.grid.startswith("file:"):
            raise InvalidArgumentError(f"grid: unknown grid family {self.grid!r}")
        if self.param_name not in SWEEP_PARAMS:
            raise InvalidArgumentError(f"param_name: cannot sweep {self.param_name!r}")
        if not self.levels or any(int(n) != n or n < 1 for n in self.levels):
            raise InvalidArgumentError("levels: need positive integers")
        if self.model == "stokes" and self.param_values is not None and self.param_name in ("lambda", "lambda_inv"):
            raise InvalidArgumentError("param_name: the stokes model fixes lambda_inv = 0")
        if self.model == "stokes":
            object.__setattr__(self, "lambda_inv", 0.0)
        if self.param_values is None:
            if self.param_name == "lambda":
                fixed = math.inf if self.lambda_inv == 0 else 1.0 / self.lambda_inv
            else:
                fixed = getattr(self, self.param_name)
            object.__setattr__(self, "param_values", (float(fixed),))
        if not self.param_values:
            raise InvalidArgumentError("param_values: need at least one value")
        for key, sides in self.bc.items():
            if key not in ("u", "r", "w"):
                raise InvalidArgumentError(f"bc: unknown field {key!r}")
            for side, b in sides.items():
                if side not in SIDES:
                    raise InvalidArgumentError(f"bc.{key}: unknown side {side!r}")
                if not b >= 0:
                    raise InvalidArgumentError(f"bc.{key}.{side}: Robin weight must lie in [0, inf]")
        get_solution(self.solution)
        for v in self.param_values:
            self.parameters(v)

    def parameters(self, value: float) -> dict:
        """Material parameters for one point of the sweep (validated)."""
        p = {k: getattr(self, k) for k in ("mu", "lambda_inv", "ell", "theta", "kappa", "eta_w")}
        if self.param_name == "lambda":
            if not value > 0:
                raise InvalidArgumentError("param_values: lambda must be positive")
            p["lambda_inv"] = 0.0 if math.isinf(value) else 1.0 / value
        else:
            p[self.param_name] = float(value)
        if self.model == "stokes":
            p["lambda_inv"] = 0.0
        if self.model == "elastic":
            p["ell"] = 0.0 if self.param_name != "ell" else p["ell"]
        for k, v in p.items():
            if not (math.isfinite(v) and v >= 0):
                raise InvalidArgumentError(f"{k}: must be finite and nonnegative")
        if p["mu"] <= 0:
            raise InvalidArgumentError("mu: must be positive")
        if self.model == "poromech":
            if p["theta"] * p["lambda_inv"] > 1:
                raise InvalidArgumentError("theta: theta * lambda_inv must not exceed 1")
            if p["kappa"] == 0 and p["eta_w"] + p["lambda_inv"] * p["theta"] ** 2 == 0:
                raise InvalidArgumentError("kappa: fluid subsystem degenerate (kappa = 0 and eta = 0)")
        return p


@dataclass(frozen=True)
class LevelResult:
    """One row of a convergence report."""

    model: str
    grid: str
    n: int
    delta: float
    cells: int
    param_name: str
    param_value: float
    errors: ErrorReport
    order: float
    wall_ms: float | None = None


@dataclass
class ConvergenceReport:
    """Rows ordered by parameter point, then by level (coarse to fine)."""

    rows: list
    solutions: list = field(default_factory=list)

    def series(self, param_value: float) -> list:
        return [r for r in self.rows if r.param_value == param_value]

    def headline_order(self, param_value: float) -> float:
        """Order between the two finest levels of one parameter point."""
        return self.series(param_value)[-1].order


def make_grid(family: str, n: int, seed: int = 1, amplitude: float = 0.3) -> Grid:
    """Grid of a named family: Cartesian, order-2 or order-1 perturbed, or simplicial."""
    if family == "gt1":
        return build_cartesian_grid(n, n)
    if family == "gt2":
        return perturb_grid(build_cartesian_grid(n, n), 2, amplitude, seed)
    if family == "gt3":
        return build_simplex_grid(n)
    if family == "gt4":
        return perturb_grid(build_cartesian_grid(n, n), 1, amplitude, seed)
    if family.startswith("file:"):
        from .mesh_io import read_mesh

        return read_mesh(family[len("file:") :])
    raise InvalidArgumentError(f"unknown grid family {family!r}")


def boundary_weights(grid: Grid, bc: dict) -> BoundarySpec:
    """Per-face Robin weights from a per-field, per-side specification."""
    sides = grid.boundary_sides()
    out = {}
    for key in ("u", "r", "w"):
        b = np.zeros(grid.num_boundary)
        for side, val in bc.get(key, {}).items():
            b[sides == side] = NEUMANN if math.isinf(val) else val
        out[key] = b
    if "r" not in bc:
        out["r"] = out["u"]
    return BoundarySpec.build(grid, b_u=out["u"], b_r=out["r"], b_w=out["w"])


def solve_level(config: ExperimentConfig, grid: Grid, params: dict, exact: ExactSolution):
    """Assemble and solve one level.

    Returns:
        ``(solution, materials, gauged)``; ``gauged`` tells whether a pressure
        multiplier was added.
    """
    materials = MaterialField.uniform(grid, **params)
    flow = config.model == "poromech"
    bc = exact.boundary_spec(grid, materials, boundary_weights(grid, config.bc))
    sources = evaluate_sources(exact, materials, grid)
    assemble = assemble_poromech if flow else assemble_elastic
    system = assemble(grid, materials, bc, sources)
    gauged = materials.pressure_kernel(flow) is not None and bool(np.all(bc.u.is_dirichlet))
    if gauged:
        system = handle_incompressible_limit(system, materials, bc)
    return solve(system), materials, gauged


def run_convergence(config: ExperimentConfig, keep_solutions: bool = False) -> ConvergenceReport:
    """Solve every (parameter value, level) pair and measure relative errors.

    Imported grids (``file:``) are a single level reported with n = 0.
    """
    exact = get_solution(config.solution)
    which = "poromech" if config.model == "poromech" else "elastic"
    levels = (0,) if config.grid.startswith("file:") else tuple(sorted(int(n) for n in config.levels))
    rows, sols = [], []
    grids = {}
    for value in config.param_values:
        params = config.parameters(value)
        series = []
        for n in levels:
            if n not in grids:
                grids[n] = make_grid(config.grid, n, config.seed, config.amplitude)
            grid = grids[n]
            if grid.dim != exact.dim:
                raise InvalidArgumentError("grid dimension does not match the exact solution")
            t0 = time.perf_counter()
            sol, materials, gauged = solve_level(config, grid, params, exact)
            elapsed = (time.perf_counter() - t0) * 1e3
            err = compute_error(sol, exact, materials, grid, which, align_pressure=gauged)
            series.append((n, grid, err, elapsed))
            if keep_solutions:
                sols.append((float(value), n, grid, sol))
        orders = observed_orders([s[2].total for s in series], [s[0] for s in series])
        for (n, grid, err, elapsed), order in zip(series, orders):
            rows.append(
                LevelResult(
                    model=config.model,
                    grid=config.grid,
                    n=n,
                    delta=grid.diameter,
                    cells=grid.num_cells,
                    param_name=config.param_name,
                    param_value=float(value),
                    errors=err,
                    order=order,
                    wall_ms=elapsed if config.timing else None,
                )
            )
    return ConvergenceReport(rows=rows, solutions=sols)
