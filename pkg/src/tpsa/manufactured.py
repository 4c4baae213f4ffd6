"""Closed-form exact solutions and the source terms they induce.

Sources are obtained by symbolic differentiation (sympy) of the
conservation-form system with spatially constant material parameters:

* f^u = ∇·(2μ∇u + S*r + p I)
* f^r = ∇·(S*u + ℓ²∇r) - μ⁻¹ r
* f^p = ∇·u - λ⁻¹ p - ϑλ⁻¹ w
* f^w = -κ Δw + ϑλ⁻¹ p + η w

where in 2D the rotation is the scalar out-of-plane component.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .assembly import DiscreteSolution, SourceField
from .errors import InvalidArgumentError
from .fields import BoundarySpec, MaterialField, rotation_dim
from .geometry import Grid

PARAMS = ("mu", "lambda_inv", "ell", "theta", "kappa", "eta_w")


def _coords(dim: int):
    return sp.symbols("x y z")[:dim]


def _params():
    return sp.symbols(" ".join(PARAMS))


@dataclass(eq=False)
class ExactSolution:
    """Symbolic (u, r, p, w) with lambdified evaluators.

    Attributes:
        name: Identifier, e.g. ``elastic_stream``.
        dim: Spatial dimension.
        u, r, p, w: Sympy expressions in the coordinates ``x, y(, z)``; r has
            one component in 2D and three in 3D.
    """

    name: str
    dim: int
    u: list
    r: list
    p: sp.Expr
    w: sp.Expr
    _fn: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.u = [sp.sympify(e) for e in self.u]
        self.r = [sp.sympify(e) for e in self.r]
        self.p = sp.sympify(self.p)
        self.w = sp.sympify(self.w)
        if len(self.u) != self.dim or len(self.r) != rotation_dim(self.dim):
            raise InvalidArgumentError("component count does not match the dimension")

    # -- symbolic pieces -------------------------------------------------------

    def _symbolic(self):
        X = _coords(self.dim)
        mu, lam_inv, ell, theta, kappa, eta_w = _params()
        u, r, p, w = self.u, self.r, self.p, self.w
        grad = lambda f: [sp.diff(f, v) for v in X]  # noqa: E731
        lap = lambda f: sum(sp.diff(f, v, 2) for v in X)  # noqa: E731
        div_u = sum(sp.diff(u[a], X[a]) for a in range(self.dim))
        eta = eta_w + lam_inv * theta**2
        if self.dim == 2:
            (rr,) = r
            x, y = X
            f_u = [
                2 * mu * lap(u[0]) - sp.diff(rr, y) + sp.diff(p, x),
                2 * mu * lap(u[1]) + sp.diff(rr, x) + sp.diff(p, y),
            ]
            f_r = [sp.diff(u[0], y) - sp.diff(u[1], x) + ell**2 * lap(rr) - rr / mu]
        else:
            x, y, z = X

            def curl(v):
                return [
                    sp.diff(v[2], y) - sp.diff(v[1], z),
                    sp.diff(v[0], z) - sp.diff(v[2], x),
                    sp.diff(v[1], x) - sp.diff(v[0], y),
                ]

            cr, cu = curl(r), curl(u)
            gp = grad(p)
            f_u = [2 * mu * lap(u[a]) - cr[a] + gp[a] for a in range(3)]
            f_r = [-cu[a] + ell**2 * lap(r[a]) - r[a] / mu for a in range(3)]
        f_p = div_u - lam_inv * p - theta * lam_inv * w
        f_w = -kappa * lap(w) + theta * lam_inv * p + eta * w
        return {"f_u": f_u, "f_r": f_r, "f_p": f_p, "f_w": f_w}

    def _fluxes(self):
        """Traction σn, couple traction ℓ²∇r·n, displacement flux u·n and χ·n = -κ∇w·n."""
        X = _coords(self.dim)
        N = sp.symbols("n0:%d" % self.dim)
        mu, lam_inv, ell, theta, kappa, eta_w = _params()
        u, r, p, w = self.u, self.r, self.p, self.w
        gu = [[sp.diff(u[a], X[b]) for b in range(self.dim)] for a in range(self.dim)]
        if self.dim == 2:
            (rr,) = r
            skew = [[0, -rr], [rr, 0]]
        else:
            skew = [[0, -r[2], r[1]], [r[2], 0, -r[0]], [-r[1], r[0], 0]]
        sigma = [
            [2 * mu * gu[a][b] + skew[a][b] + (p if a == b else 0) for b in range(self.dim)]
            for a in range(self.dim)
        ]
        trac = [sum(sigma[a][b] * N[b] for b in range(self.dim)) for a in range(self.dim)]
        couple = [ell**2 * sum(sp.diff(rc, X[b]) * N[b] for b in range(self.dim)) for rc in r]
        chi = -kappa * sum(sp.diff(w, X[b]) * N[b] for b in range(self.dim))
        return {"traction": trac, "couple": couple, "chi": chi}, N

    def _lambdified(self, key):
        if key not in self._fn:
            X = _coords(self.dim)
            P = _params()
            if key == "fields":
                exprs = {"u": self.u, "r": self.r, "p": [self.p], "w": [self.w]}
                args = X
            elif key == "sources":
                exprs = self._symbolic()
                exprs = {k: (v if isinstance(v, list) else [v]) for k, v in exprs.items()}
                args = (*X, *P)
            else:
                fl, N = self._fluxes()
                exprs = {k: (v if isinstance(v, list) else [v]) for k, v in fl.items()}
                args = (*X, *N, *P)
            self._fn[key] = {
                k: [sp.lambdify(args, e, "numpy") for e in v] for k, v in exprs.items()
            }
        return self._fn[key]

    # -- numeric evaluation ----------------------------------------------------

    @staticmethod
    def _eval(fns, args, n):
        return np.column_stack([np.broadcast_to(np.asarray(f(*args), dtype=float), (n,)) for f in fns])

    def fields(self, points: np.ndarray) -> dict:
        """Exact u, r (2D arrays) and p, w (1D) at the given points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        fns = self._lambdified("fields")
        args = tuple(pts.T)
        out = {k: self._eval(v, args, n) for k, v in fns.items()}
        out["p"] = out["p"][:, 0]
        out["w"] = out["w"][:, 0]
        return out

    def sample(self, grid: Grid) -> DiscreteSolution:
        """Exact solution at the cell centers."""
        f = self.fields(grid.cell_centers)
        return DiscreteSolution(u=f["u"], r=f["r"], p=f["p"], w=f["w"])

    def source_values(self, points: np.ndarray, params: dict) -> dict:
        """Sources at points; ``params`` maps parameter names to scalars or per-point arrays."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        n = pts.shape[0]
        fns = self._lambdified("sources")
        pv = [np.broadcast_to(np.asarray(params[k], dtype=float), (n,)) for k in PARAMS]
        args = (*pts.T, *pv)
        out = {k: self._eval(v, args, n) for k, v in fns.items()}
        out["f_p"] = out["f_p"][:, 0]
        out["f_w"] = out["f_w"][:, 0]
        return out

    def boundary_spec(self, grid: Grid, materials: MaterialField, weights: BoundarySpec) -> BoundarySpec:
        """Boundary data consistent with this solution for the Robin weights in ``weights``.

        Raises:
            InvalidArgumentError: A fluid Robin weight equals κ, for which the
                condition b(χ·n - g) = κ(w - g) does not involve g.
        """
        bf = grid.boundary_faces
        nb = bf.size
        if nb == 0:
            return weights
        x = grid.face_centers[bf]
        n = grid.face_normals[bf]
        cells = grid.face_cells[bf, 0]
        params = {k: getattr(materials, k)[cells] for k in PARAMS}
        vals = self.fields(x)
        fns = self._lambdified("fluxes")
        args = (*x.T, *n.T, *[np.asarray(params[k], dtype=float) for k in PARAMS])
        trac = self._eval(fns["traction"], args, nb)
        couple = self._eval(fns["couple"], args, nb)
        chi = self._eval(fns["chi"], args, nb)[:, 0]

        def robin_data(b, flux, value, stiff):
            # Solve b (flux - g) = stiff (g - value) for g, with exact limits.
            b = b[:, None] if flux.ndim == 2 else b
            stiff = stiff[:, None] if flux.ndim == 2 else stiff
            inf = np.isinf(b)
            bf_ = np.where(inf, 0.0, b)
            den = bf_ + stiff
            with np.errstate(divide="ignore", invalid="ignore"):
                g = np.where(den > 0, (bf_ * flux + stiff * value) / np.where(den > 0, den, 1.0), value)
            return np.where(inf, flux, g)

        g_u = robin_data(weights.u.weight, trac, vals["u"], 2 * params["mu"])
        g_r = robin_data(weights.r.weight, couple, vals["r"], params["ell"] ** 2)

        bw = weights.w.weight
        kap = params["kappa"]
        inf = np.isinf(bw)
        bwf = np.where(inf, 0.0, bw)
        den = kap - bwf
        if np.any(~inf & (den == 0) & (bwf > 0)):
            raise InvalidArgumentError("fluid Robin weight equal to kappa admits no boundary data")
        with np.errstate(divide="ignore", invalid="ignore"):
            g_w = np.where(den != 0, (kap * vals["w"] - bwf * chi) / np.where(den != 0, den, 1.0), vals["w"])
        g_w = np.where(inf, chi, g_w)
        return weights.with_data(g_u=g_u, g_r=g_r, g_w=g_w)


def evaluate_sources(exact: ExactSolution, materials: MaterialField, grid: Grid) -> SourceField:
    """Midpoint (cell-center) values of the sources induced by ``exact``.

    The symbolic sources assume spatially constant parameters; per-cell values
    are substituted cell by cell.
    """
    if exact.dim != grid.dim:
        raise InvalidArgumentError("exact solution dimension does not match the grid")
    params = {k: getattr(materials, k) for k in PARAMS}
    s = exact.source_values(grid.cell_centers, params)
    return SourceField(u=s["f_u"], r=s["f_r"], p=s["f_p"], w=s["f_w"])


# ---------------------------------------------------------------------------
# Catalogue
# ---------------------------------------------------------------------------


def elastic_stream() -> ExactSolution:
    """Divergence-free stream-function displacement with vanishing pressure.

    u = (∂ψ/∂y, -∂ψ/∂x), ψ = sin²(2πx) sin²(2πy), r = x(1-x) sin(2πy), p = 0.
    """
    x, y = _coords(2)
    psi = sp.sin(2 * sp.pi * x) ** 2 * sp.sin(2 * sp.pi * y) ** 2
    u = [sp.diff(psi, y), -sp.diff(psi, x)]
    r = [x * (1 - x) * sp.sin(2 * sp.pi * y)]
    return ExactSolution("elastic_stream", 2, u, r, sp.Integer(0), sp.Integer(0))


def poromech_smooth() -> ExactSolution:
    """Smooth poromechanical solution vanishing on the unit-square boundary."""
    x, y = _coords(2)
    u = [sp.sin(sp.pi * x) * y * (1 - y), sp.sin(sp.pi * y) * x * (1 - x)]
    r = [x * (1 - x) * sp.sin(sp.pi * y)]
    p = sp.sin(sp.pi * y) * x * (1 - x)
    w = sp.sin(sp.pi * x) * y * (1 - y)
    return ExactSolution("poromech_smooth", 2, u, r, p, w)


def zero_solution(dim: int = 2) -> ExactSolution:
    return ExactSolution("zero", dim, [0] * dim, [0] * rotation_dim(dim), 0, 0)


def from_expressions(dim: int, u, r, p="0", w="0", name: str = "custom") -> ExactSolution:
    """Build an exact solution from strings or sympy expressions in x, y(, z)."""
    loc = {s.name: s for s in _coords(dim)}
    conv = lambda e: sp.sympify(e, locals=loc)  # noqa: E731
    return ExactSolution(name, dim, [conv(e) for e in u], [conv(e) for e in r], conv(p), conv(w))


SOLUTIONS = {
    "elastic_stream": elastic_stream,
    "poromech_smooth": poromech_smooth,
    "zero": zero_solution,
}


def get_solution(name: str) -> ExactSolution:
    try:
        return SOLUTIONS[name]()
    except KeyError:
        raise InvalidArgumentError(f"unknown solution {name!r}; choose from {sorted(SOLUTIONS)}") from None
