import numpy as np
import pytest
import scipy.sparse as sps

from tpsa.assembly import (
    DiscreteSolution,
    SourceField,
    assemble_elastic,
    assemble_poromech,
    handle_incompressible_limit,
)
from tpsa.errors import InvalidArgumentError, NonDegeneracyError, SingularSystemError
from tpsa.fields import NEUMANN, BoundarySpec, MaterialField
from tpsa.geometry import build_cartesian_grid, perturb_grid
from tpsa.solver import RESIDUAL_TOL, solve, solve_matrix


def random_sources(grid, rng):
    nc = grid.num_cells
    return SourceField(
        u=rng.standard_normal((nc, grid.dim)),
        r=rng.standard_normal((nc, 1)),
        p=rng.standard_normal(nc),
        w=rng.standard_normal(nc),
    )


def rel_residual(system, sol):
    x = sol.to_vector(system.layout)
    return np.linalg.norm(system.matrix @ x - system.rhs) / np.linalg.norm(system.rhs)


def test_single_cell_zero_data():
    g = build_cartesian_grid(1, 1)
    m = MaterialField.uniform(g, mu=1.0, lambda_inv=1.0)
    sol = solve(assemble_elastic(g, m, BoundarySpec.dirichlet(g)))
    assert not (sol.u.any() or sol.r.any() or sol.p.any())


@pytest.mark.parametrize("seed", [0, 1])
def test_off_diagonal_blocks_are_adjoint(seed):
    g = build_cartesian_grid(2, 2) if seed == 0 else perturb_grid(build_cartesian_grid(5, 5), 1, 0.3, seed)
    rng = np.random.default_rng(seed)
    m = MaterialField.uniform(g, mu=rng.uniform(0.5, 3, g.num_cells), ell=0.2)
    s = assemble_elastic(g, m, BoundarySpec.dirichlet(g))
    scale = abs(s.matrix).max()
    assert abs(s.block("u", "p") + s.block("p", "u").T).max() <= 1e-13 * scale
    assert abs(s.block("u", "r") - s.block("r", "u").T).max() <= 1e-13 * scale


def test_cartesian_stencil_width():
    g = build_cartesian_grid(5, 5)
    s = assemble_elastic(g, MaterialField.uniform(g, ell=1.0), BoundarySpec.dirichlet(g))
    A = s.matrix.tocsr()
    nc = g.num_cells
    cell_of = np.arange(A.shape[1]) % nc
    for row in range(A.shape[0]):
        cols = A.indices[A.indptr[row] : A.indptr[row + 1]]
        assert np.unique(cell_of[cols]).size <= 5


def test_mass_terms():
    g = build_cartesian_grid(3, 3)
    mu = np.linspace(1.0, 2.0, 9)
    m = MaterialField.uniform(g, mu=mu, lambda_inv=0.5)
    # remove the flux part by comparing against a zero-flux reference: the
    # r and p diagonal carry -|ω|/μ and -|ω|λ⁻¹ on top of the flux terms
    s = assemble_elastic(g, m, BoundarySpec.dirichlet(g))
    s0 = assemble_elastic(g, MaterialField.uniform(g, mu=mu, lambda_inv=0.0), BoundarySpec.dirichlet(g))
    dp = (s.block("p", "p") - s0.block("p", "p")).diagonal()
    np.testing.assert_allclose(dp, -g.cell_volumes * 0.5)


def test_constant_pressure_is_in_the_kernel_when_incompressible():
    g = perturb_grid(build_cartesian_grid(4, 4), 2, 0.3, 1)
    m = MaterialField.uniform(g, mu=np.linspace(1, 4, 16), lambda_inv=0.0)
    s = assemble_elastic(g, m, BoundarySpec.dirichlet(g))
    x = s.layout.join(np.zeros((16, 2)), np.zeros((16, 1)), np.ones(16))
    assert np.abs(s.matrix @ x).max() <= 1e-12 * abs(s.matrix).max()


def test_gauge_restores_solvability():
    g = build_cartesian_grid(4, 4)
    m = MaterialField.uniform(g, lambda_inv=0.0)
    bc = BoundarySpec.dirichlet(g)
    s = handle_incompressible_limit(assemble_elastic(g, m, bc), m, bc)
    assert s.layout.gauge and s.matrix.shape[0] == s.layout.size
    sol = solve(s)
    assert np.abs(sol.to_vector(s.layout)).max() <= 1e-12
    rng = np.random.default_rng(4)
    s = handle_incompressible_limit(assemble_elastic(g, m, bc, random_sources(g, rng)), m, bc)
    sol = solve(s)
    assert abs((g.cell_volumes * sol.p).sum()) <= 1e-12
    with pytest.raises(InvalidArgumentError):
        handle_incompressible_limit(s, m, bc)


def test_gauge_requires_a_pressure_mode():
    g = build_cartesian_grid(3, 3)
    m = MaterialField.uniform(g, lambda_inv=1.0)
    bc = BoundarySpec.dirichlet(g)
    with pytest.raises(InvalidArgumentError):
        handle_incompressible_limit(assemble_elastic(g, m, bc), m, bc)
    m0 = MaterialField.uniform(g, lambda_inv=0.0)
    mixed = BoundarySpec.build(g, b_u=np.where(g.boundary_sides() == "top", NEUMANN, 0.0))
    with pytest.raises(InvalidArgumentError):
        handle_incompressible_limit(assemble_elastic(g, m0, mixed), m0, mixed)


def test_pure_neumann_is_rejected():
    g = build_cartesian_grid(3, 3)
    bc = BoundarySpec.build(g, b_u=NEUMANN)
    with pytest.raises(SingularSystemError):
        assemble_elastic(g, MaterialField.uniform(g), bc)


def test_size_mismatch_is_rejected():
    g = build_cartesian_grid(3, 3)
    other = build_cartesian_grid(2, 2)
    with pytest.raises(InvalidArgumentError):
        assemble_elastic(g, MaterialField.uniform(other), BoundarySpec.dirichlet(g))


def test_poromech_coupling_signs():
    g = build_cartesian_grid(2, 2)
    m = MaterialField.uniform(g, lambda_inv=1.0, theta=1.0, kappa=1.0)
    s = assemble_poromech(g, m, BoundarySpec.dirichlet(g))
    np.testing.assert_allclose(s.block("p", "w").toarray(), -np.diag(g.cell_volumes))
    np.testing.assert_allclose(s.block("w", "p").toarray(), np.diag(g.cell_volumes))


def test_poromech_decouples_without_biot_coupling():
    g = perturb_grid(build_cartesian_grid(4, 4), 1, 0.3, 1)
    m = MaterialField.uniform(g, lambda_inv=1.0, theta=0.0, kappa=0.8, eta_w=0.3)
    s = assemble_poromech(g, m, BoundarySpec.dirichlet(g))
    for a, b in (("p", "w"), ("w", "p"), ("u", "w"), ("w", "u"), ("r", "w")):
        assert s.block(a, b).nnz == 0
    e = assemble_elastic(g, m, BoundarySpec.dirichlet(g))
    assert abs(s.block("u", "u") - e.block("u", "u")).max() == 0
    # fluid block: two-point Laplacian plus |ω|η, rows summing to the
    # boundary transmissibility
    Aw = s.block("w", "w").toarray()
    np.testing.assert_allclose(Aw, Aw.T, atol=1e-14)
    assert np.all(np.diag(Aw) > 0)


def test_undrained_system_is_solvable():
    g = build_cartesian_grid(4, 4)
    m = MaterialField.uniform(g, lambda_inv=1.0, theta=1.0, kappa=0.0, eta_w=1.0)
    s = assemble_poromech(g, m, BoundarySpec.dirichlet(g), random_sources(g, np.random.default_rng(2)))
    np.testing.assert_allclose(s.block("w", "w").diagonal(), g.cell_volumes * m.eta)
    assert rel_residual(s, solve(s)) <= RESIDUAL_TOL


def test_degenerate_fluid_is_rejected():
    g = build_cartesian_grid(3, 3)
    m = MaterialField.uniform(g, lambda_inv=0.0, theta=1.0, kappa=0.0, eta_w=0.0)
    with pytest.raises(NonDegeneracyError):
        assemble_poromech(g, m, BoundarySpec.dirichlet(g))


def test_solution_vector_round_trip():
    g = build_cartesian_grid(3, 2)
    s = assemble_poromech(g, MaterialField.uniform(g, theta=0.5), BoundarySpec.dirichlet(g))
    x = np.random.default_rng(0).standard_normal(s.layout.size)
    sol = DiscreteSolution.from_vector(s.layout, x)
    assert sol.u.shape == (6, 2) and sol.r.shape == (6, 1)
    np.testing.assert_array_equal(sol.to_vector(s.layout), x)


def test_solver_identity_and_residual():
    b = np.arange(5.0)
    np.testing.assert_array_equal(solve_matrix(sps.identity(5, format="csr"), b), b)
    g = build_cartesian_grid(2, 2)
    s = assemble_elastic(g, MaterialField.uniform(g), BoundarySpec.dirichlet(g), random_sources(g, np.random.default_rng(0)))
    assert rel_residual(s, solve(s)) <= RESIDUAL_TOL


def test_solver_reports_singular_matrix():
    A = sps.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularSystemError):
        solve_matrix(A, np.ones(2))


def test_incompressible_system_without_gauge_is_singular():
    g = build_cartesian_grid(4, 4)
    m = MaterialField.uniform(g, lambda_inv=0.0)
    s = assemble_elastic(g, m, BoundarySpec.dirichlet(g), random_sources(g, np.random.default_rng(1)))
    with pytest.raises(SingularSystemError):
        solve(s)


def test_solve_is_deterministic():
    g = perturb_grid(build_cartesian_grid(6, 6), 1, 0.3, 1)
    m = MaterialField.uniform(g, ell=0.1, theta=1.0, kappa=1e-2)
    s = assemble_poromech(g, m, BoundarySpec.dirichlet(g), random_sources(g, np.random.default_rng(9)))
    a, b = solve(s), solve(s)
    np.testing.assert_array_equal(a.to_vector(s.layout), b.to_vector(s.layout))
