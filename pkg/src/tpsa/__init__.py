"""Two-point stress approximation (TPSA) finite volumes for elasticity,
Cosserat media, Stokes flow and Biot poromechanics."""

from .assembly import (
    BlockSystem,
    DiscreteSolution,
    DofLayout,
    SourceField,
    assemble_elastic,
    assemble_poromech,
    handle_incompressible_limit,
)
from .discretization import (
    FaceCoefficients,
    face_coefficients,
    face_displacement,
    face_fluxes,
    recover_couple_stress,
    tpfa_stencil,
    tpsa_boundary_stencil,
    tpsa_internal_stencil,
)
from .errors import (
    DegenerateGridError,
    InvalidArgumentError,
    MeshFormatError,
    NonDegeneracyError,
    SingularSystemError,
    SolverError,
    TpsaError,
)
from .fields import DIRICHLET, NEUMANN, BoundarySpec, FieldBC, MaterialField
from .geometry import (
    Grid,
    build_averaging,
    build_cartesian_grid,
    build_incidence,
    build_simplex_grid,
    check_admissibility,
    check_face_orthogonality,
    grid_from_cells,
    perturb_grid,
)
from .manufactured import ExactSolution, evaluate_sources, from_expressions, get_solution
from .mesh_io import read_mesh, write_mesh
from .solver import solve, solve_matrix
from .tensor_ops import asym, asym_adjoint, rot_coupling_2d, rot_n
from .verification import (
    ConvergenceReport,
    ExperimentConfig,
    cell_norm,
    compute_error,
    face_norm,
    make_grid,
    run_convergence,
    solution_norm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
