"""Sparse direct solution of the assembled block systems."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .assembly import BlockSystem, DiscreteSolution
from .errors import InvalidArgumentError, SingularSystemError, SolverError

RESIDUAL_TOL = 1e-10
# Pivots smaller than this fraction of the largest pivot flag rank deficiency.
PIVOT_TOL = 1e3 * np.finfo(float).eps


def solve_matrix(A: sps.spmatrix, b: np.ndarray, *, refine_steps: int = 3) -> np.ndarray:
    """Solve ``A x = b`` by LU with partial pivoting and iterative refinement.

    Raises:
        SingularSystemError: The factorization hits a zero or negligible pivot.
        SolverError: The relative residual stays above ``RESIDUAL_TOL``.
    """
    A = sps.csc_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.size:
        raise InvalidArgumentError("system must be square and match the right-hand side")
    if not np.all(np.isfinite(A.data)) or not np.all(np.isfinite(b)):
        raise InvalidArgumentError("system contains non-finite entries")
    empty = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty.size:
        raise SingularSystemError(f"matrix column {empty[0]} is empty", location=int(empty[0]))
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise SingularSystemError(f"factorization failed: {exc}") from exc
    piv = np.abs(lu.U.diagonal())
    if piv.size and piv.min() <= PIVOT_TOL * piv.max():
        k = int(np.argmin(piv))
        col = int(lu.perm_c[k])
        raise SingularSystemError(
            f"numerically singular matrix: pivot ratio {piv.min() / piv.max():.2e} at unknown {col}",
            location=col,
        )
    x = lu.solve(b)
    bnorm = np.linalg.norm(b)
    scale = bnorm if bnorm > 0 else 1.0
    for _ in range(refine_steps):
        res = b - A @ x
        if np.linalg.norm(res) <= RESIDUAL_TOL * scale * 1e-2:
            break
        x = x + lu.solve(res)
    rel = np.linalg.norm(b - A @ x) / scale
    if not np.isfinite(rel) or rel > RESIDUAL_TOL:
        raise SolverError(f"relative residual {rel:.2e} exceeds {RESIDUAL_TOL:.0e}")
    return x


def solve(system: BlockSystem) -> DiscreteSolution:
    """Solve an assembled system and unpack the cell fields."""
    x = solve_matrix(system.matrix, system.rhs)
    return DiscreteSolution.from_vector(system.layout, x)
