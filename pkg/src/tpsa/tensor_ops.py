"""Asymmetry operator S, its adjoint S*, and the face rotation couplings.

All functions accept stacked inputs (leading batch axes) so that per-face
quantities can be evaluated in one call.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError

_UNIT_TOL = 1e-12


def asym(sigma: np.ndarray) -> np.ndarray:
    """S σ with (Sσ)_i = σ_{i-1,i+1} - σ_{i+1,i-1} (indices mod 3)."""
    s = np.asarray(sigma, dtype=float)
    if s.shape[-2:] != (3, 3):
        raise InvalidArgumentError("asym expects 3x3 matrices")
    return np.stack(
        [
            s[..., 2, 1] - s[..., 1, 2],
            s[..., 0, 2] - s[..., 2, 0],
            s[..., 1, 0] - s[..., 0, 1],
        ],
        axis=-1,
    )


def asym_adjoint(r: np.ndarray) -> np.ndarray:
    """S* r, the skew matrix with (S*r)u = r × u."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise InvalidArgumentError("asym_adjoint expects 3-vectors")
    z = np.zeros(r.shape[:-1])
    r1, r2, r3 = r[..., 0], r[..., 1], r[..., 2]
    return np.stack(
        [
            np.stack([z, -r3, r2], axis=-1),
            np.stack([r3, z, -r1], axis=-1),
            np.stack([-r2, r1, z], axis=-1),
        ],
        axis=-2,
    )


def _check_unit(n: np.ndarray, size: int) -> None:
    if n.shape[-1] != size:
        raise InvalidArgumentError(f"normal must be a {size}-vector")
    if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > _UNIT_TOL):
        raise InvalidArgumentError("normal must have unit length")


def rot_n(n: np.ndarray) -> np.ndarray:
    """Face rotation matrix Rⁿ = S* n."""
    n = np.asarray(n, dtype=float)
    _check_unit(n, 3)
    return asym_adjoint(n)


def rot_coupling_2d(n: np.ndarray) -> np.ndarray:
    """Planar reduction of Rⁿ acting on a scalar rotation: (n₂, -n₁).

    The transposed coupling from displacement to rotation is the negative,
    ``-(n₂, -n₁) = (-n₂, n₁)``.
    """
    n = np.asarray(n, dtype=float)
    _check_unit(n, 2)
    return np.stack([n[..., 1], -n[..., 0]], axis=-1)
