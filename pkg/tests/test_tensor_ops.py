import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tpsa.errors import InvalidArgumentError
from tpsa.tensor_ops import asym, asym_adjoint, rot_coupling_2d, rot_n

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = arrays(float, 3, elements=finite)
mat3 = arrays(float, (3, 3), elements=finite)


def unit(v):
    return v / np.linalg.norm(v)


def test_asym_examples():
    np.testing.assert_array_equal(asym(np.eye(3) + np.ones((3, 3))), [0, 0, 0])
    np.testing.assert_array_equal(asym(asym_adjoint(np.array([1.0, 2.0, 3.0]))), [2, 4, 6])
    s = np.zeros((3, 3))
    s[1, 2] = 5.0
    s[2, 1] = 1.0
    # (Sσ)_1 = σ_32 - σ_23
    np.testing.assert_array_equal(asym(s), [-4.0, 0.0, 0.0])


def test_asym_adjoint_examples():
    np.testing.assert_array_equal(asym_adjoint(np.array([1.0, 2.0, 3.0])), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])
    np.testing.assert_array_equal(asym_adjoint(np.zeros(3)), np.zeros((3, 3)))
    np.testing.assert_array_equal(asym_adjoint(np.array([1.0, 0, 0])) @ [0, 1, 0], [0, 0, 1])


def test_rot_n_example():
    np.testing.assert_array_equal(rot_n(np.array([1.0, 0, 0])), [[0, 0, 0], [0, 0, -1], [0, 1, 0]])


def test_rot_coupling_2d_examples():
    np.testing.assert_array_equal(rot_coupling_2d(np.array([1.0, 0.0])), [0, -1])
    np.testing.assert_array_equal(rot_coupling_2d(np.array([0.0, 1.0])), [1, 0])


def test_shape_and_unit_checks():
    with pytest.raises(InvalidArgumentError):
        asym(np.zeros((2, 2)))
    with pytest.raises(InvalidArgumentError):
        asym_adjoint(np.zeros(2))
    with pytest.raises(InvalidArgumentError):
        rot_n(np.array([1.0, 1.0, 0.0]))
    with pytest.raises(InvalidArgumentError):
        rot_coupling_2d(np.array([0.5, 0.0]))


def test_batched_evaluation():
    rng = np.random.default_rng(1)
    s = rng.standard_normal((5, 4, 3, 3))
    out = asym(s)
    assert out.shape == (5, 4, 3)
    np.testing.assert_array_equal(out[2, 3], asym(s[2, 3]))


@settings(max_examples=200)
@given(vec3)
def test_double_adjoint(r):
    np.testing.assert_allclose(asym(asym_adjoint(r)), 2 * r, atol=1e-13 * (1 + np.abs(r).max()))


@settings(max_examples=200)
@given(mat3)
def test_adjoint_of_asym_is_skew_part(s):
    np.testing.assert_allclose(asym_adjoint(asym(s)), s - s.T, atol=1e-13 * (1 + np.abs(s).max()))


@settings(max_examples=200)
@given(vec3, vec3)
def test_adjoint_swaps(r, u):
    scale = 1 + np.abs(r).max() * np.abs(u).max()
    np.testing.assert_allclose(asym_adjoint(r) @ u, -(asym_adjoint(u) @ r), atol=1e-13 * scale)
    np.testing.assert_allclose(asym_adjoint(r) @ u, np.cross(r, u), atol=1e-13 * scale)


@settings(max_examples=200)
@given(mat3, vec3)
def test_adjoint_pairing(s, r):
    lhs = np.sum(s * asym_adjoint(r))
    rhs = asym(s) @ r
    assert abs(lhs - rhs) <= 1e-13 * (1 + np.abs(s).max() * np.abs(r).max())


@settings(max_examples=100)
@given(vec3.filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_rot_n_projection(v):
    n = unit(v)
    R = rot_n(n)
    np.testing.assert_allclose(R @ n, 0.0, atol=1e-14)
    P = -R @ R
    np.testing.assert_allclose(P @ P, P, atol=1e-14)
    np.testing.assert_allclose(P + np.outer(n, n), np.eye(3), atol=1e-14)


@settings(max_examples=100)
@given(st.floats(0, 2 * np.pi))
def test_planar_coupling_matches_embedded_rotation(angle):
    n2 = np.array([np.cos(angle), np.sin(angle)])
    c = rot_coupling_2d(n2)
    assert abs(c @ n2) <= 1e-15
    # a rotation about e3 acting through Rⁿ: Rⁿ e3 = n × e3 = (n₂, -n₁, 0)
    R = rot_n(np.array([*n2, 0.0]))
    np.testing.assert_allclose(R @ [0, 0, 1], [*c, 0.0], atol=1e-15)
    # displacement to rotation: e3 · (Rⁿ u) = (-n₂, n₁)·u
    u = np.array([0.3, -1.7])
    assert (R @ [*u, 0.0])[2] == pytest.approx(-c @ u, abs=1e-15)
