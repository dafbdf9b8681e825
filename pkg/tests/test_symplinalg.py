import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.symplinalg import (ComplexProjector, DependentVectorsError, FormsContext, NotSymplecticError,
                                  SympLinearMap, apply_j, ball_volume, complex_basis, is_complex_subspace,
                                  j_matrix, linear_shadow_volume, omega, random_symplectic, random_unitary,
                                  section_volume, symplectic_defect, wedge_norm, wirtinger_check)

from conftest import j_interleaved

# frozen from a Gram-determinant oracle (pi sqrt det(A A^T), pi / sqrt det(C^T C))
SHADOW_FIXED = 3.1423320993450337
SECTION_FIXED = 3.140853381839086


def test_ball_volume():
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(4) == pytest.approx(math.pi**2 / 2)
    assert ball_volume(6) == pytest.approx(math.pi**3 / 6)


def test_j_conventions():
    J = j_matrix(2)
    assert np.array_equal(J, j_interleaved(2))
    v = np.array([1.0, 2.0, 3.0, 4.0])
    assert np.allclose(apply_j(v), [-2.0, 1.0, -4.0, 3.0])
    assert omega(np.array([1.0, 0, 0, 0]), np.array([0, 1.0, 0, 0])) == pytest.approx(1.0)


def test_identity_volume_is_ball():
    for n, k in [(1, 1), (2, 1), (3, 2), (4, 4)]:
        r = linear_shadow_volume(SympLinearMap.identity(n), ComplexProjector.coordinate(n, k))
        assert r.volume == pytest.approx(ball_volume(2 * k), rel=1e-14)
        assert r.equality and r.volume_equality


def test_diag_example():
    M = np.diag([2.0, 0.5, 1.0, 1.0])
    r = linear_shadow_volume(SympLinearMap(M), ComplexProjector.coordinate(2, 1))
    assert r.volume == pytest.approx(math.pi, rel=1e-14)
    assert r.equality


def test_fixed_matrix_against_frozen_oracle(fixed_symplectic):
    Phi = SympLinearMap(fixed_symplectic)
    P = ComplexProjector.coordinate(2, 1)
    assert linear_shadow_volume(Phi, P).volume == pytest.approx(SHADOW_FIXED, rel=1e-12)
    assert section_volume(Phi, P).volume == pytest.approx(SECTION_FIXED, rel=1e-12)
    assert not linear_shadow_volume(Phi, P).equality


def test_rejects_non_symplectic():
    with pytest.raises(NotSymplecticError):
        SympLinearMap(np.diag([2.0, 1.0, 1.0, 1.0]))


@given(st.integers(1, 4), st.data(), st.integers(0, 2**31 - 1), st.floats(0.05, 1.5))
def test_shadow_lower_bound_and_section_upper_bound(n, data, seed, scale):
    k = data.draw(st.integers(1, n))
    Phi = random_symplectic(n, seed=seed, scale=scale)
    P = ComplexProjector.random(n, k, seed=seed + 1)
    w = ball_volume(2 * k)
    shadow = linear_shadow_volume(Phi, P)
    assert shadow.volume >= w * (1 - 1e-10)
    assert shadow.equality == is_complex_subspace((Phi.M.T @ P.basis).T)
    assert section_volume(Phi, P).volume <= w * (1 + 1e-10)


@given(st.integers(1, 4), st.data(), st.integers(0, 2**31 - 1))
def test_unitary_maps_attain_equality(n, data, seed):
    k = data.draw(st.integers(1, n))
    U = random_unitary(n, seed=seed)
    assert symplectic_defect(U.M) < 1e-12
    r = linear_shadow_volume(U, ComplexProjector.random(n, k, seed=seed))
    assert r.equality and r.volume_equality


@given(st.integers(0, 2**31 - 1))
def test_inverse(seed):
    Phi = random_symplectic(3, seed=seed)
    assert np.allclose(Phi.inverse_matrix() @ Phi.M, np.eye(6), atol=1e-10)


def test_complex_basis_is_complex_and_orthonormal():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((2, 6))
    B = complex_basis(np.concatenate([v, apply_j(v)]))
    assert np.allclose(B.T @ B, np.eye(B.shape[1]), atol=1e-12)
    assert is_complex_subspace(B.T)
    assert np.allclose(apply_j(B[:, 0]), B[:, 1])


def test_wirtinger_k1_closed_form():
    ctx = FormsContext(2, 1)
    for th in np.linspace(0.1, 1.4, 7):
        u = np.array([1.0, 0, 0, 0])
        v = np.array([0, math.cos(th), math.sin(th), 0])
        r = wirtinger_check(ctx, np.stack([u, v]))
        assert r.lhs == pytest.approx(math.cos(th), abs=1e-14)
        assert r.rhs == pytest.approx(1.0, abs=1e-14)


@given(st.integers(1, 3), st.data(), st.integers(0, 2**31 - 1))
def test_wirtinger_inequality(n, data, seed):
    k = data.draw(st.integers(1, n))
    U = np.random.default_rng(seed).standard_normal((2 * k, 2 * n))
    r = wirtinger_check(FormsContext(n, k), U)
    assert r.lhs <= r.rhs * (1 + 1e-10) + 1e-12


@given(st.integers(1, 3), st.data(), st.integers(0, 2**31 - 1))
def test_wirtinger_equality_on_complex_spans(n, data, seed):
    k = data.draw(st.integers(1, n))
    rng = np.random.default_rng(seed)
    base = rng.standard_normal((k, 2 * n))
    U = rng.standard_normal((2 * k, 2 * k)) @ np.concatenate([base, apply_j(base)])
    r = wirtinger_check(FormsContext(n, k), U)
    assert abs(r.lhs - r.rhs) <= 1e-9 * max(1.0, r.rhs)
    assert r.span_complex


def test_wirtinger_rejects_dependent():
    with pytest.raises(DependentVectorsError):
        wirtinger_check(FormsContext(2, 1), np.array([[1.0, 0, 0, 0], [2.0, 0, 0, 0]]))


def test_wedge_norm_orthonormal():
    assert wedge_norm(np.eye(4)[:3]) == pytest.approx(1.0)


def test_complex_basis_rejects_real_span():
    with pytest.raises(ValueError):
        complex_basis(np.random.default_rng(1).standard_normal((2, 6)))
