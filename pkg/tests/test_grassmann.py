import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shadowlab.grassmann import (GrassmannQuadrature, PhaseInvarianceError, fubini_study_volume,
                                 hopf_fiber_check, hopf_map_coordinates, integrate_over_lines, primitive_form)
from shadowlab.symplinalg import ComplexProjector, FormsContext, to_complex


def _power(xi, j=0):
    return np.abs(to_complex(xi)[..., j]) ** 2


def test_total_volume():
    assert fubini_study_volume(1) == 1.0
    assert fubini_study_volume(2) == pytest.approx(math.pi)
    assert fubini_study_volume(3) == pytest.approx(math.pi**2 / 2)


def test_hopf_coordinates_lie_on_sphere():
    a, b, c = np.meshgrid(np.linspace(0, 1.5, 5), np.linspace(0, 6, 5), np.linspace(0, 6, 5))
    x = hopf_map_coordinates(a, b, c)
    assert np.allclose(np.linalg.norm(x, axis=-1), 1.0)


@pytest.mark.parametrize("scheme", ["hopf", "mc"])
def test_moments_k2(scheme):
    # for unit xi uniform on S^3: E|c1|^2 = 1/2, E|c1|^4 = 1/3
    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme=scheme, grid=(32, 1, 32), count=40000)
    one = integrate_over_lines(q, lambda xi: np.ones(len(xi)))
    m2 = integrate_over_lines(q, _power)
    m4 = integrate_over_lines(q, lambda xi: _power(xi) ** 2)
    tol = 1e-12 if scheme == "hopf" else 5 * max(m4.error, m2.error)
    assert one.value == pytest.approx(math.pi, abs=1e-12)
    assert m2.value == pytest.approx(math.pi / 2, abs=tol)
    assert m4.value == pytest.approx(math.pi / 3, abs=tol)


def test_mc_k3_moment():
    q = GrassmannQuadrature(ComplexProjector.coordinate(3, 3).basis, count=50000, seed=2)
    r = integrate_over_lines(q, _power)
    assert abs(r.value - fubini_study_volume(3) / 3) < 5 * r.error


def test_point_scheme_k1():
    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 1).basis)
    r = integrate_over_lines(q, lambda xi: 2.0 + 0 * xi[:, 0])
    assert r.value == 2.0 and r.nodes == 1


def test_phase_violation_raises():
    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme="hopf", grid=(8, 1, 8))
    with pytest.raises(PhaseInvarianceError):
        integrate_over_lines(q, lambda xi: xi[:, 0])


def test_rejects_real_subspace():
    with pytest.raises(ValueError):
        GrassmannQuadrature(np.eye(4)[:, [0, 2]])


def test_hopf_identity_primitive():
    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme="hopf", grid=(32, 32, 32))
    c = hopf_fiber_check(FormsContext(2, 2), primitive_form, q)
    assert c.lhs == pytest.approx(math.pi**2, rel=1e-10)
    assert c.rhs == pytest.approx(math.pi**2, rel=1e-10)


def test_hopf_identity_k1():
    q = GrassmannQuadrature(ComplexProjector.coordinate(1, 1).basis)
    c = hopf_fiber_check(FormsContext(1, 1), primitive_form, q)
    assert c.lhs == pytest.approx(math.pi) and c.rhs == pytest.approx(math.pi)


def test_wrong_normalization_off_by_pi():
    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme="hopf", grid=(16, 16, 16),
                            total_volume=1.0)
    c = hopf_fiber_check(FormsContext(2, 2), primitive_form, q)
    assert c.lhs / c.rhs == pytest.approx(math.pi, rel=1e-8)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_hopf_identity_closed_polynomial_perturbations(coef):
    # adding an exact form dg leaves both sides unchanged
    a, b, c, d = coef

    def eta(y):
        out = primitive_form(y)
        p1, q1, p2, q2 = np.moveaxis(y, -1, 0)
        out = out + np.stack([a * q1 + 2 * c * p1 * q2, a * p1, d + 0 * p1, b * 3 * q2**2 + c * p1**2], -1)
        return out

    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme="hopf", grid=(16, 16, 16))
    chk = hopf_fiber_check(FormsContext(2, 2), eta, q)
    assert chk.lhs == pytest.approx(math.pi**2, rel=1e-8)
    assert chk.gap < 1e-8
