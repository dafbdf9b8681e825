import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from shadowlab.expansion import (NonSymmetricError, NotComplexError, alternative_frame, expansion_coefficient,
                                 fit_expansion, pulled_back_field, symmetry_condition,
                                 symmetry_condition_pointwise, validate_expansion, write_fit_csv, write_fit_svg,
                                 zeta_loop)
from shadowlab.hamflow import PolyHamiltonian, flow_second_derivative
from shadowlab.grassmann import GrassmannQuadrature
from shadowlab.shadowvol import BoundaryGrid
from shadowlab.symplinalg import ComplexProjector, linear_shadow_volume, random_unitary

from conftest import FIXED_S, j_interleaved

CUBIC2 = PolyHamiltonian.parse(2, "p1**2*q2")
CUBIC3 = PolyHamiltonian.parse(3, "p1**2*q3")


def test_cubic_k1_coefficient():
    # second Taylor coefficient of int 2 sqrt(1-p^2) sqrt(1+4t^2p^2) dp is int 4 p^2 sqrt(1-p^2) = pi/2
    r = expansion_coefficient(CUBIC2, np.eye(4), ComplexProjector.coordinate(2, 1))
    assert r.C == pytest.approx(math.pi / 2, rel=1e-12)
    assert r.omega == pytest.approx(math.pi)
    assert not r.symmetry_flag


def test_cubic_k2_coefficient():
    # (8 pi / 3) int p^2 (1-p^2)^{3/2} dp = pi^2 / 6
    r = expansion_coefficient(CUBIC3, np.eye(6), ComplexProjector.coordinate(3, 2))
    assert r.C == pytest.approx(math.pi**2 / 6, rel=1e-10)
    assert r.min_gap >= -1e-12


def test_zero_hamiltonian():
    r = expansion_coefficient(PolyHamiltonian.zero(2), np.eye(4), ComplexProjector.coordinate(2, 1))
    assert r.C == 0.0 and r.symmetry_flag


def test_quadratic_against_linear_shadow():
    # for quadratic H the flow is expm(t J S), so f(t) is a linear shadow volume
    S = FIXED_S
    H = PolyHamiltonian.quadratic(S)
    P = ComplexProjector.coordinate(2, 1)
    r = expansion_coefficient(H, np.eye(4), P)
    t = 1e-3
    f = linear_shadow_volume(expm(t * j_interleaved(2) @ S), P).volume
    assert (f - math.pi) / t**2 == pytest.approx(r.C, rel=1e-2)
    assert r.C > 0 and not r.symmetry_flag


def test_symmetric_quadratic():
    H = PolyHamiltonian.parse(2, "0.5*(p1**2 + q1**2) + 0.3*(p2**2 + q2**2) + 0.2*(p1*p2 + q1*q2)")
    P = ComplexProjector.coordinate(2, 1)
    r = expansion_coefficient(H, np.eye(4), P)
    assert r.symmetry_flag
    assert abs(r.C) <= r.C_error


@given(st.integers(0, 2**31 - 1))
def test_coefficient_nonnegative_and_frame_invariant(seed):
    H = PolyHamiltonian.parse(3, "p1**2*q3 + 0.4*q1*p2*q3 + 0.3*p3**2*q2 + 0.2*q1**3")
    Phi = random_unitary(3, seed=seed)
    P = ComplexProjector.coordinate(3, 2)
    r = expansion_coefficient(H, Phi, P)
    assert r.C >= -r.C_error and r.min_gap >= -1e-9
    alt = expansion_coefficient(H, Phi, P, frame=alternative_frame(Phi, P, seed=seed))
    assert alt.C == pytest.approx(r.C, rel=1e-6, abs=1e-9)


def test_mc_quadrature_error_covers_hopf_value():
    P = ComplexProjector.coordinate(3, 2)
    hopf = expansion_coefficient(CUBIC3, np.eye(6), P)
    q = GrassmannQuadrature(P.basis, scheme="mc", count=20000, seed=3)
    mc = expansion_coefficient(CUBIC3, np.eye(6), P, q=q)
    assert abs(mc.C - hopf.C) < 5 * mc.C_error


def test_zeta_loop_membership():
    P = ComplexProjector.coordinate(2, 1)
    with pytest.raises(ValueError):
        zeta_loop(CUBIC2, np.eye(4), P, np.array([0.0, 0.0, 1.0, 0.0]))
    z = zeta_loop(CUBIC2, np.eye(4), P, np.array([1.0, 0.0, 0.0, 0.0]), N=32)
    # Z lands in V^perp
    assert np.max(np.abs(z.samples[:, :2])) < 1e-14


def test_pulled_back_field_vanishes_on_v_for_v_field():
    Z = pulled_back_field(PolyHamiltonian.parse(2, "p1**3"), np.eye(4), ComplexProjector.coordinate(2, 1))
    assert np.allclose(Z(np.random.default_rng(0).standard_normal((5, 4))), 0.0)


def test_requires_complex_preimage():
    Phi = expm(0.7 * j_interleaved(2) @ FIXED_S)
    with pytest.raises(NotComplexError):
        expansion_coefficient(CUBIC2, Phi, ComplexProjector.coordinate(2, 1))


def test_pointwise_condition_matches_field_condition():
    P = ComplexProjector.coordinate(2, 1)
    for H, expected in [(CUBIC2, False), (PolyHamiltonian.parse(2, "p1**2 + q1**2 + p2*p1 + q2*q1"), True)]:
        T = flow_second_derivative(H, np.zeros(4), 1e-3)
        D0 = np.eye(4)
        assert symmetry_condition(H, np.eye(4), P) == expected
        assert symmetry_condition_pointwise(np.asarray(T), D0, P, tol=1e-12) == expected


def test_pointwise_rejects_nonsymmetric_tensor():
    T = np.zeros((4, 4, 4))
    T[2, 0, 1] = 1.0
    with pytest.raises(NonSymmetricError):
        symmetry_condition_pointwise(T, np.eye(4), ComplexProjector.coordinate(2, 1))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.5, 4.0))
def test_fit_recovers_synthetic_coefficients(c2, c3, w):
    t = np.linspace(0.01, 0.08, 8)
    f = w + c2 * t**2 + c3 * t**3
    fit = fit_expansion(t, f, w)
    assert fit["c2"] == pytest.approx(c2, abs=1e-8)
    assert fit["c3"] == pytest.approx(c3, abs=1e-6)
    assert abs(fit["c1"]) < 1e-8 and fit["c0"] == pytest.approx(w, abs=1e-10)


def test_validate_expansion_k1(tmp_path):
    P = ComplexProjector.coordinate(2, 1)
    r = validate_expansion(CUBIC2, np.eye(4), P, grid=BoundaryGrid.circle(64))
    assert r.relative_fit_error < 0.05
    assert abs(r.fit_constant - math.pi) < 1e-5
    assert abs(r.fit_linear) < 1e-4
    d = json.loads(r.to_json())
    assert list(d) == sorted(d)
    write_fit_csv(tmp_path / "fit.csv", r)
    write_fit_svg(tmp_path / "fit.svg", r)
    assert (tmp_path / "fit.csv").read_text().count("\n") == 9
    assert (tmp_path / "fit.svg").read_text().startswith("<svg")


def test_validate_rejects_large_times():
    with pytest.raises(ValueError):
        validate_expansion(CUBIC2, np.eye(4), ComplexProjector.coordinate(2, 1), t_grid=[0.1, 0.2, 0.3, 0.4])
