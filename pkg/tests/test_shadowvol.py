import math

import numpy as np
import pytest

from shadowlab.hamflow import PolyHamiltonian
from shadowlab.shadowvol import (BoundaryGrid, NotComplexError, ShadowProblem, mc_shadow_volume,
                                 self_intersections, shadow_volume_curve, solve_boundary, write_f_table)
from shadowlab.symplinalg import ComplexProjector, SympLinearMap, random_symplectic, random_unitary

from conftest import FIXED_S, j_interleaved

# f(t) for p1^2 q2 (n=2, k=1) and p1^2 q3 (n=3, k=2), frozen from adaptive quadrature of the
# one-dimensional closed forms int 2 sqrt(1-p^2) sqrt(1+4t^2p^2) and int 4pi/3 (1-p^2)^1.5 sqrt(1+4t^2p^2)
F_K1 = {0.02: 3.1422208465195935, 0.05: 3.1455147509413064, 0.1: 3.1572230419610188}
F_K2 = {0.02: 4.935460075514829, 0.05: 4.938910690000884, 0.1: 4.951190464198853}

CUBIC2 = PolyHamiltonian.parse(2, "p1**2*q2")
CUBIC3 = PolyHamiltonian.parse(3, "p1**2*q3")
MIXED = PolyHamiltonian.parse(2, "p1**2*q2 + 0.5*q1**2*p2 + 0.3*p1*q1*q2 + 0.2*p2**3")


def test_k1_matches_frozen_oracle():
    ts = sorted(F_K1) + [-0.05, 0.0]
    vols = shadow_volume_curve(CUBIC2, np.eye(4), ComplexProjector.coordinate(2, 1), ts)
    for t, v in zip(ts, vols):
        expected = math.pi if t == 0 else F_K1[abs(t)]
        assert v.volume == pytest.approx(expected, abs=1e-9)
        assert v.self_intersections == 0
        assert v.boundary.all_converged


def test_k2_matches_frozen_oracle():
    ts = [0.02, 0.05]
    vols = shadow_volume_curve(CUBIC3, np.eye(6), ComplexProjector.coordinate(3, 2), ts,
                               grid=BoundaryGrid.hopf((8, 16, 16)))
    for t, v in zip(ts, vols):
        assert v.volume == pytest.approx(F_K2[t], rel=1e-7)


def test_zero_hamiltonian_linear_volume():
    P = ComplexProjector.coordinate(2, 1)
    U = random_unitary(2, seed=2)
    v = shadow_volume_curve(PolyHamiltonian.zero(2), U, P, [0.05])[0]
    assert v.volume == pytest.approx(math.pi, abs=1e-10)


def test_boundary_points_satisfy_equations():
    P = ComplexProjector.coordinate(2, 1)
    b = solve_boundary(MIXED, random_unitary(2, seed=1), P, 0.05, grid=BoundaryGrid.circle(64))
    assert b.all_converged
    assert np.max(b.sphere_residuals) < 1e-10
    assert np.max(b.residuals) < 1e-9


def test_requires_complex_preimage():
    from scipy.linalg import expm

    Phi = expm(0.7 * j_interleaved(2) @ FIXED_S)
    with pytest.raises(NotComplexError):
        ShadowProblem(MIXED, Phi, ComplexProjector.coordinate(2, 1))


def test_boundary_against_monte_carlo_nonlinear():
    Phi = random_unitary(2, seed=3)
    P = ComplexProjector.coordinate(2, 1)
    v = shadow_volume_curve(MIXED, Phi, P, [0.1])[0]
    mc = mc_shadow_volume(MIXED, Phi, P, 0.1, samples=200_000, seed=1)
    assert abs(v.volume - mc.estimate) / v.volume < 0.02
    assert v.volume > math.pi


def test_mc_linear_is_exact_at_zero():
    Phi = random_symplectic(2, seed=5)
    P = ComplexProjector.coordinate(2, 1)
    mc = mc_shadow_volume(PolyHamiltonian.zero(2), Phi, P, 0.0, samples=200_000, cell=0.02)
    assert mc.estimate == pytest.approx(mc.reference_volume, rel=1e-12)
    # raw occupancy is within a few percent of the exact linear volume
    assert abs(mc.occupancy - mc.reference_volume) / mc.reference_volume < 0.05


def test_mc_deterministic():
    P = ComplexProjector.coordinate(2, 1)
    a = mc_shadow_volume(CUBIC2, np.eye(4), P, 0.05, samples=20_000, seed=4)
    b = mc_shadow_volume(CUBIC2, np.eye(4), P, 0.05, samples=20_000, seed=4)
    assert a == b


def test_self_intersections():
    th = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    circle = np.stack([np.cos(th), np.sin(th)], -1)
    eight = np.stack([np.sin(th + 0.01), np.sin(2 * (th + 0.01))], -1)
    assert self_intersections(circle) == 0
    assert self_intersections(eight) == 1


def test_grid_weights():
    g = BoundaryGrid.circle(32)
    assert g.weights.sum() == pytest.approx(2 * math.pi)
    h = BoundaryGrid.hopf((8, 8, 8))
    assert np.all(np.abs(np.linalg.norm(h.nodes, axis=1) - 1) < 1e-14)
    with pytest.raises(ValueError):
        BoundaryGrid.for_k(3)


def test_write_f_table(tmp_path):
    write_f_table(tmp_path / "f.csv", [(0.0, math.pi, "boundary", 1e-6)])
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "t,f,estimator,tolerance"
    assert len(lines) == 2
