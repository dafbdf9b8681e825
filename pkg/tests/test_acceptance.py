"""Acceptance criteria A1-A9 at their stated tolerances and runtime limits.

Each criterion records one PASS/FAIL line; the lines are printed in the
pytest terminal summary, or directly when this file is run as a script.
"""

import math
import time
from importlib import resources

import numpy as np

from shadowlab.cli import RunConfig, load_mapping
from shadowlab.counterexamples import (RhoProfile, ShearProfile, rho_map_jacobian2, rho_map_jacobian2_oracle,
                                       shear_symplectic_defect)
from shadowlab.expansion import expansion_coefficient, symmetry_condition, validate_expansion
from shadowlab.grassmann import GrassmannQuadrature, hopf_fiber_check, primitive_form
from shadowlab.hamflow import PolyHamiltonian, flow, flow_with_initial_map
from shadowlab.loops import FourierLoop, energy_area_gap, loop_area, loop_energy, random_band_limited
from shadowlab.shadowvol import BoundaryGrid, mc_shadow_volume, shadow_volume_curve
from shadowlab.symplinalg import (ComplexProjector, FormsContext, apply_j, ball_volume, is_complex_subspace,
                                  linear_shadow_volume, random_symplectic, random_unitary, realify,
                                  wirtinger_check)

RESULTS = {}
DATA = resources.files("shadowlab") / "data"
SHIPPED = ["cubic_k1", "cubic_k2", "symmetric_quadratic", "linear_diag", "nonexact_k1"]


def record(name, ok, detail):
    RESULTS[name] = (bool(ok), detail)
    assert ok, f"{name}: {detail}"


def shipped(name):
    cfg = RunConfig(**load_mapping(DATA / f"{name}.json"))
    cfg.base_dir = str(DATA)
    return cfg


def test_a1_linear_sweep():
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    violations = flag_mismatch = equal_cases = 0
    worst = math.inf
    for i in range(1000):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, n + 1))
        seed = int(rng.integers(2**31))
        # every fifth map is unitary so that both outcomes of the equality test occur
        Phi = random_unitary(n, seed) if i % 5 == 0 else random_symplectic(n, seed, float(rng.uniform(0.1, 1.0)))
        P = ComplexProjector.random(n, k, seed=seed + 1)
        r = linear_shadow_volume(Phi, P)
        w = ball_volume(2 * k)
        worst = min(worst, r.volume - w)
        violations += r.volume < w - 1e-9
        flag_mismatch += r.equality != is_complex_subspace((Phi.M.T @ P.basis).T)
        equal_cases += r.equality
    elapsed = time.perf_counter() - start
    record("A1", violations == 0 and flag_mismatch == 0 and elapsed <= 10,
           f"violations={violations} flag mismatches={flag_mismatch} equality cases={equal_cases} "
           f"min(vol-omega)={worst:.2e} time={elapsed:.1f}s")


def test_a2_wirtinger():
    start = time.perf_counter()
    rng = np.random.default_rng(102)
    contexts = {(n, k): FormsContext(n, k) for n in (1, 2, 3) for k in range(1, n + 1)}
    keys = list(contexts)
    worst = -math.inf
    for i in range(10_000):
        n, k = keys[i % len(keys)]
        r = wirtinger_check(contexts[n, k], rng.standard_normal((2 * k, 2 * n)))
        worst = max(worst, r.lhs - r.rhs)
    eq_worst = 0.0
    for i in range(1000):
        n, k = keys[i % len(keys)]
        base = rng.standard_normal((k, 2 * n))
        U = rng.standard_normal((2 * k, 2 * k)) @ np.concatenate([base, apply_j(base)])
        r = wirtinger_check(contexts[n, k], U)
        eq_worst = max(eq_worst, abs(r.lhs - r.rhs) / max(1.0, r.rhs))
    elapsed = time.perf_counter() - start
    record("A2", worst <= 1e-10 and eq_worst <= 1e-9 and elapsed <= 5,
           f"max(lhs-rhs)={worst:.2e} complex-span equality gap={eq_worst:.2e} time={elapsed:.1f}s")


def test_a3_hopf_fiber():
    start = time.perf_counter()
    q = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme="hopf", grid=(64, 64, 64))
    c = hopf_fiber_check(FormsContext(2, 2), primitive_form, q)
    ref = math.pi**2
    rel_l, rel_r = abs(c.lhs - ref) / ref, abs(c.rhs - ref) / ref
    mutual = abs(c.lhs - c.rhs) / ref
    elapsed = time.perf_counter() - start
    record("A3", rel_l <= 1e-4 and rel_r <= 1e-4 and mutual <= 2e-4 and elapsed <= 30,
           f"direct={c.lhs:.12f} fiber={c.rhs:.12f} rel errors {rel_l:.1e}/{rel_r:.1e} "
           f"mutual={mutual:.1e} time={elapsed:.1f}s")


def test_a4_area_energy():
    start = time.perf_counter()
    z = random_band_limited(2, 8, 128, batch=1000, seed=104)
    g = energy_area_gap(z)
    direct = loop_energy(z) - loop_area(z)
    rel = float(np.max(np.abs(g.gap - direct) / np.maximum(np.abs(g.gap), 1e-300)))
    # circles z0 + e^{theta J} z1 are members; adding any other mode at amplitude 0.1 breaks membership
    rng = np.random.default_rng(4)
    mismatch = 0
    for i in range(200):
        z0, z1, z2 = rng.standard_normal((3, 4))
        member = i % 2 == 0
        samples = z0 + FourierLoop.from_coefficients([1], z1[None], 64).samples
        if not member:
            m = int(rng.choice([-2, -1, 2, 3]))
            samples = samples + FourierLoop.from_coefficients([m], 0.1 * z2[None], 64).samples
        res = energy_area_gap(FourierLoop(samples))
        mismatch += bool(res.is_harmonic_circle) != member or bool(res.gap_is_zero) != member
    elapsed = time.perf_counter() - start
    record("A4", rel <= 1e-8 and mismatch == 0 and elapsed <= 5,
           f"max relative mismatch={rel:.1e} flag mismatches={mismatch}/200 time={elapsed:.1f}s")


def _a5_case(name, H, n, k, grid, rel_tol, limit):
    start = time.perf_counter()
    P = ComplexProjector.coordinate(n, k)
    r = validate_expansion(H, np.eye(2 * n), P, grid=grid)
    elapsed = time.perf_counter() - start
    rel = r.relative_fit_error
    c0 = abs(r.fit_constant - ball_volume(2 * k))
    ok = rel <= rel_tol and c0 <= 1e-5 and abs(r.fit_linear) <= 1e-4 and elapsed <= limit
    record(name, ok, f"C={r.C:.8f} fitted={r.fitted_C:.8f} rel err={rel:.2%} |c0-omega|={c0:.1e} "
                     f"c1={r.fit_linear:.1e} (cubic free fit c1={r.fit_linear_cubic:.1e}) time={elapsed:.1f}s")


def test_a5_expansion_k1():
    _a5_case("A5 (k=1)", PolyHamiltonian.parse(2, "p1**2*q2"), 2, 1, BoundaryGrid.circle(128), 0.05, 300)


def test_a5_expansion_k2():
    _a5_case("A5 (k=2)", PolyHamiltonian.parse(3, "p1**2*q3"), 3, 2, BoundaryGrid.hopf((12, 24, 24)), 0.10, 1200)


def _a6_case(Hc, cubic, seed):
    n = Hc.shape[0]
    k = 1 if n == 2 else 2
    H0 = PolyHamiltonian.quadratic(realify(Hc))  # complex-linear field, so the symmetry condition holds
    P = ComplexProjector.coordinate(n, k)
    Phi = random_unitary(n, seed=seed)
    base = expansion_coefficient(H0, Phi, P)
    pert = expansion_coefficient(H0 + PolyHamiltonian.parse(n, cubic) * 0.1, Phi, P)
    ok = (symmetry_condition(H0, Phi, P) and base.symmetry_flag and abs(base.C) <= base.C_error
          and not pert.symmetry_flag and pert.C > 3 * pert.C_error)
    detail = (f"k={k}: flag {base.symmetry_flag}->{pert.symmetry_flag}, |C| {abs(base.C):.1e}<=err {base.C_error:.1e}, "
              f"C' {pert.C:.3e}>3*err {pert.C_error:.1e}")
    return ok, detail


def test_a6_symmetric_quadratic():
    start = time.perf_counter()
    ok1, d1 = _a6_case(np.array([[1.0, 0.4 - 0.3j], [0.4 + 0.3j, 0.7]]), "p1**2*q2", 6)
    Hc3 = np.array([[1.0, 0.2 + 0.1j, 0.0], [0.2 - 0.1j, 0.6, 0.3j], [0.0, -0.3j, 0.9]])
    ok2, d2 = _a6_case(Hc3, "p1**2*q3", 7)
    elapsed = time.perf_counter() - start
    record("A6", ok1 and ok2 and elapsed <= 60, f"{d1}; {d2}; time={elapsed:.1f}s")


def test_a7_flow_quality():
    worst_defect = worst_drift = 0.0
    count = 0
    rng = np.random.default_rng(107)
    for name in SHIPPED:
        cfg = shipped(name)
        H, Phi = cfg.build_hamiltonian(), cfg.build_phi()
        x = rng.standard_normal((200, 2 * cfg.n))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        for t in (0.01, 0.05, 0.1, -0.1):
            r = flow_with_initial_map(H, Phi, x, t)
            h0 = H.value(x @ Phi.M.T)
            drift = float(np.max(np.abs(H.value(r.x) - h0) / (1 + np.abs(h0))))
            worst_defect = max(worst_defect, r.defect)
            worst_drift = max(worst_drift, drift)
            count += len(x)
    extra = PolyHamiltonian.parse(2, "p1**2*q2 + q1**2*p2 + 0.3*p1*q1*q2 + 0.5*p2**2 + 0.1*q1**4")
    for seed in range(20):
        x = np.random.default_rng(seed).uniform(-1, 1, (50, 4))
        r = flow(extra, x, 0.1)
        drift = float(np.max(np.abs(extra.value(r.x) - extra.value(x)) / (1 + np.abs(extra.value(x)))))
        worst_defect = max(worst_defect, r.defect)
        worst_drift = max(worst_drift, drift)
        count += len(x)
    record("A7", worst_defect <= 1e-8 and worst_drift <= 1e-8,
           f"{count} trajectories, max symplectic defect={worst_defect:.1e} max energy drift={worst_drift:.1e}")


def test_a8_cross_estimator():
    lines, ok = [], True
    t = 0.1
    for name in SHIPPED:
        cfg = shipped(name)
        H, Phi, P = cfg.build_hamiltonian(), cfg.build_phi(), cfg.build_projector()
        grid = BoundaryGrid.for_k(P.k)
        vb = shadow_volume_curve(H, Phi, P, [t], grid=grid)[0].volume
        mc = mc_shadow_volume(H, Phi, P, t, samples=1_000_000, seed=8)
        tol = 0.02 if P.k == 1 else 0.03
        rel = abs(vb - mc.estimate) / vb
        ok &= rel <= tol
        detail = f"{name}: {rel:.1e}"
        if not np.any(H.coeffs):
            # the calibrated estimate is exact when H = 0, so also compare the raw occupancy
            raw = abs(vb - mc.occupancy) / vb
            ok &= raw <= tol
            detail += f" (raw occupancy {raw:.1e})"
        lines.append(detail)
    record("A8", ok, "relative disagreement at t=0.1: " + ", ".join(lines))


def test_a9_counterexamples():
    rng = np.random.default_rng(109)
    rho = RhoProfile()
    z = rng.uniform(-3, 3, (50, 2))
    t = rng.uniform(0, 2 * math.pi, 50)
    gap = float(np.max(np.abs(rho_map_jacobian2(rho, z, t) - rho_map_jacobian2_oracle(rho, z, t))))
    shear = ShearProfile()
    defect = float(np.max(shear_symplectic_defect(shear, rng.uniform(-2.5, 2.5, (10_000, 4)))))
    record("A9", gap <= 1e-4 and defect <= 1e-9, f"J2 oracle gap={gap:.1e} shear defect={defect:.1e}")


def summary_lines():
    return [f"{'PASS' if ok else 'FAIL'}  {name:<9} {detail}" for name, (ok, detail) in sorted(RESULTS.items())]


if __name__ == "__main__":
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_a")]:
        try:
            fn()
        except AssertionError:
            pass
    print("\n".join(summary_lines()))
