"""Command-line front end.

Every subcommand reads an optional TOML/JSON config, applies flag overrides,
writes its artifacts into ``--out`` and returns an exit status:
0 ok, 1 config error, 2 invariant violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .hamflow import FlowError
from .shadowvol import BoundarySolveError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVARIANT = 2
EXIT_NUMERICAL = 3

COMMANDS = ("linear", "section", "wirtinger", "loops", "hopf", "flow", "boundary", "expansion",
            "counterexamples", "selftest")


class ConfigError(ValueError):
    pass


def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_mapping(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not readable: {path}")
    try:
        if path.suffix == ".toml":
            return _load_toml(path)
        return json.loads(path.read_text())
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


@dataclass
class RunConfig:
    experiment: str = "run"
    n: int = 2
    k: int = 1
    hamiltonian: dict | None = None  # {"n":..., "monomials": [...]}, or {"expr": "..."}, or {"file": path}
    # "identity" | {"matrix": [[...]] or path} | {"random": {"seed", "scale"}} | {"unitary": seed}
    phi: object = "identity"
    subspace: object = "coordinate"  # "coordinate" | {"random": seed}
    quadrature: dict = field(default_factory=dict)
    t_grid: list = field(default_factory=lambda: [0.01 * i for i in range(1, 9)])
    t_max: float = 0.05
    samples: int = 1000
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    grid: list | None = None
    out: str = "shadowlab_out"
    base_dir: str = "."

    def validate(self):
        if not (isinstance(self.n, int) and isinstance(self.k, int)) or not self.n >= self.k >= 1:
            raise ConfigError(f"need integers n >= k >= 1, got n={self.n}, k={self.k}")
        if self.samples < 1:
            raise ConfigError("samples must be positive")
        for name, tol in self.tolerances.items():
            if not (isinstance(tol, (int, float)) and tol > 0):
                raise ConfigError(f"tolerance {name} must be positive")
        if isinstance(self.hamiltonian, dict) and "file" in self.hamiltonian:
            p = self._path(self.hamiltonian["file"])
            if not p.is_file():
                raise ConfigError(f"Hamiltonian file not readable: {p}")
        if isinstance(self.phi, dict) and isinstance(self.phi.get("matrix"), str):
            p = self._path(self.phi["matrix"])
            if not p.is_file():
                raise ConfigError(f"matrix file not readable: {p}")
        if any(abs(t) > 1.0 for t in self.t_grid):
            raise ConfigError("t_grid entries must satisfy |t| <= 1")
        return self

    def _path(self, p):
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def tol(self, name, default):
        return float(self.tolerances.get(name, default))

    # -- builders -----------------------------------------------------------
    def build_hamiltonian(self):
        from .hamflow import PolyHamiltonian

        spec = self.hamiltonian
        if spec is None:
            return PolyHamiltonian.zero(self.n)
        try:
            if "file" in spec:
                spec = load_mapping(self._path(spec["file"]))
            if "expr" in spec:
                H = PolyHamiltonian.parse(int(spec.get("n", self.n)), spec["expr"])
            else:
                H = PolyHamiltonian.from_dict(spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad Hamiltonian spec: {exc}") from exc
        if H.n != self.n:
            raise ConfigError(f"Hamiltonian has n={H.n}, config has n={self.n}")
        return H

    def build_phi(self):
        from .symplinalg import NotSymplecticError, SympLinearMap, random_symplectic, random_unitary

        spec = self.phi
        try:
            if spec == "identity":
                return SympLinearMap.identity(self.n)
            if isinstance(spec, dict) and "matrix" in spec:
                M = spec["matrix"]
                if isinstance(M, str):
                    M = load_mapping(self._path(M))["matrix"]
                return SympLinearMap(np.array(M, dtype=float))
            if isinstance(spec, dict) and "random" in spec:
                r = spec["random"]
                return random_symplectic(self.n, seed=r.get("seed", self.seed), scale=r.get("scale", 0.5))
            if isinstance(spec, dict) and "unitary" in spec:
                return random_unitary(self.n, seed=spec["unitary"])
        except (NotSymplecticError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad Phi spec: {exc}") from exc
        raise ConfigError(f"unrecognized Phi spec {spec!r}")

    def build_projector(self):
        from .symplinalg import ComplexProjector

        if self.subspace == "coordinate":
            return ComplexProjector.coordinate(self.n, self.k)
        if isinstance(self.subspace, dict) and "random" in self.subspace:
            return ComplexProjector.random(self.n, self.k, seed=self.subspace["random"])
        raise ConfigError(f"unrecognized subspace spec {self.subspace!r}")


def build_config(args):
    data = {}
    base = "."
    if getattr(args, "config", None):
        data = load_mapping(args.config)
        base = str(Path(args.config).resolve().parent)
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**data)
    cfg.base_dir = base
    overrides = {"n": args.n, "k": args.k, "seed": args.seed, "t_max": args.t_max, "samples": args.samples,
                 "out": args.out}
    cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    if args.n is not None and args.k is None and cfg.k > cfg.n:
        cfg.k = cfg.n
    return cfg.validate()


# -- output helpers -------------------------------------------------------------

def measured(value, error):
    """A reported number with its error or tolerance."""
    return {"value": float(value), "error": float(error)}


def write_json(path, payload):
    from .expansion import _jsonable

    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _outdir(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -----------------------------------------------------------------

def cmd_linear(cfg):
    from .symplinalg import ComplexProjector, ball_volume, is_complex_subspace, linear_shadow_volume, random_symplectic

    out = _outdir(cfg)
    Phi, P = cfg.build_phi(), cfg.build_projector()
    res = linear_shadow_volume(Phi, P)
    w = ball_volume(2 * P.k)
    tol = cfg.tol("volume", 1e-9)
    write_json(out / "linear_shadow.json", {
        "volume": measured(res.volume, tol * w),
        "omega": measured(w, 0.0),
        "equality": bool(res.equality),
        "gap": measured(res.gap, tol),
        "complexity_defect": measured(res.complexity_defect, 1e-12),
    })
    rows, violations = [], 0
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.samples):
        n = int(rng.integers(cfg.k, cfg.n + 1)) if cfg.n > cfg.k else cfg.n
        k = int(rng.integers(1, n + 1))
        M = random_symplectic(n, seed=int(rng.integers(2**31)), scale=float(rng.uniform(0.1, 1.0)))
        Pk = ComplexProjector.random(n, k, seed=int(rng.integers(2**31)))
        r = linear_shadow_volume(M, Pk)
        wk = ball_volume(2 * k)
        complex_flag = is_complex_subspace((M.M.T @ Pk.basis).T)
        bad = r.volume < wk - tol or r.equality != complex_flag
        violations += bad
        rows.append([i, n, k, r.volume, r.volume / wk, int(r.equality), r.complexity_defect, int(bad)])
    write_csv(out / "linear_sweep.csv", ["index", "n", "k", "volume", "ratio", "equality", "complexity_defect",
                                         "violation"], rows)
    print(f"linear: volume={res.volume:.12g} equality={res.equality} sweep violations={violations}/{cfg.samples}")
    return EXIT_INVARIANT if violations or res.volume < w - tol else EXIT_OK


def cmd_section(cfg):
    from .symplinalg import ComplexProjector, ball_volume, random_symplectic, section_volume

    out = _outdir(cfg)
    Phi, P = cfg.build_phi(), cfg.build_projector()
    res = section_volume(Phi, P)
    w = ball_volume(2 * P.k)
    tol = cfg.tol("volume", 1e-9)
    write_json(out / "section.json", {
        "volume": measured(res.volume, tol * w),
        "omega": measured(w, 0.0),
        "equality": bool(res.equality),
        "gap": measured(res.gap, tol),
    })
    rows, violations = [], 0
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.samples):
        M = random_symplectic(cfg.n, seed=int(rng.integers(2**31)), scale=float(rng.uniform(0.1, 1.0)))
        r = section_volume(M, ComplexProjector.random(cfg.n, cfg.k, seed=int(rng.integers(2**31))))
        bad = r.volume > w + tol
        violations += bad
        rows.append([i, r.volume, r.volume / w, int(r.equality), int(bad)])
    write_csv(out / "section_sweep.csv", ["index", "volume", "ratio", "equality", "violation"], rows)
    print(f"section: volume={res.volume:.12g} equality={res.equality} sweep violations={violations}/{cfg.samples}")
    return EXIT_INVARIANT if violations else EXIT_OK


def cmd_wirtinger(cfg):
    from .symplinalg import FormsContext, apply_j, wirtinger_check

    out = _outdir(cfg)
    ctx = FormsContext(cfg.n, cfg.k)
    rng = np.random.default_rng(cfg.seed)
    worst, violations, eq_fail = -math.inf, 0, 0
    tol = cfg.tol("wirtinger", 1e-10)
    for _ in range(cfg.samples):
        vecs = rng.standard_normal((2 * cfg.k, 2 * cfg.n))
        r = wirtinger_check(ctx, vecs)
        worst = max(worst, r.lhs - r.rhs)
        violations += r.lhs > r.rhs + tol
    for _ in range(max(1, cfg.samples // 10)):
        base = rng.standard_normal((cfg.k, 2 * cfg.n))
        vecs = np.concatenate([base, apply_j(base)])
        mix = rng.standard_normal((2 * cfg.k, 2 * cfg.k))
        r = wirtinger_check(ctx, mix @ vecs)
        eq_fail += not (abs(r.lhs - r.rhs) <= 1e-9 * max(1.0, r.rhs))
    write_json(out / "wirtinger.json", {
        "max_excess": measured(worst, tol),
        "violations": violations,
        "equality_failures": eq_fail,
        "samples": cfg.samples,
    })
    print(f"wirtinger: max(lhs-rhs)={worst:.3g} violations={violations} equality failures={eq_fail}")
    return EXIT_INVARIANT if violations or eq_fail else EXIT_OK


def cmd_loops(cfg):
    from .loops import energy_area_gap, loop_area, loop_energy, random_band_limited

    out = _outdir(cfg)
    z = random_band_limited(cfg.n, 8, 128, batch=cfg.samples, seed=cfg.seed)
    res = energy_area_gap(z)
    direct = loop_energy(z) - loop_area(z)
    rel = np.abs(res.gap - direct) / np.maximum(1.0, np.abs(res.gap))
    tol = cfg.tol("loops", 1e-8)
    neg = int(np.sum(res.gap < -1e-9))
    bad = int(np.sum(rel > tol))
    write_csv(out / "loops.csv", ["index", "energy", "area", "gap", "gap_spectral"],
              [[i, res.energy[i], res.area[i], res.gap[i], direct[i]] for i in range(len(rel))])
    write_json(out / "loops.json", {"max_relative_mismatch": measured(float(rel.max()), tol),
                                    "negative_gaps": neg, "mismatches": bad, "samples": cfg.samples})
    print(f"loops: max relative mismatch={rel.max():.3g} negative gaps={neg}")
    return EXIT_INVARIANT if neg or bad else EXIT_OK


def run_hopf_checks(grid=(64, 64, 64), total_volume=None):
    from .grassmann import GrassmannQuadrature, hopf_fiber_check, primitive_form
    from .symplinalg import ComplexProjector, FormsContext

    q2 = GrassmannQuadrature(ComplexProjector.coordinate(2, 2).basis, scheme="hopf", grid=grid,
                             total_volume=total_volume)
    q1 = GrassmannQuadrature(ComplexProjector.coordinate(1, 1).basis, scheme="point")

    def dq1(y):
        o = np.zeros_like(y)
        o[..., 1] = 1.0 + y[..., 0] ** 2 * y[..., 3]
        return o

    return {
        "k2_primitive": hopf_fiber_check(FormsContext(2, 2), primitive_form, q2),
        "k2_dq1": hopf_fiber_check(FormsContext(2, 2), dq1, q2),
        "k1_primitive": hopf_fiber_check(FormsContext(1, 1), primitive_form, q1),
    }


def cmd_hopf(cfg):
    out = _outdir(cfg)
    tol = cfg.tol("hopf", 1e-4)
    grid = tuple(cfg.grid) if cfg.grid else (64, 64, 64)
    checks = run_hopf_checks(grid)
    payload, ok = {}, True
    for name, c in checks.items():
        payload[name] = {"lhs": measured(c.lhs, tol * max(1.0, abs(c.lhs))),
                         "rhs": measured(c.rhs, tol * max(1.0, abs(c.rhs))), "gap": measured(c.gap, tol)}
        ok &= c.gap <= tol
    ref = math.pi**2
    ok &= abs(checks["k2_primitive"].lhs - ref) <= tol * ref
    write_json(out / "hopf.json", payload)
    print("hopf: " + ", ".join(f"{k} lhs={c.lhs:.10g} rhs={c.rhs:.10g}" for k, c in checks.items()))
    return EXIT_OK if ok else EXIT_INVARIANT


def cmd_flow(cfg):
    from .hamflow import FlowError, flow_with_initial_map

    out = _outdir(cfg)
    H, Phi = cfg.build_hamiltonian(), cfg.build_phi()
    rng = np.random.default_rng(cfg.seed)
    x = rng.standard_normal((min(cfg.samples, 10_000), 2 * cfg.n))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    try:
        fr = flow_with_initial_map(H, Phi, x, cfg.t_max)
    except FlowError as exc:
        print(f"flow: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    h0 = H.value(x @ Phi.M.T)
    drift = np.abs(H.value(fr.x) - h0) / (1.0 + np.abs(h0))
    tol_s, tol_e = cfg.tol("symplectic", 1e-8), cfg.tol("energy", 1e-8)
    write_json(out / "flow.json", {
        "t": measured(cfg.t_max, 0.0),
        "symplectic_defect": measured(fr.defect, tol_s),
        "energy_drift": measured(float(drift.max()), tol_e),
        "steps": fr.steps,
        "points": len(x),
    })
    write_csv(out / "flow_endpoints.csv", [f"x{i}" for i in range(2 * cfg.n)] + [f"y{i}" for i in range(2 * cfg.n)],
              [list(a) + list(b) for a, b in zip(x[:100], fr.x[:100])])
    autonomous = H.is_autonomous
    print(f"flow: defect={fr.defect:.3g} energy drift={drift.max():.3g}")
    return EXIT_INVARIANT if fr.defect > tol_s or (autonomous and drift.max() > tol_e) else EXIT_OK


def cmd_boundary(cfg):
    from .shadowvol import (BoundaryGrid, BoundarySolveError, NotComplexError, ShadowProblem, mc_shadow_volume,
                            shadow_volume_curve, write_f_table)

    out = _outdir(cfg)
    H, Phi, P = cfg.build_hamiltonian(), cfg.build_phi(), cfg.build_projector()
    try:
        problem = ShadowProblem(H, Phi, P)
    except NotComplexError as exc:
        print(f"boundary: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grid = BoundaryGrid.for_k(P.k, tuple(cfg.grid) if cfg.grid and P.k == 2 else (cfg.grid[0] if cfg.grid else None))
    try:
        vols = shadow_volume_curve(H, Phi, P, [0.0, cfg.t_max], grid=grid, problem=problem)
    except BoundarySolveError as exc:
        print(f"boundary: {exc}", file=sys.stderr)
        write_json(out / "boundary.json", {"t_reached": measured(exc.t_reached, 0.0), "failed": True})
        return EXIT_NUMERICAL
    v0, vt = vols
    vt.boundary.write_csv(out / "boundary.csv")
    mc = mc_shadow_volume(H, Phi, P, cfg.t_max, samples=max(cfg.samples, 100_000), seed=cfg.seed)
    rows = [(v.t, v.volume, "boundary", v.error) for v in vols] + [(cfg.t_max, mc.estimate, "occupancy", mc.error)]
    write_f_table(out / "f_table.csv", rows)
    rel = abs(vt.volume - mc.estimate) / vt.volume
    tol_rel = cfg.tol("cross_estimator", 0.02 if P.k == 1 else 0.03)
    write_json(out / "boundary.json", {
        "f0": measured(v0.volume, v0.error),
        "f": measured(vt.volume, vt.error),
        "mc": measured(mc.estimate, mc.error),
        "relative_disagreement": measured(rel, tol_rel),
        "self_intersections": vt.self_intersections,
        "omega": measured(problem.omega, 0.0),
    })
    print(f"boundary: f(0)={v0.volume:.12g} f({cfg.t_max})={vt.volume:.12g} occupancy={mc.estimate:.6g}")
    bad = rel > tol_rel or vt.volume < problem.omega - 1e-6 or abs(v0.volume - problem.omega) > 1e-6
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_expansion(cfg):
    from .expansion import NotComplexError as ExpNotComplex
    from .expansion import expansion_coefficient, validate_expansion, write_fit_csv, write_fit_svg
    from .grassmann import GrassmannQuadrature
    from .shadowvol import BoundaryGrid, BoundarySolveError, NotComplexError

    out = _outdir(cfg)
    H, Phi, P = cfg.build_hamiltonian(), cfg.build_phi(), cfg.build_projector()
    q = None
    if cfg.quadrature:
        from .symplinalg import complex_basis

        W = complex_basis((Phi.M.T @ P.basis).T)
        q = GrassmannQuadrature(W, scheme=cfg.quadrature.get("scheme"), count=cfg.quadrature.get("count", 20000),
                                seed=cfg.quadrature.get("seed", cfg.seed),
                                grid=tuple(cfg.quadrature.get("grid", (32, 1, 32))))
    try:
        report = expansion_coefficient(H, Phi, P, q)
    except (NotComplexError, ExpNotComplex) as exc:
        print(f"expansion: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    grid = BoundaryGrid.for_k(P.k, tuple(cfg.grid) if cfg.grid and P.k == 2 else None)
    failed = None
    try:
        report = validate_expansion(H, Phi, P, cfg.t_grid, report=report, grid=grid)
    except BoundarySolveError as exc:
        failed = exc
    payload = {
        "C": measured(report.C, report.C_error),
        "symmetry_flag": bool(report.symmetry_flag),
        "symmetry_violation": measured(report.symmetry_violation, 1e-8),
        "min_line_gap": measured(report.min_gap, 1e-9),
        "omega": measured(report.omega, 0.0),
    }
    if failed is not None:
        payload["failed_at_t"] = measured(failed.t_reached, 0.0)
        write_json(out / "expansion.json", payload)
        print(f"expansion: boundary solver failed: {failed}", file=sys.stderr)
        return EXIT_NUMERICAL
    fit_err = report.fit_residual + (report.f_error or 0.0)
    payload.update({
        "fitted_C": measured(report.fitted_C, fit_err / max(report.t) ** 2),
        "fitted_C_half_window": measured(report.fitted_C_half_window, fit_err / (max(report.t) / 2) ** 2),
        "fit_constant": measured(report.fit_constant, 1e-5),
        "fit_linear": measured(report.fit_linear, 1e-4),
        "fit_residual": measured(report.fit_residual, report.f_error or 0.0),
        "relative_fit_error": measured(report.relative_fit_error or 0.0, 0.05 if P.k == 1 else 0.10),
        "t": [measured(v, 0.0) for v in report.t],
        "f": [measured(v, report.f_error) for v in report.f],
    })
    write_json(out / "expansion.json", payload)
    write_fit_csv(out / "fit.csv", report)
    write_fit_svg(out / "fit.svg", report)
    rel_tol = cfg.tol("expansion", 0.05 if P.k == 1 else 0.10)
    print(f"expansion: C={report.C:.8g} fitted_C={report.fitted_C:.8g} symmetry={report.symmetry_flag}")
    bad = report.C < -report.C_error or report.min_gap < -1e-9
    if report.symmetry_flag:
        bad |= abs(report.C) > max(report.C_error, 1e-9) or abs(report.fitted_C) > rel_tol
    else:
        bad |= (report.relative_fit_error or 0.0) > rel_tol
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_counterexamples(cfg):
    from .counterexamples import (RhoProfile, ShearProfile, rho_map, rho_map_jacobian2,
                                  rho_map_jacobian2_oracle, shear_symplectic_defect, shear_versus_flow)

    out = _outdir(cfg)
    rng = np.random.default_rng(cfg.seed)
    rho = RhoProfile()
    z = rng.uniform(-1.0, 1.0, (50, 2))
    t = rng.uniform(0.0, 2.0 * math.pi, 50)
    jac_gap = float(np.max(np.abs(rho_map_jacobian2(rho, z, t) - rho_map_jacobian2_oracle(rho, z, t))))
    R = 2.0
    ang = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
    rim = R * np.stack([np.cos(ang), np.sin(ang)], -1)
    radius = float(np.max(np.linalg.norm(rho_map(rho, rim, 0.3), axis=-1)))
    shear = ShearProfile()
    x = rng.uniform(-2.0, 2.0, (500, 4))
    defect = float(np.max(shear_symplectic_defect(shear, x)))
    cmp = shear_versus_flow(shear, x[:50])
    write_json(out / "counterexamples.json", {
        "rho_checks": {k: (measured(v, 1e-12) if isinstance(v, float) else v) for k, v in rho.check().items()},
        "jacobian2_threshold_r0": measured(rho.jacobian_threshold(), rho.r_max / 4000),
        "jacobian2_oracle_gap": measured(jac_gap, 1e-4),
        "image_radius_of_cylinder": measured(radius, 1e-12),
        "contracted_radius": measured(float(rho(R)) * R, 1e-12),
        "shear_symplectic_defect": measured(defect, 1e-9),
        "shear_max_slope": measured(shear.max_slope, 0.0),
        "shear_flow_vs_polynomial": measured(cmp["flow_vs_polynomial_shear"], 1e-7),
        "shear_polynomial_sup_error": measured(cmp["sup_error"], 0.0),
    })
    print(f"counterexamples: J2 oracle gap={jac_gap:.3g} shear defect={defect:.3g}")
    bad = jac_gap > 1e-4 or defect > 1e-9 or radius > float(rho(R)) * R + 1e-12
    return EXIT_INVARIANT if bad else EXIT_OK


# -- selftest -----------------------------------------------------------------

def selftest_checks(mutation=None):
    """Run the invariant suite; returns a list of (name, passed, detail)."""
    from .hamflow import PolyHamiltonian, flow, iota_contract_residual
    from .loops import energy_area_gap, loop_area, loop_energy, random_band_limited
    from .shadowvol import shadow_volume_curve
    from .symplinalg import (ComplexProjector, FormsContext, ball_volume, linear_shadow_volume, random_symplectic,
                             wirtinger_check)

    rng = np.random.default_rng(7)
    results = []

    H = PolyHamiltonian.parse(2, "p1**2*q2 + q1**2*p2 + 0.3*p1*q1*q2 + 0.5*p2**2")
    x = rng.standard_normal((50, 4))
    v = rng.standard_normal((50, 4))
    field_ = (lambda y: -H.vector_field(y)) if mutation == "sign" else None
    res = float(np.max(np.abs(iota_contract_residual(H, x, v, field=field_))))
    results.append(("iota contract", res <= 1e-12, f"max residual {res:.2e}"))

    ctx = FormsContext(3, 2)
    excess = min(wirtinger_check(ctx, rng.standard_normal((4, 6))).gap for _ in range(500))
    results.append(("Wirtinger sweep", excess >= -1e-10, f"min(rhs-lhs) {excess:.2e}"))

    z = random_band_limited(2, 6, 64, batch=200, seed=3)
    g = energy_area_gap(z)
    mism = float(np.max(np.abs(g.gap - (loop_energy(z) - loop_area(z))) / np.maximum(1, np.abs(g.gap))))
    results.append(("area-energy sweep", mism <= 1e-8 and bool(np.all(g.gap >= -1e-9)), f"mismatch {mism:.2e}"))

    hopf = run_hopf_checks((32, 32, 32), total_volume=1.0 if mutation == "mu" else None)["k2_primitive"]
    results.append(("Hopf fiber identity", hopf.gap <= 1e-4 and abs(hopf.lhs - math.pi**2) <= 1e-4 * math.pi**2,
                    f"lhs {hopf.lhs:.8f} rhs {hopf.rhs:.8f} ratio {hopf.lhs / hopf.rhs:.4f}"))

    lin_bad = 0
    for i in range(200):
        M = random_symplectic(3, seed=i)
        r = linear_shadow_volume(M, ComplexProjector.random(3, 1 + i % 3, seed=i))
        lin_bad += r.volume < ball_volume(2 * (1 + i % 3)) - 1e-9
    results.append(("linear non-squeezing", lin_bad == 0, f"{lin_bad} violations in 200"))

    y = rng.standard_normal((20, 4)) * 0.5
    fr = flow(H, y, 0.1)
    drift = float(np.max(np.abs(H.value(fr.x) - H.value(y)) / (1 + np.abs(H.value(y)))))
    results.append(("flow symplecticity", fr.defect <= 1e-8, f"defect {fr.defect:.2e}"))
    results.append(("flow energy", drift <= 1e-8, f"drift {drift:.2e}"))

    P = ComplexProjector.coordinate(2, 1)
    h = 1e-3
    f = [v.volume for v in shadow_volume_curve(H, np.eye(4), P, [-2 * h, -h, 0.0, h, 2 * h])]
    f0 = f[2]
    slope = (8.0 * (f[3] - f[1]) - (f[4] - f[0])) / (12.0 * h)
    results.append(("f(0) = omega", abs(f0 - math.pi) <= 1e-6, f"f(0) - pi = {f0 - math.pi:.2e}"))
    results.append(("f'(0) = 0", abs(slope) <= 1e-4, f"slope {slope:.2e}"))
    return results


def cmd_selftest(cfg, mutation=None):
    results = selftest_checks(mutation)
    width = max(len(n) for n, _, _ in results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    passed = all(ok for _, ok, _ in results)
    print(f"selftest: {sum(ok for _, ok, _ in results)}/{len(results)} passed")
    return EXIT_OK if passed else EXIT_INVARIANT


# -- entry point --------------------------------------------------------------

def make_parser():
    parser = argparse.ArgumentParser(prog="shadowlab", description="Shadow volumes of symplectic images of balls.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML or JSON run configuration")
        p.add_argument("--n", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--t-max", type=float, dest="t_max")
        p.add_argument("--samples", type=int)
        p.add_argument("--out")
        if name == "selftest":
            p.add_argument("--mutate", choices=("sign", "mu"), help="inject a known fault (must make the suite fail)")
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        if args.command == "selftest":
            return cmd_selftest(cfg, args.mutate)
        return globals()[f"cmd_{args.command}"](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FlowError, BoundarySolveError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
