"""The second-order coefficient of the shadow volume and the symmetry tests.

For a Hamiltonian H with ``H_0 = H_{t=0}`` and a symplectic Phi with
``Phi^T V`` complex, the loops

    zeta_L(theta) = Phi^{-1} (I - P) X_{H_0}(Phi e^{theta J} xi_L)

give ``C = int_{Gr_1(Phi^T V)} (E - A)(zeta_L) dmu``, and the shadow volume
behaves like ``omega_2k + C t^2`` for small t. ``C`` vanishes exactly when
every such loop is a harmonic circle, which is the symmetry condition
checked here pointwise on ``Z = Phi^{-1} (I - P) X_{H_0} Phi``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _svg
from .grassmann import GrassmannQuadrature, integrate_over_lines
from .loops import DEFAULT_SAMPLES, FourierLoop, energy_area_gap, rotate, theta_grid
from .shadowvol import DEFAULT_CIRCLE_NODES, BoundaryGrid, ShadowProblem, shadow_volume_curve
from .symplinalg import (
    COMPLEX_TOL,
    SympLinearMap,
    apply_j,
    ball_volume,
    complex_basis,
    is_complex_subspace,
    unitary_between,
)

SYMMETRY_TOL = 1e-8
DEFAULT_T_GRID = tuple(0.01 * i for i in range(1, 9))
GAP_FLOOR = -1e-9


class NotComplexError(ValueError):
    pass


class NonSymmetricError(ValueError):
    pass


def _matrix(Phi):
    return Phi.M if isinstance(Phi, SympLinearMap) else np.asarray(Phi, dtype=float)


def _pulled_back_basis(Phi, P):
    W = _matrix(Phi).T @ P.basis
    if not is_complex_subspace(W.T):
        raise NotComplexError("Phi^T V is not a complex subspace")
    return complex_basis(W.T)


def pulled_back_field(H, Phi, P):
    """``Z(x) = Phi^{-1} (I - P) X_{H_0}(Phi x)`` as a vectorized function."""
    M = _matrix(Phi)
    Minv = SympLinearMap(M).inverse_matrix()
    H0 = H.at_time(0.0)
    Q = np.eye(M.shape[0]) - P.P

    def Z(x):
        X = H0.vector_field(np.asarray(x, dtype=float) @ M.T)
        return X @ Q.T @ Minv.T

    return Z


def zeta_loop(H, Phi, P, xi, N=DEFAULT_SAMPLES):
    """Samples of ``zeta_L`` for unit ``xi`` in ``Phi^T V`` (rows may be batched)."""
    W = _pulled_back_basis(Phi, P)
    xi = np.asarray(xi, dtype=float)
    off = np.max(np.abs(xi - (xi @ W) @ W.T))
    if off > COMPLEX_TOL:
        raise ValueError(f"xi is not in Phi^T V (distance {off:.3g})")
    Z = pulled_back_field(H, Phi, P)
    pts = rotate(xi[..., None, :], theta_grid(N))
    return FourierLoop(Z(pts))


@dataclass
class ExpansionReport:
    C: float
    C_error: float
    omega: float
    k: int
    lines: list = field(default_factory=list)  # sample of (xi, E, A)
    min_gap: float = 0.0
    symmetry_flag: bool | None = None
    symmetry_violation: float | None = None
    fitted_C: float | None = None
    fit_residual: float | None = None
    fit_constant: float | None = None
    fit_linear: float | None = None
    fit_constant_cubic: float | None = None
    fit_linear_cubic: float | None = None
    fitted_C_half_window: float | None = None
    t: list = field(default_factory=list)
    f: list = field(default_factory=list)
    f_error: float | None = None

    @property
    def relative_fit_error(self):
        if self.fitted_C is None or self.C == 0:
            return None
        return abs(self.fitted_C - self.C) / abs(self.C)

    def to_dict(self):
        d = asdict(self)
        d["relative_fit_error"] = self.relative_fit_error
        return d

    def to_json(self, **kw):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def default_quadrature(basis, k):
    if k == 1:
        return GrassmannQuadrature(basis, scheme="point")
    if k == 2:
        return GrassmannQuadrature(basis, scheme="hopf", grid=(32, 1, 32))
    return GrassmannQuadrature(basis, scheme="mc")


def expansion_coefficient(H, Phi, P, q=None, N=DEFAULT_SAMPLES, frame=None, keep_lines=16):
    """``C(H_0, Phi)`` by quadrature over the complex lines of ``Phi^T V``.

    ``frame`` optionally gives a unitary U with ``U V = Phi^T V``; the lines
    are then parametrized as ``U`` applied to lines of V, which must not
    change the result.
    """
    if frame is None:
        W = _pulled_back_basis(Phi, P)
    else:
        _pulled_back_basis(Phi, P)
        W = np.asarray(frame) @ P.basis
    if q is None:
        q = default_quadrature(W, P.k)
    elif q.basis.shape != W.shape or np.max(np.abs(q.basis @ q.basis.T - W @ W.T)) > 1e-9:
        raise ValueError("quadrature subspace differs from Phi^T V")
    Z = pulled_back_field(H, Phi, P)
    th = theta_grid(N)
    cache = {}

    def g(xi):
        loop = FourierLoop(Z(rotate(xi[:, None, :], th)))
        res = energy_area_gap(loop)
        cache.setdefault("first", (xi, res))
        return res.gap

    integral = integrate_over_lines(q, g)
    xi, res = cache["first"]
    gaps = np.asarray(res.gap)
    lines = [
        {"xi": xi[i].tolist(), "energy": float(res.energy[i]), "area": float(res.area[i])}
        for i in range(min(keep_lines, len(xi)))
    ]
    sym = symmetry_violation(H, Phi, P)
    return ExpansionReport(
        C=integral.value,
        C_error=max(integral.error, 1e-12 * (1.0 + abs(integral.value))),
        omega=ball_volume(2 * P.k),
        k=P.k,
        lines=lines,
        min_gap=float(np.min(gaps)),
        symmetry_flag=sym <= SYMMETRY_TOL,
        symmetry_violation=sym,
    )


def _symmetry_gap(Z, W, points=200, phases=32, seed=0):
    rng = np.random.default_rng(seed)
    c = rng.standard_normal((points, W.shape[1]))
    x = c @ W.T
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    th = 2.0 * math.pi * np.arange(phases) / phases
    zp, zm = Z(x), Z(-x)
    even = 0.5 * (zp + zm)
    odd = 0.5 * (zp - zm)
    lhs = Z(rotate(x[:, None, :], th))
    rhs = even[:, None, :] + rotate(odd[:, None, :], th)
    return float(np.max(np.abs(lhs - rhs)))


def symmetry_violation(H, Phi, P, points=200, phases=32, seed=0):
    """Max violation of ``Z(e^{tJ}x) = (Z(x)+Z(-x))/2 + e^{tJ}(Z(x)-Z(-x))/2`` on the unit sphere of ``Phi^T V``."""
    return _symmetry_gap(pulled_back_field(H, Phi, P), _pulled_back_basis(Phi, P), points, phases, seed)


def symmetry_condition(H, Phi, P, tol=SYMMETRY_TOL, **kw):
    return symmetry_violation(H, Phi, P, **kw) <= tol


def symmetry_condition_for_field(Z, W, tol=SYMMETRY_TOL, **kw):
    """The same identity for an arbitrary field ``Z`` on the complex subspace spanned by ``W``."""
    return _symmetry_gap(Z, W, **kw) <= tol


def symmetry_condition_pointwise(second_derivative, D0, P, tol=SYMMETRY_TOL, seed=0, random_points=32):
    """``(I - P) D^2 phi(0)[J x, x] = 0`` for all x in ``D phi(0)^T V``.

    ``second_derivative[i, j, l]`` must be symmetric in ``(j, l)``. The
    quadratic map ``x -> (I - P) T[J x, x]`` is tested on a basis, on all
    pairwise sums (which determines it by polarization) and on random points.
    """
    T = np.asarray(second_derivative, dtype=float)
    scale = 1.0 + np.max(np.abs(T))
    if np.max(np.abs(T - np.swapaxes(T, 1, 2))) > 1e-8 * scale:
        raise NonSymmetricError("second derivative tensor is not symmetric in its last two slots")
    W = complex_basis((np.asarray(D0, dtype=float).T @ P.basis).T)
    Q = np.eye(T.shape[0]) - P.P
    cols = W.T
    m = len(cols)
    pts = [cols[i] for i in range(m)] + [cols[i] + cols[j] for i in range(m) for j in range(i + 1, m)]
    rng = np.random.default_rng(seed)
    pts += list(rng.standard_normal((random_points, m)) @ cols)
    x = np.array(pts)
    vals = np.einsum("ia,ajl,mj,ml->mi", Q, T, apply_j(x), x)
    return bool(np.max(np.abs(vals)) <= tol)


def path_field(second_derivative, D0, P):
    """``Z(x) = 1/2 D phi(0)^{-1} (I - P) D^2 phi(0)[x, x]`` for the rescaled path."""
    T = np.asarray(second_derivative, dtype=float)
    D0inv = SympLinearMap(np.asarray(D0, dtype=float)).inverse_matrix()
    Q = np.eye(T.shape[0]) - P.P

    def Z(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("ba,ai,ijl,...j,...l->...b", D0inv, Q, T, x, x)

    return Z


def alternative_frame(Phi, P, seed=0):
    """A second unitary U with ``U V = Phi^T V``: the default one composed with a random unitary of V."""
    from .symplinalg import random_unitary

    W = _pulled_back_basis(Phi, P)
    U = unitary_between(P.basis, W)
    k, n = P.k, P.n
    R = random_unitary(k, seed=seed)
    R = R.M if isinstance(R, SympLinearMap) else np.asarray(R)
    # act by R on V (in its complex basis) and by the identity on V^perp
    full = np.eye(2 * n)
    B = P.basis
    full = full - B @ B.T + B @ R @ B.T
    return U @ full


FREE_FIT_DEGREE = 4


def fit_expansion(t, f, omega, free_degree=FREE_FIT_DEGREE):
    """Least-squares fits of ``f - omega = c2 t^2 + c3 t^3`` and of a free polynomial.

    The free fit has degree ``free_degree`` (a cubic one is also returned):
    with a cubic, the t^4 term of f leaks into the linear coefficient at the
    1e-4 level on the default window, which would mask ``f'(0) = 0``.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    A = np.stack([t**2, t**3], -1)
    (c2, c3), *_ = np.linalg.lstsq(A, f - omega, rcond=None)
    resid = float(np.max(np.abs(A @ np.array([c2, c3]) - (f - omega))))
    out = {"c2": float(c2), "c3": float(c3), "residual": resid}
    for deg, tag in ((free_degree, ""), (3, "_cubic")):
        B = np.vander(t, deg + 1, increasing=True)
        u, *_ = np.linalg.lstsq(B, f, rcond=None)
        out["c0" + tag], out["c1" + tag], out["c2_free" + tag] = float(u[0]), float(u[1]), float(u[2])
    return out


def validate_expansion(H, Phi, P, t_grid=DEFAULT_T_GRID, q=None, grid=None, report=None, **kw):
    """Measure ``f(t)`` on ``t_grid`` with the boundary solver and fit its Taylor coefficients."""
    t_grid = [float(t) for t in t_grid]
    if len(t_grid) < 4 or max(abs(t) for t in t_grid) > 0.1:
        raise ValueError("need at least 4 times, all with |t| <= 0.1")
    report = report or expansion_coefficient(H, Phi, P, q)
    problem = ShadowProblem(H, Phi, P, **kw)
    grid = grid or BoundaryGrid.for_k(P.k, DEFAULT_CIRCLE_NODES if P.k == 1 else None)
    vols = shadow_volume_curve(H, Phi, P, t_grid, grid=grid, problem=problem)
    f = [v.volume for v in vols]
    fit = fit_expansion(t_grid, f, report.omega)
    half = [i for i, t in enumerate(t_grid) if abs(t) <= 0.5 * max(abs(s) for s in t_grid) + 1e-15]
    if len(half) >= 2:
        half_fit = fit_expansion([t_grid[i] for i in half], [f[i] for i in half], report.omega)
        report.fitted_C_half_window = half_fit["c2"]
    report.t = t_grid
    report.f = f
    report.f_error = max(v.error for v in vols)
    report.fitted_C = fit["c2"]
    report.fit_residual = fit["residual"]
    report.fit_constant = fit["c0"]
    report.fit_linear = fit["c1"]
    report.fit_constant_cubic = fit["c0_cubic"]
    report.fit_linear_cubic = fit["c1_cubic"]
    return report


def write_fit_csv(path, report):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f", "omega_plus_fitted_Ct2", "omega_plus_Ct2"])
        for t, f in zip(report.t, report.f):
            fit = report.omega + report.fitted_C * t * t
            w.writerow([repr(t), repr(f), repr(fit), repr(report.omega + report.C * t * t)])


def write_fit_svg(path, report):
    ts = np.linspace(0.0, max(report.t), 100)
    _svg.line_plot(
        path,
        [
            ("measured f(t)", report.t, report.f, "points"),
            ("omega + C t^2", ts, report.omega + report.C * ts**2, "line"),
        ],
        title=f"shadow volume, k={report.k}",
        xlabel="t",
        ylabel="f(t)",
    )
