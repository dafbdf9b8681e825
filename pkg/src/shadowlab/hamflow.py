"""Polynomial Hamiltonians and their symplectic time-t flows.

The vector field is ``X_H = J grad H``, which with ``Omega[u, v] = (J u) . v``
is the field defined by ``iota_X Omega = -dH``. Flows are integrated with
the implicit midpoint rule (optionally composed into the symmetric
4th-order triple jump); the Jacobian is propagated by the exact derivative
of the discrete map, so it is symplectic up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from ._kernels_py import _tables
from .symplinalg import SympLinearMap, apply_j, j_matrix

DEFAULT_STEP = 0.01
DEFAULT_ORDER = 4
DEFECT_TOL = 1e-8
DRIFT_TOL = 1e-8
MAX_HALVINGS = 8


class FlowError(RuntimeError):
    """Base class for integration failures."""


class FlowConvergenceError(FlowError):
    """The implicit midpoint equation did not converge (step too large)."""


class FlowBlowUpError(FlowError):
    """The trajectory left the configured bounding box."""


def _monomial_label(exps):
    parts = []
    for idx, e in enumerate(exps):
        if e == 0:
            continue
        name = f"{'pq'[idx % 2]}{idx // 2 + 1}"
        parts.append(name if e == 1 else f"{name}^{e}")
    return "*".join(parts) or "1"


class PolyHamiltonian:
    """``H_t(x) = sum_i w_i(t) H_i(x)`` with polynomial ``H_i`` and scalar polynomial weights.

    An autonomous Hamiltonian has a single term with weight 1. Monomials are
    ``coeff * prod x_a^exps[a]`` over coordinates ``(p1, q1, ..., pn, qn)``.
    """

    def __init__(self, n, coeffs, exps, term=None, weights=None):
        exps = np.asarray(exps, dtype=np.int64).reshape(-1, 2 * n)
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if coeffs.shape[0] != exps.shape[0]:
            raise ValueError("one coefficient per monomial required")
        if np.any(exps < 0):
            raise ValueError("exponents must be nonnegative")
        if coeffs.size == 0:  # the zero Hamiltonian
            coeffs = np.zeros(1)
            exps = np.zeros((1, 2 * n), dtype=np.int64)
        self.n = int(n)
        self.coeffs = coeffs
        self.exps = exps
        self.term = np.zeros(len(coeffs), dtype=np.int64) if term is None else np.asarray(term, dtype=np.int64)
        self.weights = np.array([[1.0]]) if weights is None else np.atleast_2d(np.asarray(weights, dtype=float))

    # -- construction ----------------------------------------------------
    @classmethod
    def from_monomials(cls, n, monomials):
        """Build from ``[(coeff, exps), ...]``."""
        monomials = list(monomials)
        if not monomials:
            return cls.zero(n)
        coeffs = [c for c, _ in monomials]
        exps = [e for _, e in monomials]
        return cls(n, coeffs, exps)

    @classmethod
    def zero(cls, n):
        return cls(n, [], np.zeros((0, 2 * n)))

    @classmethod
    def quadratic(cls, S):
        """``H = x^T S x / 2``."""
        S = np.asarray(S, dtype=float)
        S = 0.5 * (S + S.T)
        d = S.shape[0]
        mons = []
        for a in range(d):
            for b in range(a, d):
                c = S[a, b] if a != b else 0.5 * S[a, a]
                if c == 0.0:
                    continue
                e = np.zeros(d, dtype=np.int64)
                e[a] += 1
                e[b] += 1
                mons.append((c, e))
        return cls.from_monomials(d // 2, mons)

    @classmethod
    def from_dict(cls, data):
        """Parse ``{"n": int, "monomials": [{"coeff": c, "exps": [...]}, ...]}``."""
        n = int(data["n"])
        mons = []
        for item in data.get("monomials", []):
            exps = list(item["exps"])
            if len(exps) != 2 * n:
                raise ValueError(f"monomial exponent list must have length {2 * n}")
            mons.append((float(item["coeff"]), exps))
        return cls.from_monomials(n, mons)

    @classmethod
    def parse(cls, n, text):
        """Parse an expression such as ``"p1**2*q2 + 0.5*q1"`` (uses sympy)."""
        import sympy

        names = [f"{c}{j + 1}" for j in range(n) for c in ("p", "q")]
        syms = sympy.symbols(names)
        poly = sympy.Poly(sympy.sympify(text, locals=dict(zip(names, syms))), *syms)
        return cls.from_monomials(n, [(float(c), list(m)) for m, c in poly.terms()])

    @classmethod
    def time_dependent(cls, parts):
        """Combine ``[(weight_coeffs, H_i), ...]``; weights are ascending polynomial coefficients in t."""
        parts = list(parts)
        n = parts[0][1].n
        width = max(len(w) for w, _ in parts)
        coeffs, exps, term, weights = [], [], [], []
        for idx, (w, H) in enumerate(parts):
            if not H.is_autonomous:
                raise ValueError("components must be autonomous")
            coeffs.append(H.coeffs)
            exps.append(H.exps)
            term.append(np.full(len(H.coeffs), idx))
            weights.append(np.pad(np.asarray(w, dtype=float), (0, width - len(w))))
        return cls(n, np.concatenate(coeffs), np.concatenate(exps), np.concatenate(term), np.array(weights))

    def to_dict(self):
        if not self.is_autonomous:
            raise ValueError("only autonomous Hamiltonians serialize to the monomial format")
        return {
            "n": self.n,
            "monomials": [
                {"coeff": float(c), "exps": [int(v) for v in e]} for c, e in zip(self.coeffs, self.exps) if c != 0
            ],
        }

    def __repr__(self):
        if self.is_autonomous:
            body = " + ".join(f"{c:g}*{_monomial_label(e)}" for c, e in zip(self.coeffs, self.exps) if c) or "0"
            return f"PolyHamiltonian(n={self.n}, {body})"
        return f"PolyHamiltonian(n={self.n}, terms={len(self.weights)})"

    def __add__(self, other):
        if not (self.is_autonomous and other.is_autonomous):
            return NotImplemented
        return PolyHamiltonian(self.n, np.concatenate([self.coeffs, other.coeffs]), np.vstack([self.exps, other.exps]))

    def __mul__(self, scalar):
        return PolyHamiltonian(self.n, self.coeffs * float(scalar), self.exps, self.term, self.weights)

    __rmul__ = __mul__

    # -- evaluation ------------------------------------------------------
    @property
    def is_autonomous(self):
        return self.weights.shape == (1, 1) and self.weights[0, 0] == 1.0

    @property
    def degree(self):
        return int(self.exps.sum(axis=1).max())

    def coeffs_at(self, t=0.0):
        w = np.polynomial.polynomial.polyval(t, self.weights.T)
        return self.coeffs * np.atleast_1d(w)[self.term]

    def at_time(self, t):
        """The autonomous snapshot ``H_t``."""
        return PolyHamiltonian(self.n, self.coeffs_at(t), self.exps)

    @cached_property
    def _tabs(self):
        return _tables(self.exps)

    def _batch(self, x):
        x = np.asarray(x, dtype=float)
        return x.reshape(-1, 2 * self.n), x.shape[:-1]

    def value(self, x, t=0.0):
        xb, shape = self._batch(x)
        return _backend.kernels.poly_eval(self.exps, self.coeffs_at(t), xb).reshape(shape)

    def gradient(self, x, t=0.0):
        xb, shape = self._batch(x)
        return _backend.kernels.poly_grad(self.exps, self.coeffs_at(t), xb).reshape(shape + (2 * self.n,))

    def hessian(self, x, t=0.0):
        xb, shape = self._batch(x)
        _, h = _backend.kernels.poly_grad_hess(self.exps, self.coeffs_at(t), xb)
        return h.reshape(shape + (2 * self.n, 2 * self.n))

    def third_derivative(self, x, t=0.0):
        """Tensor ``d^3 H / dx_a dx_b dx_c``."""
        xb, shape = self._batch(x)
        d = 2 * self.n
        eye = np.eye(d, dtype=np.int64)
        e = self.exps
        ex = e[None, None, None] - eye[:, None, None, None] - eye[None, :, None, None] - eye[None, None, :, None]
        # falling-factorial multiplicity of the mixed partial
        fac = np.ones((d, d, d, len(e)))
        cnt = eye[:, None, None, :] + eye[None, :, None, :] + eye[None, None, :, :]  # (d,d,d,d)
        for a in range(d):
            ea = e[:, a][None, None, None, :]
            ca = cnt[..., a][..., None]
            fac *= np.where(ca >= 1, ea, 1) * np.where(ca >= 2, ea - 1, 1) * np.where(ca >= 3, ea - 2, 1)
        ex = np.clip(ex, 0, None)
        pw = np.prod(xb[:, None, None, None, None, :] ** ex[None], axis=-1)
        out = np.einsum("zabcm,abcm->zabc", pw, fac * self.coeffs_at(t))
        return out.reshape(shape + (d, d, d))

    def vector_field(self, x, t=0.0):
        """``X_H(x) = J grad H(x)``."""
        return apply_j(self.gradient(x, t))

    def field_jacobian(self, x, t=0.0):
        """``D X_H(x) = J Hess H(x)``."""
        return np.swapaxes(apply_j(np.swapaxes(self.hessian(x, t), -1, -2)), -1, -2)


def iota_contract_residual(H, x, v, t=0.0, field=None):
    """``Omega[X(x), v] + dH(x)[v]``; vanishes for the Hamiltonian field.

    ``field`` overrides ``X`` (used to demonstrate that a sign error is caught).
    """
    X = H.vector_field(x, t) if field is None else field(x)
    return np.sum(apply_j(X) * v, axis=-1) + np.sum(H.gradient(x, t) * v, axis=-1)


@dataclass(frozen=True)
class FlowResult:
    """Endpoint and Jacobian of a (batched) flow; immutable after construction."""

    t: float
    x: np.ndarray
    jacobian: np.ndarray | None
    defect: float
    steps: int
    step: float
    order: int
    error_estimate: float | None = None
    energy_drift: float | None = None  # max |H(x_t) - H(x_0)| / (1 + |H(x_0)|), autonomous H only


def _defect(Y):
    if Y is None:
        return float("nan")
    J = j_matrix(Y.shape[-1] // 2)
    return float(np.max(np.abs(np.swapaxes(Y, -1, -2) @ J @ Y - J)))


def _integrate(H, x0, Y0, t, step, order, t0, tol, maxiter, bound, backend):
    kern = _backend.get(backend)
    nsteps = max(1, math.ceil(abs(t) / step - 1e-12)) if t != 0 else 0
    if nsteps == 0:
        return x0.copy(), (None if Y0 is None else Y0.copy()), 0, 0.0
    h = t / nsteps
    x, Y, status, _ = kern.midpoint_flow(
        H.exps, H.coeffs, H.term, H.weights, x0, Y0, t0, h, nsteps, order, tol, maxiter, bound
    )
    if status == 1:
        raise FlowConvergenceError(f"implicit midpoint did not converge with step {h:g}")
    if status == 2:
        raise FlowBlowUpError(f"trajectory left the box |x| <= {bound:g}")
    return x, Y, nsteps, h


def flow(H, x, t, step=DEFAULT_STEP, *, jacobian=True, Y0=None, t0=0.0, order=DEFAULT_ORDER,
         atol=None, tol=1e-13, maxiter=100, bound=1e6, backend=None):
    """Time-``t`` flow of ``H`` starting at ``x`` (shape ``(2n,)`` or ``(B, 2n)``).

    The step is halved until the Jacobian's symplectic defect is at most
    1e-8, the relative energy drift of an autonomous H is at most 1e-8 and,
    when ``atol`` is given, until the Richardson estimate
    ``|x_h - x_{h/2}| / (2^order - 1)`` is at most ``atol``.

    Raises:
        FlowConvergenceError: the implicit solve failed at every tried step.
        FlowBlowUpError: ``|psi| > bound`` along the trajectory.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.ascontiguousarray(x.reshape(-1, 2 * H.n))
    Yb = None
    if jacobian:
        if Y0 is None:
            Yb = np.broadcast_to(np.eye(2 * H.n), (xb.shape[0], 2 * H.n, 2 * H.n)).copy()
        else:
            Yb = np.ascontiguousarray(np.broadcast_to(Y0, (xb.shape[0], 2 * H.n, 2 * H.n)), dtype=float).copy()
    base_defect = _defect(Yb) if Yb is not None else 0.0
    h0 = H.value(xb, t0) if H.is_autonomous else None
    h = step
    err = None
    drift = None
    for _ in range(MAX_HALVINGS + 1):
        try:
            xt, Yt, nsteps, used = _integrate(H, xb, Yb, t, h, order, t0, tol, maxiter, bound, backend)
        except FlowConvergenceError:
            h *= 0.5
            continue
        defect = _defect(Yt) if Yt is not None else 0.0
        ok = defect <= DEFECT_TOL + base_defect
        if h0 is not None:
            with np.errstate(over="ignore", invalid="ignore"):
                drift = float(np.max(np.abs(H.value(xt) - h0) / (1.0 + np.abs(h0))))
            ok = ok and drift <= DRIFT_TOL
        if ok and atol is not None and nsteps:
            x2, _, _, _ = _integrate(H, xb, None, t, h / 2, order, t0, tol, maxiter, bound, backend)
            err = float(np.max(np.abs(xt - x2))) / (2**order - 1)
            ok = err <= atol
        if ok:
            break
        h *= 0.5
    else:
        raise FlowConvergenceError(f"no acceptable step found down to {h:g}")
    if single:
        xt = xt[0]
        Yt = None if Yt is None else Yt[0]
    return FlowResult(t=t, x=xt, jacobian=Yt, defect=defect if jacobian else float("nan"),
                      steps=nsteps, step=abs(used), order=order, error_estimate=err, energy_drift=drift)


def flow_with_initial_map(H, Phi, x, t, step=DEFAULT_STEP, **kw):
    """``psi_t(x)``: the flow of H for time t started at ``Phi x``, with ``D psi_t = D flow . Phi``."""
    M = Phi.M if isinstance(Phi, SympLinearMap) else np.asarray(Phi, dtype=float)
    x = np.asarray(x, dtype=float)
    return flow(H, x @ M.T, t, step, Y0=M, **kw)


def flow_rk4(H, x, t, step=DEFAULT_STEP, t0=0.0):
    """Classical RK4 on the state and variational equation (cross-check path, not symplectic)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x.reshape(-1, 2 * H.n).copy()
    Y = np.broadcast_to(np.eye(2 * H.n), (xb.shape[0], 2 * H.n, 2 * H.n)).copy()
    nsteps = max(1, math.ceil(abs(t) / step - 1e-12))
    h = t / nsteps

    def rhs(s, xs, Ys):
        return H.vector_field(xs, s), H.field_jacobian(xs, s) @ Ys

    s = t0
    for _ in range(nsteps):
        k1 = rhs(s, xb, Y)
        k2 = rhs(s + h / 2, xb + h / 2 * k1[0], Y + h / 2 * k1[1])
        k3 = rhs(s + h / 2, xb + h / 2 * k2[0], Y + h / 2 * k2[1])
        k4 = rhs(s + h, xb + h * k3[0], Y + h * k3[1])
        xb = xb + h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Y = Y + h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        s += h
    if single:
        return FlowResult(t=t, x=xb[0], jacobian=Y[0], defect=_defect(Y), steps=nsteps, step=abs(h), order=4)
    return FlowResult(t=t, x=xb, jacobian=Y, defect=_defect(Y), steps=nsteps, step=abs(h), order=4)


def flow_second_derivative(H, x, t, step=DEFAULT_STEP, *, Y0=None, order=DEFAULT_ORDER, t0=0.0):
    """Second derivative tensor ``T[i, j, l] = d^2 psi_i / dx_j dx_l`` of the discrete flow.

    Obtained by differentiating the midpoint recursion once more, using the
    exact third derivatives of H. ``Y0`` is an optional linear initial map
    (the flow is then started at ``Y0 x``). Pure numpy; not a hot path.
    """
    from ._kernels_py import substep_fractions

    x = np.asarray(x, dtype=float).reshape(2 * H.n)
    d = 2 * H.n
    M = np.eye(d) if Y0 is None else np.asarray(Y0, dtype=float)
    xs = M @ x
    Y = M.copy()
    T = np.zeros((d, d, d))
    nsteps = max(1, math.ceil(abs(t) / step - 1e-12)) if t else 0
    h = t / nsteps if nsteps else 0.0
    J = j_matrix(H.n).astype(float)
    eye = np.eye(d)
    s = t0
    for _ in range(nsteps):
        for frac in substep_fractions(order):
            dt = frac * h
            sm = s + 0.5 * dt
            x1 = xs + dt * H.vector_field(xs, sm)
            for _it in range(200):
                x_new = xs + dt * H.vector_field(0.5 * (xs + x1), sm)
                done = np.max(np.abs(x_new - x1)) <= 1e-14 * (1 + np.max(np.abs(x_new)))
                x1 = x_new
                if done:
                    break
            m = 0.5 * (xs + x1)
            A = J @ H.hessian(m, sm)
            L = eye - 0.5 * dt * A
            Y1 = np.linalg.solve(L, Y + 0.5 * dt * A @ Y)
            Ym = 0.5 * (Y + Y1)
            D3 = H.third_derivative(m, sm)
            dA = np.einsum("ia,abs,sl->ibl", J, D3, Ym)  # dA[i, b, l] = d A_ib / d x0_l
            rhs = 0.5 * dt * np.einsum("ibl,bj->ijl", dA, Y + Y1) + np.einsum("ib,bjl->ijl", eye + 0.5 * dt * A, T)
            T = np.linalg.solve(L, rhs.reshape(d, d * d)).reshape(d, d, d)
            xs, Y = x1, Y1
            s += dt
    return T


class HamiltonianDiffeo:
    """``phi(x) = flow_time(H)(Phi x)``, evaluable anywhere, with derivatives."""

    def __init__(self, H, Phi=None, time=1.0, step=DEFAULT_STEP, order=DEFAULT_ORDER):
        self.H = H
        d = 2 * H.n
        self.M = np.eye(d) if Phi is None else (Phi.M if isinstance(Phi, SympLinearMap) else np.asarray(Phi, float))
        self.time = time
        self.step = step
        self.order = order

    def __call__(self, x):
        return flow(self.H, np.asarray(x, float) @ self.M.T, self.time, self.step,
                    jacobian=False, order=self.order).x

    def derivative(self, x):
        return flow(self.H, np.asarray(x, float) @ self.M.T, self.time, self.step,
                    Y0=self.M, order=self.order).jacobian

    def second_derivative(self, x):
        return flow_second_derivative(self.H, x, self.time, self.step, Y0=self.M, order=self.order)


class RescaledPath:
    """``phi_t(x) = (phi(t x) - phi(0)) / t`` for t in (0, 1]; ``D phi(0) x`` at t = 0."""

    def __init__(self, phi, t):
        if not 0.0 <= t <= 1.0:
            raise ValueError("t must lie in [0, 1]")
        self.phi = phi
        self.t = t
        d = phi.M.shape[0]
        self._origin = phi(np.zeros(d))
        self._D0 = phi.derivative(np.zeros(d))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.t == 0.0:
            return x @ self._D0.T
        return (self.phi(self.t * x) - self._origin) / self.t

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.t == 0.0:
            return np.broadcast_to(self._D0, x.shape[:-1] + self._D0.shape).copy()
        return self.phi.derivative(self.t * x)

    def conditioning(self, x):
        """Rounding amplification of the difference quotient: ``eps |phi(tx)| / |phi(tx) - phi(0)|``."""
        if self.t == 0.0:
            return 0.0
        x = np.asarray(x, dtype=float)
        top = np.abs(self.phi(self.t * x)) + np.abs(self._origin)
        bottom = np.maximum(np.abs(self.phi(self.t * x) - self._origin), np.finfo(float).tiny)
        return float(np.max(np.finfo(float).eps * top / bottom))


def path_from_diffeo(phi, t):
    return RescaledPath(phi, t)
