"""Two explicit maps: the shear ``(p1, q1 + chi(p2), p2, q2 + chi'(p2) p1)``
and the twist ``(z, t) -> rho(|z|) e^{it} z`` of R^3 into the plane.

The shear is the time-one map of ``H = chi(p2) p1``; the twist contracts
the cylinder ``B_R x R`` into a smaller disk while its 2-Jacobian stays at
least 1 near the axis when ``rho''(0) > -1/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import polynomial as npoly
from scipy.optimize import minimize

from .hamflow import PolyHamiltonian, flow
from .symplinalg import j_matrix

JAC2_TOL = 1e-4


class ProfileError(ValueError):
    pass


# -- rho ------------------------------------------------------------------

@dataclass(frozen=True)
class RhoProfile:
    """``rho(r) = N(r^2) / D(r^2)`` with ascending coefficient tuples N, D.

    The default ``(1 + r^2/16) / (1 + r^2/8)`` has ``rho''(0) = -1/8``.
    """

    num: tuple = (1.0, 1.0 / 16.0)
    den: tuple = (1.0, 1.0 / 8.0)
    r_max: float = 10.0

    def __post_init__(self):
        report = self.check()
        bad = [k for k, ok in report.items() if k != "rho2_0" and not ok]
        if bad:
            raise ProfileError(f"profile violates: {', '.join(bad)}")

    def _parts(self, r):
        s = np.asarray(r, dtype=float) ** 2
        N, D = npoly.polyval(s, self.num), npoly.polyval(s, self.den)
        dN, dD = npoly.polyval(s, npoly.polyder(self.num)), npoly.polyval(s, npoly.polyder(self.den))
        d2N, d2D = npoly.polyval(s, npoly.polyder(self.num, 2)), npoly.polyval(s, npoly.polyder(self.den, 2))
        return s, N, D, dN, dD, d2N, d2D

    def __call__(self, r):
        _, N, D, *_ = self._parts(r)
        return N / D

    def derivative(self, r):
        """``d rho / dr = 2 r g'(s)`` with ``g(s) = N(s)/D(s)``."""
        s, N, D, dN, dD, _, _ = self._parts(r)
        return 2.0 * np.asarray(r) * (dN * D - N * dD) / D**2

    def second_derivative(self, r):
        s, N, D, dN, dD, d2N, d2D = self._parts(r)
        g1 = (dN * D - N * dD) / D**2
        g2 = (d2N * D - N * d2D) / D**2 - 2.0 * dD * (dN * D - N * dD) / D**3
        return 2.0 * g1 + 4.0 * s * g2

    def check(self, points=2001):
        r = np.linspace(0.0, self.r_max, points)
        rho = self(r)
        d2 = float(self.second_derivative(0.0))
        return {
            "rho_0_is_1": abs(float(self(0.0)) - 1.0) <= 1e-14,
            "rho_prime_0_is_0": abs(float(self.derivative(0.0))) <= 1e-14,
            "rho_below_1": bool(np.all(rho[1:] < 1.0)),
            "rho2_0_above_minus_quarter": d2 > -0.25,
            "rho2_0": d2,
        }

    def jacobian_threshold(self, points=4001):
        """Largest r0 on the grid with ``J2 >= 1`` on ``[0, r0]``."""
        r = np.linspace(0.0, self.r_max, points)
        ok = rho_map_jacobian2(self, np.stack([r, 0 * r], -1), 0.0) >= 1.0 - 1e-14
        bad = np.flatnonzero(~ok)
        return float(r[-1] if bad.size == 0 else r[max(bad[0] - 1, 0)])


def _rot(t):
    c, s = np.cos(t), np.sin(t)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def rho_map(profile, z, t):
    """``rho(|z|) e^{it} z`` for planar z (broadcasting)."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    return profile(r)[..., None] * np.einsum("...ij,...j->...i", _rot(np.asarray(t, dtype=float)), z)


def rho_map_derivative(profile, z, t):
    """Exact ``2 x 3`` derivative in the variables ``(z1, z2, t)``."""
    z = np.asarray(z, dtype=float)
    r = np.linalg.norm(z, axis=-1)
    rho = profile(r)
    drho = profile.derivative(r)
    safe = np.where(r > 0, r, 1.0)
    radial = np.where((r > 0)[..., None, None], (drho / safe)[..., None, None] * z[..., :, None] * z[..., None, :], 0.0)
    R = _rot(np.asarray(t, dtype=float))
    Dz = R @ (rho[..., None, None] * np.eye(2) + radial)
    Jz = np.stack([-z[..., 1], z[..., 0]], -1)
    Dt = rho[..., None] * np.einsum("...ij,...j->...i", R, Jz)
    return np.concatenate([Dz, Dt[..., :, None]], axis=-1)


def rho_map_jacobian2(profile, z, t, check=False):
    """``rho (rho + r rho') sqrt(1 + r^2)`` at ``r = |z|``.

    With ``check`` the value is compared against the sampled-Grassmannian
    maximum and a mismatch above 1e-4 raises ``AssertionError``.
    """
    r = np.linalg.norm(np.asarray(z, dtype=float), axis=-1)
    rho = profile(r)
    val = rho * (rho + r * profile.derivative(r)) * np.sqrt(1.0 + r * r)
    if check:
        oracle = rho_map_jacobian2_oracle(profile, z, t)
        if np.max(np.abs(np.asarray(val) - oracle)) > JAC2_TOL:
            raise AssertionError("closed-form 2-Jacobian disagrees with the sampled maximum")
    return val


def _fibonacci_sphere(count):
    i = np.arange(count) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / count)
    theta = math.pi * (1.0 + 5.0**0.5) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], -1)


def _plane_det(A, normal):
    normal = normal / np.linalg.norm(normal)
    # orthonormal basis of normal^perp from two cross products
    e = np.zeros(3)
    e[np.argmin(np.abs(normal))] = 1.0
    u = np.cross(normal, e)
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return abs(np.linalg.det(A @ np.stack([u, v], -1)))


def rho_map_jacobian2_oracle(profile, z, t, normals=2000):
    """Max of ``|det D phi|_W|`` over 2-planes W of R^3 (grid of normals, then polished)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    t = np.broadcast_to(np.asarray(t, dtype=float), z.shape[:-1])
    grid = _fibonacci_sphere(normals)
    out = np.empty(len(z))
    for i, (zi, ti) in enumerate(zip(z, t)):
        A = rho_map_derivative(profile, zi, ti)
        vals = [_plane_det(A, nrm) for nrm in grid]
        start = grid[int(np.argmax(vals))]
        res = minimize(lambda v: -_plane_det(A, v), start, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        out[i] = max(-res.fun, max(vals))
    return out


# -- shear ------------------------------------------------------------------

def _smoothstep(w):
    return w * w * (3.0 - 2.0 * w)


def _smoothstep_integral(w):
    return w**3 - 0.5 * w**4


@dataclass(frozen=True)
class ShearProfile:
    """Even C^2 bump: ``chi = 2R`` on ``[-eps, eps]``, zero outside ``[-(2R - eps), 2R - eps]``.

    On ``eps <= |s| <= 2R - eps`` the slope is a trapezoid with smoothstep
    corners of relative width ``delta``; its height ``2R / ((1 - delta)(2R - 2eps))``
    must not exceed 3/2.
    """

    R: float = 1.0
    eps: float = 0.1
    delta: float = 0.2

    def __post_init__(self):
        if not 0 < self.eps < self.R / 3:
            raise ProfileError("need 0 < eps < R/3")
        if not 0 < self.delta <= 0.5:
            raise ProfileError("delta must lie in (0, 1/2]")
        if self.max_slope > 1.5:
            raise ProfileError(f"slope {self.max_slope:.4f} exceeds 3/2")

    @property
    def outer(self):
        return 2.0 * self.R - self.eps

    @property
    def width(self):
        return self.outer - self.eps

    @property
    def max_slope(self):
        return 2.0 * self.R / ((1.0 - self.delta) * self.width)

    def _g(self, u):
        d = self.delta
        return np.where(u < d, _smoothstep(np.clip(u / d, 0, 1)),
                        np.where(u > 1 - d, _smoothstep(np.clip((1 - u) / d, 0, 1)), 1.0))

    def _G(self, u):
        d = self.delta
        up = np.clip(u / d, 0, 1)
        down = np.clip((1 - u) / d, 0, 1)
        return np.where(u < d, d * _smoothstep_integral(up),
                        np.where(u > 1 - d, 0.5 * d + (1 - 2 * d) + d * (0.5 - _smoothstep_integral(down)),
                                 0.5 * d + (u - d)))

    def _gprime(self, u):
        d = self.delta
        up = np.clip(u / d, 0, 1)
        down = np.clip((1 - u) / d, 0, 1)
        return np.where(u < d, 6 * up * (1 - up) / d, np.where(u > 1 - d, -6 * down * (1 - down) / d, 0.0))

    def _u(self, s):
        return np.clip((np.abs(s) - self.eps) / self.width, 0.0, 1.0)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return 2.0 * self.R - self.max_slope * self.width * self._G(self._u(s))

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        u = self._u(s)
        inside = (np.abs(s) > self.eps) & (np.abs(s) < self.outer)
        return np.where(inside, -np.sign(s) * self.max_slope * self._g(u), 0.0)

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        u = self._u(s)
        inside = (np.abs(s) > self.eps) & (np.abs(s) < self.outer)
        return np.where(inside, -self.max_slope * self._gprime(u) / self.width, 0.0)

    def check(self, points=20001):
        s = np.linspace(-2.5 * self.R, 2.5 * self.R, points)
        chi = self(s)
        plateau = np.abs(s) <= self.eps
        outside = np.abs(s) >= self.outer
        return {
            "plateau": float(np.max(np.abs(chi[plateau] - 2.0 * self.R))) if plateau.any() else 0.0,
            "support": float(np.max(np.abs(chi[outside]))) if outside.any() else 0.0,
            "max_slope": float(np.max(np.abs(self.derivative(s)))),
        }

    def polynomial(self, degree=24):
        """Chebyshev interpolant of chi on ``[-2R, 2R]`` in the power basis, with sup-errors of chi and chi'."""
        cheb = Chebyshev.interpolate(self, degree, domain=[-2.0 * self.R, 2.0 * self.R])
        poly = cheb.convert(kind=np.polynomial.Polynomial, domain=[-1, 1], window=[-1, 1])
        s = np.linspace(-2.0 * self.R, 2.0 * self.R, 4001)
        return PolyFit(
            coeffs=tuple(float(c) for c in poly.coef),
            sup_error=float(np.max(np.abs(poly(s) - self(s)))),
            sup_error_derivative=float(np.max(np.abs(poly.deriv()(s) - self.derivative(s)))),
            interval=(-2.0 * self.R, 2.0 * self.R),
        )


@dataclass(frozen=True)
class PolyFit:
    coeffs: tuple  # ascending power-basis coefficients
    sup_error: float
    sup_error_derivative: float
    interval: tuple

    def __call__(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), self.coeffs)

    def derivative(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), npoly.polyder(self.coeffs))

    def second_derivative(self, s):
        return npoly.polyval(np.asarray(s, dtype=float), npoly.polyder(self.coeffs, 2))

    @cached_property
    def hamiltonian(self):
        """``H = chi(p2) p1`` on R^4."""
        mons = [(c, [1, 0, j, 0]) for j, c in enumerate(self.coeffs) if c != 0.0]
        return PolyHamiltonian.from_monomials(2, mons)


def guth_shear(profile, x):
    """``(p1, q1 + chi(p2), p2, q2 + chi'(p2) p1)``."""
    x = np.asarray(x, dtype=float)
    p1, q1, p2, q2 = np.moveaxis(x, -1, 0)
    return np.stack([p1, q1 + profile(p2), p2, q2 + profile.derivative(p2) * p1], -1)


def guth_shear_derivative(profile, x):
    x = np.asarray(x, dtype=float)
    p1, _, p2, _ = np.moveaxis(x, -1, 0)
    d1 = profile.derivative(p2)
    d2 = profile.second_derivative(p2)
    D = np.broadcast_to(np.eye(4), x.shape[:-1] + (4, 4)).copy()
    D[..., 1, 2] = d1
    D[..., 3, 0] = d1
    D[..., 3, 2] = d2 * p1
    return D


def shear_symplectic_defect(profile, x):
    """Pointwise ``max |D^T J D - J|``."""
    D = guth_shear_derivative(profile, x)
    J = j_matrix(2)
    return np.max(np.abs(np.swapaxes(D, -1, -2) @ J @ D - J), axis=(-2, -1))


def shear_versus_flow(profile, x, degree=24, step=0.05):
    """Compare the shear with the time-one flow of ``chi_poly(p2) p1``.

    Returns the flow-vs-polynomial-shear discrepancy (integrator error) and
    the polynomial-vs-exact-shear discrepancy (bounded by the fit errors).
    """
    fit = profile.polynomial(degree)
    x = np.asarray(x, dtype=float)
    flowed = flow(fit.hamiltonian, x, 1.0, step, jacobian=False).x
    poly_shear = guth_shear(fit, x)
    exact = guth_shear(profile, x)
    bound = fit.sup_error + np.max(np.abs(x[..., 0])) * fit.sup_error_derivative
    return {
        "flow_vs_polynomial_shear": float(np.max(np.abs(flowed - poly_shear))),
        "polynomial_vs_exact_shear": float(np.max(np.abs(poly_shear - exact))),
        "fit_bound": float(bound),
        "sup_error": fit.sup_error,
    }
