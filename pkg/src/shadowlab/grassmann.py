"""Quadrature over the complex lines Gr_1(W) of a complex subspace W.

The measure mu is the Fubini-Study volume normalized so that
``int_{S^{2k-1}} Omega^{k-1} ^ Lambda = k! omega_{2k}`` splits along the
Hopf fibers, which forces total mass ``pi^{k-1} / (k-1)!``. For k = 1 the
Grassmannian is a single point of mass 1.

Integrands are functions of a unit representative ``xi`` of the line and
must be invariant under ``xi -> e^{theta J} xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .loops import rotate
from .symplinalg import COMPLEX_TOL, apply_j, complexity_defect

DEFAULT_MC_COUNT = 20_000
DEFAULT_HOPF_GRID = (64, 64, 64)
PHASE_TOL = 1e-6


class PhaseInvarianceError(ValueError):
    """The integrand changes under the circle action on representatives."""


def fubini_study_volume(k):
    return math.pi ** (k - 1) / math.factorial(k - 1)


def hopf_map_coordinates(a, b, c):
    """``(cos a cos b, cos a sin b, sin a cos c, sin a sin c)`` on S^3 (broadcasting)."""
    a, b, c = np.broadcast_arrays(a, b, c)
    return np.stack([np.cos(a) * np.cos(b), np.cos(a) * np.sin(b), np.sin(a) * np.cos(c), np.sin(a) * np.sin(c)], -1)


def _gauss_legendre(n, lo, hi):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi - lo) * x + 0.5 * (hi + lo), 0.5 * (hi - lo) * w


class GrassmannQuadrature:
    """Nodes and weights on Gr_1(W).

    Args:
        basis: ``(2n, 2k)`` orthonormal columns of W in complex order
            ``(v1, J v1, ...)``.
        scheme: ``"mc"`` (Gaussian-normalized samples), ``"hopf"`` (k = 2
            product grid) or ``"point"`` (k = 1). Defaults to ``"point"`` for
            k = 1 and ``"mc"`` otherwise.
        count, seed: Monte Carlo sample size and seed.
        grid: ``(n_a, n_b, n_c)`` Hopf grid. Lines only need ``(a, c)`` because
            the phase ``b`` is redundant; ``n_b`` is used for the fiber circles.
        total_volume: override of the mu normalization (for mutation tests).
    """

    def __init__(self, basis, scheme=None, count=DEFAULT_MC_COUNT, seed=0, grid=DEFAULT_HOPF_GRID,
                 total_volume=None):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2 or basis.shape[1] % 2:
            raise ValueError(f"bad basis shape {basis.shape}")
        if complexity_defect(basis.T) > COMPLEX_TOL:
            raise ValueError("W is not a complex subspace")
        self.basis = basis
        self.k = basis.shape[1] // 2
        if scheme is None:
            scheme = "point" if self.k == 1 else "mc"
        if scheme == "point" and self.k != 1:
            raise ValueError("the point scheme needs k = 1")
        if scheme == "hopf" and self.k != 2:
            raise ValueError("the Hopf grid is implemented for k = 2 only")
        if scheme not in ("mc", "hopf", "point"):
            raise ValueError(f"unknown scheme {scheme!r}")
        self.scheme = scheme
        self.count = int(count)
        self.seed = seed
        self.grid = tuple(int(g) for g in grid)
        self.total_volume = fubini_study_volume(self.k) if total_volume is None else float(total_volume)

    @classmethod
    def from_projector(cls, P, **kw):
        return cls(P.basis, **kw)

    @property
    def n(self):
        return self.basis.shape[0] // 2

    def embed(self, y):
        """Map W-coordinates ``y`` (..., 2k) to ambient vectors."""
        return np.asarray(y) @ self.basis.T

    def _local_nodes(self, grid=None):
        if self.scheme == "point":
            y = np.zeros((1, 2))
            y[0, 0] = 1.0
            return y, np.array([self.total_volume])
        if self.scheme == "mc":
            rng = np.random.default_rng(self.seed)
            y = rng.standard_normal((self.count, 2 * self.k))
            y /= np.linalg.norm(y, axis=1, keepdims=True)
            return y, np.full(self.count, self.total_volume / self.count)
        na, _, nc = grid or self.grid
        a, wa = _gauss_legendre(na, 0.0, 0.5 * math.pi)
        c = 2.0 * math.pi * np.arange(nc) / nc
        A, Cc = np.meshgrid(a, c, indexing="ij")
        y = hopf_map_coordinates(A, 0.0, Cc).reshape(-1, 4)
        # sin a cos a integrates to 1/2 on [0, pi/2]
        w = (2.0 * wa * np.sin(a) * np.cos(a))[:, None] * np.full(nc, 1.0 / nc)[None, :]
        return y, self.total_volume * w.reshape(-1)

    def nodes(self):
        """Unit representatives ``xi`` (M, 2n) and weights summing to ``total_volume``."""
        y, w = self._local_nodes()
        return self.embed(y), w


@dataclass(frozen=True)
class LineIntegral:
    value: float
    error: float
    phase_violation: float
    nodes: int


def integrate_over_lines(q, g, phase_tol=PHASE_TOL, phase_checks=64):
    """``int_{Gr_1(W)} g dmu`` for a vectorized ``g: (M, 2n) -> (M,)``.

    The error is the Monte Carlo standard error, or for the Hopf grid the
    difference to a half-resolution grid. Phase invariance is spot-checked
    on up to ``phase_checks`` nodes at a random angle.

    Raises:
        PhaseInvarianceError: the relative phase violation exceeds ``phase_tol``.
    """
    xi, w = q.nodes()
    vals = np.asarray(g(xi), dtype=float).reshape(-1)
    value = float(np.sum(w * vals))
    if q.scheme == "mc":
        err = q.total_volume * float(np.std(vals, ddof=1)) / math.sqrt(len(vals)) if len(vals) > 1 else math.inf
    elif q.scheme == "hopf":
        na, nb, nc = q.grid
        y2, w2 = q._local_nodes((max(2, na // 2), nb, max(2, nc // 2)))
        coarse = float(np.sum(w2 * np.asarray(g(q.embed(y2)), dtype=float).reshape(-1)))
        err = abs(value - coarse)
    else:
        err = 0.0
    theta = np.random.default_rng(None if q.seed is None else q.seed + 1).uniform(0.0, 2.0 * math.pi)
    sub = xi[:phase_checks]
    ref = vals[:phase_checks]
    rot = np.asarray(g(rotate(sub, theta)), dtype=float).reshape(-1)
    violation = float(np.max(np.abs(rot - ref)) / (1.0 + np.max(np.abs(ref))))
    if violation > phase_tol:
        raise PhaseInvarianceError(f"integrand not invariant under e^(theta J): relative change {violation:.3g}")
    return LineIntegral(value=value, error=err, phase_violation=violation, nodes=len(vals))


@dataclass(frozen=True)
class HopfCheck:
    lhs: float
    rhs: float
    gap: float  # |lhs - rhs| / max(|lhs|, |rhs|, 1)


def _sphere_integral_k2(eta, grid):
    na, nb, nc = grid
    a, wa = _gauss_legendre(na, 0.0, 0.5 * math.pi)
    b = 2.0 * math.pi * np.arange(nb) / nb
    c = 2.0 * math.pi * np.arange(nc) / nc
    A, Bb, Cc = np.meshgrid(a, b, c, indexing="ij")
    x = hopf_map_coordinates(A, Bb, Cc)
    ca, sa = np.cos(A), np.sin(A)
    Fa = np.stack([-sa * np.cos(Bb), -sa * np.sin(Bb), ca * np.cos(Cc), ca * np.sin(Cc)], -1)
    Fb = np.stack([-ca * np.sin(Bb), ca * np.cos(Bb), 0 * A, 0 * A], -1)
    Fc = np.stack([0 * A, 0 * A, -sa * np.sin(Cc), sa * np.cos(Cc)], -1)

    def om(u, v):
        return np.sum(apply_j(u) * v, axis=-1)

    e = np.asarray(eta(x), dtype=float)

    def et(u):
        return np.sum(e * u, axis=-1)

    val = om(Fa, Fb) * et(Fc) - om(Fa, Fc) * et(Fb) + om(Fb, Fc) * et(Fa)
    orient = np.sign(np.linalg.det(np.stack([x, Fa, Fb, Fc], -1)))
    weights = wa[:, None, None] * (2.0 * math.pi / nb) * (2.0 * math.pi / nc)
    return float(np.sum(weights * val * orient))


def _fiber_integrals(eta, y, nb):
    """``int_{L cap S} eta`` along ``theta -> e^{theta J} y`` for each row of ``y``."""
    th = 2.0 * math.pi * np.arange(nb) / nb
    pts = rotate(y[:, None, :], th[None, :])
    e = np.asarray(eta(pts), dtype=float)
    return (2.0 * math.pi / nb) * np.sum(np.sum(e * apply_j(pts), axis=-1), axis=-1)


def hopf_fiber_check(ctx, eta, q, circle_nodes=256):
    """Compare ``int_{S^{2k-1}} Omega^{k-1} ^ eta`` with ``(k-1)! int_Gr (int_{L cap S} eta) dmu``.

    ``eta(y)`` returns the coefficient vector of a one-form on R^{2k} at the
    points ``y`` (..., 2k), in the W-coordinates of ``q``.
    """
    k = ctx.k
    if k != q.k:
        raise ValueError("forms context and quadrature disagree on k")
    if k == 1:
        th = 2.0 * math.pi * np.arange(circle_nodes) / circle_nodes
        pts = np.stack([np.cos(th), np.sin(th)], -1)
        lhs = float((2.0 * math.pi / circle_nodes) * np.sum(np.sum(np.asarray(eta(pts)) * apply_j(pts), -1)))
        fiber_nodes = circle_nodes
    elif k == 2:
        grid = q.grid if q.scheme == "hopf" else DEFAULT_HOPF_GRID
        lhs = _sphere_integral_k2(eta, grid)
        fiber_nodes = grid[1]
    else:
        raise ValueError("hopf_fiber_check supports k in {1, 2}")
    y, w = q._local_nodes()
    rhs = math.factorial(k - 1) * float(np.sum(w * _fiber_integrals(eta, y, fiber_nodes)))
    scale = max(abs(lhs), abs(rhs), 1.0)
    return HopfCheck(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs) / scale)


def primitive_form(y):
    """Coefficients of ``Lambda = sum p_j dq_j`` at ``y``."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    out[..., 1::2] = y[..., 0::2]
    return out
