"""Shadow volume ``f(t) = vol_2k(P psi_t(B))`` of a flowed unit ball.

The boundary of the shadow is tracked as the image of a sphere
``x_t: S^{2k-1} -> dB`` cut out by the critical-set equation
``(I - P) D psi_t(x)[J x] = 0`` and the normalization ``P x in R+ x_0``;
``f(t)`` is then the integral of ``alpha = y1 dy2 ^ ... ^ dy_2k`` over
``P psi_t(x_t)``, in orthonormal complex coordinates ``y`` on V.

Here ``psi_t(x) = flow_t(Psi x)`` with ``Psi = Phi U`` and U a unitary map of
V onto ``Phi^T V``, so that Psi commutes with P. The unit ball is U-invariant,
so the shadow is that of ``flow_t(Phi B)``.

An independent estimate comes from ``mc_shadow_volume``: flow random points,
project, and count occupied grid cells.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .grassmann import _gauss_legendre, hopf_map_coordinates
from .hamflow import DEFAULT_ORDER, DEFAULT_STEP, FlowError, flow
from .symplinalg import (
    SympLinearMap,
    apply_j,
    ball_volume,
    complex_basis,
    is_complex_subspace,
    j_matrix,
    unitary_between,
)

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 12
RESIDUAL_TOL = 1e-9
FD_STEP = 1e-5
CONT_STEP = 1e-2
CONT_MIN_STEP = 1e-5
DEFAULT_CIRCLE_NODES = 128
DEFAULT_HOPF_BOUNDARY_GRID = (12, 24, 24)


class NotComplexError(ValueError):
    """``Phi^T V`` is not a complex subspace."""


class BoundarySolveError(RuntimeError):
    """Newton continuation failed; carries the last reached time and iterate."""

    def __init__(self, message, t_reached, points):
        super().__init__(message)
        self.t_reached = t_reached
        self.points = points


class UnconvergedBoundaryError(ValueError):
    pass


def _as_matrix(Phi):
    return Phi.M if isinstance(Phi, SympLinearMap) else np.asarray(Phi, dtype=float)


# -- parametrization grids ------------------------------------------------

def _fourier_derivative(values, axis):
    N = values.shape[axis]
    m = np.fft.fftfreq(N, d=1.0 / N)
    if N % 2 == 0:
        m[N // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = N
    spec = np.fft.fft(values, axis=axis) * (1j * m).reshape(shape)
    return np.real(np.fft.ifft(spec, axis=axis))


def _collocation_matrix(nodes):
    """Differentiation matrix of polynomial interpolation on ``nodes``."""
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / np.prod(diff, axis=1)
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True)
class BoundaryGrid:
    """Nodes of S^{2k-1} in V-coordinates with tangent operators and weights.

    k = 1: ``N`` uniform angles. k = 2: Hopf coordinates ``(a, b, c)`` with
    Gauss-Legendre ``a`` and uniform ``b, c``; ``a``-derivatives use
    polynomial collocation, the periodic ones Fourier differentiation.
    """

    k: int
    shape: tuple
    params: np.ndarray  # (M, k_params) parameter values per node
    nodes: np.ndarray  # (M, 2k)
    weights: np.ndarray  # (M,), include the orientation sign
    _a_nodes: np.ndarray | None = None

    @classmethod
    def circle(cls, N=DEFAULT_CIRCLE_NODES):
        th = 2.0 * math.pi * np.arange(N) / N
        nodes = np.stack([np.cos(th), np.sin(th)], -1)
        return cls(1, (N,), th[:, None], nodes, np.full(N, 2.0 * math.pi / N))

    @classmethod
    def hopf(cls, grid=DEFAULT_HOPF_BOUNDARY_GRID):
        na, nb, nc = grid
        a, wa = _gauss_legendre(na, 0.0, 0.5 * math.pi)
        b = 2.0 * math.pi * np.arange(nb) / nb
        c = 2.0 * math.pi * np.arange(nc) / nc
        A, Bb, Cc = np.meshgrid(a, b, c, indexing="ij")
        nodes = hopf_map_coordinates(A, Bb, Cc)
        tang = cls._hopf_tangents_exact(A, Bb, Cc)
        orient = np.sign(np.linalg.det(np.stack([nodes] + tang, -1)))
        w = wa[:, None, None] * (2.0 * math.pi / nb) * (2.0 * math.pi / nc) * orient
        params = np.stack([A, Bb, Cc], -1).reshape(-1, 3)
        return cls(2, (na, nb, nc), params, nodes.reshape(-1, 4), w.reshape(-1), a)

    @classmethod
    def for_k(cls, k, resolution=None):
        if k == 1:
            return cls.circle(resolution or DEFAULT_CIRCLE_NODES)
        if k == 2:
            return cls.hopf(resolution or DEFAULT_HOPF_BOUNDARY_GRID)
        raise ValueError("boundary tracking supports k in {1, 2}; use mc_shadow_volume otherwise")

    @staticmethod
    def _hopf_tangents_exact(A, Bb, Cc):
        ca, sa = np.cos(A), np.sin(A)
        z = 0.0 * A
        Fa = np.stack([-sa * np.cos(Bb), -sa * np.sin(Bb), ca * np.cos(Cc), ca * np.sin(Cc)], -1)
        Fb = np.stack([-ca * np.sin(Bb), ca * np.cos(Bb), z, z], -1)
        Fc = np.stack([z, z, -sa * np.sin(Cc), sa * np.cos(Cc)], -1)
        return [Fa, Fb, Fc]

    @property
    def size(self):
        return self.nodes.shape[0]

    def tangents(self, values):
        """Parameter derivatives of nodal ``values`` (M, d): list of (M, d) arrays."""
        vals = values.reshape(self.shape + values.shape[1:])
        if self.k == 1:
            return [_fourier_derivative(vals, 0).reshape(values.shape)]
        D = _collocation_matrix(self._a_nodes)
        da = np.einsum("ij,j...->i...", D, vals)
        db = _fourier_derivative(vals, 1)
        dc = _fourier_derivative(vals, 2)
        return [d.reshape(values.shape) for d in (da, db, dc)]


def _perp_basis(y0):
    """Orthonormal bases (M, 2k, 2k-1) of the complements of unit vectors ``y0``."""
    M, d = y0.shape
    e1 = np.zeros(d)
    e1[0] = 1.0
    w = e1[None, :] - y0
    nw = np.linalg.norm(w, axis=1, keepdims=True)
    w = np.where(nw > 1e-12, w / np.maximum(nw, 1e-300), 0.0)
    Hh = np.eye(d)[None] - 2.0 * w[:, :, None] * w[:, None, :]
    return Hh[:, :, 1:]


# -- the shadow problem ---------------------------------------------------

class ShadowProblem:
    """``H``, ``Phi``, ``P`` together with the adapted frame ``Psi = Phi U``."""

    def __init__(self, H, Phi, P, flow_step=DEFAULT_STEP, order=DEFAULT_ORDER, fd_step=FD_STEP):
        M = _as_matrix(Phi)
        W = M.T @ P.basis
        if not is_complex_subspace(W.T):
            raise NotComplexError("Phi^T V is not a complex subspace")
        self.H = H
        self.Phi = M
        self.P = P
        self.U = unitary_between(P.basis, complex_basis(W.T))
        self.Psi = M @ self.U
        self.Vb = P.basis
        self.Qp = P.complement
        self.k = P.k
        self.n = P.n
        self.flow_step = flow_step
        self.order = order
        self.fd_step = fd_step
        self.Jm = j_matrix(self.n).astype(float)

    @property
    def omega(self):
        return ball_volume(2 * self.k)

    def psi(self, x, t, jacobian=True):
        return flow(self.H, x @ self.Psi.T, t, self.flow_step, Y0=self.Psi if jacobian else None,
                    jacobian=jacobian, order=self.order)

    def initial_points(self, grid):
        return grid.nodes @ self.Vb.T

    def equations(self, x, y0, t, with_jacobian=True):
        """Residuals ``F(x)`` (M, 2n) and optionally ``DF`` plus the flow data at x."""
        fr = self.psi(x, t)
        D = fr.jacobian
        Jx = apply_j(x)
        crit = np.einsum("ai,mij,mj->ma", self.Qp.T, D, Jx)
        sph = np.sum(x * x, axis=1) - 1.0
        Bperp = _perp_basis(y0)
        yv = x @ self.Vb
        nrm = np.einsum("mia,mi->ma", Bperp, yv)
        F = np.concatenate([crit, sph[:, None], nrm], axis=1)
        if not with_jacobian:
            return F, fr
        h = self.fd_step
        Dp = self.psi(x + h * Jx, t).jacobian
        Dm = self.psi(x - h * Jx, t).jacobian
        Msec = (Dp - Dm) / (2.0 * h)  # v -> D^2 psi[v, J x]
        dcrit = np.einsum("ai,mij->maj", self.Qp.T, Msec + D @ self.Jm)
        dsph = 2.0 * x[:, None, :]
        dnrm = np.einsum("mia,ji->maj", Bperp, self.Vb)
        DF = np.concatenate([dcrit, dsph, dnrm], axis=1)
        return F, fr, DF


@dataclass(frozen=True)
class ShadowBoundary:
    """Converged (or flagged) boundary nodes at time t."""

    t: float
    grid: BoundaryGrid
    points: np.ndarray  # (M, 2n) nodes x_t on the unit sphere
    residuals: np.ndarray  # (M,) critical-equation residual norms
    sphere_residuals: np.ndarray  # (M,) | |x| - 1 |
    converged: np.ndarray  # (M,) bool
    images: np.ndarray = field(repr=False)  # psi_t(x_t)
    jacobians: np.ndarray = field(repr=False)  # D psi_t(x_t)
    positive: np.ndarray = field(repr=False)  # P x_t is a positive multiple of x_0

    @property
    def all_converged(self):
        return bool(np.all(self.converged))

    def write_csv(self, path):
        pnames = ["theta"] if self.grid.k == 1 else ["a", "b", "c"]
        n2 = self.points.shape[1]
        names = [f"{c}{j + 1}" for j in range(n2 // 2) for c in ("p", "q")]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(pnames + names + ["residual"])
            for prm, x, r in zip(self.grid.params, self.points, self.residuals):
                w.writerow([repr(float(v)) for v in prm] + [repr(float(v)) for v in x] + [repr(float(r))])


def _newton(problem, x, y0, t, tol=NEWTON_TOL, maxiter=NEWTON_MAXITER):
    """Batched Newton; returns (x, converged mask, flow result, residual)."""
    conv = np.zeros(len(x), dtype=bool)
    for _ in range(maxiter):
        F, fr, DF = problem.equations(x, y0, t)
        res = np.max(np.abs(F), axis=1)
        conv = res <= tol
        if np.all(conv):
            return x, conv, fr, F
        try:
            dx = np.linalg.solve(DF, F[..., None])[..., 0]
        except np.linalg.LinAlgError:
            return x, conv, fr, F
        if not np.all(np.isfinite(dx)):
            return x, conv, fr, F
        x = x - np.where(conv[:, None], 0.0, dx)
    F, fr = problem.equations(x, y0, t, with_jacobian=False)
    res = np.max(np.abs(F), axis=1)
    return x, res <= max(tol, 1e-11), fr, F


class BoundaryTracker:
    """Continues the boundary nodes in t from ``x_0`` = the grid embedded in V."""

    def __init__(self, problem, grid=None, step=CONT_STEP, min_step=CONT_MIN_STEP):
        self.problem = problem
        self.grid = grid or BoundaryGrid.for_k(problem.k)
        if self.grid.k != problem.k:
            raise ValueError("grid dimension does not match k")
        self.y0 = self.grid.nodes
        self.step = step
        self.min_step = min_step
        self.t = 0.0
        self.x = problem.initial_points(self.grid)
        self._prev = None  # (t, x) for the secant predictor
        self.boundary = self._finish(self.x, 0.0)

    def _finish(self, x, t):
        F, fr = self.problem.equations(x, self.y0, t, with_jacobian=False)
        m = 2 * (self.problem.n - self.problem.k)
        crit = np.linalg.norm(F[:, :m], axis=1) if m else np.zeros(len(x))
        sphere = np.abs(np.linalg.norm(x, axis=1) - 1.0)
        positive = np.sum((x @ self.problem.Vb) * self.y0, axis=1) > 0
        conv = (crit <= RESIDUAL_TOL) & (sphere <= 1e-10) & (np.max(np.abs(F), axis=1) <= RESIDUAL_TOL) & positive
        return ShadowBoundary(t=t, grid=self.grid, points=x, residuals=crit, sphere_residuals=sphere,
                              converged=conv, images=fr.x, jacobians=fr.jacobian, positive=positive)

    def advance_to(self, target):
        """Continue to time ``target`` (either sign); returns the ShadowBoundary there."""
        if target == self.t:
            return self.boundary
        direction = math.copysign(1.0, target - self.t)
        h = self.step
        while self.t != target:
            dt = direction * min(h, abs(target - self.t))
            t_new = self.t + dt if abs(target - self.t) > h else target
            if self._prev is not None and np.sign(self.t - self._prev[0]) == direction:
                slope = (self.x - self._prev[1]) / (self.t - self._prev[0])
                guess = self.x + slope * (t_new - self.t)
            else:
                guess = self.x
            try:
                x_new, conv, _, _ = _newton(self.problem, guess, self.y0, t_new)
            except FlowError:  # an iterate left the integrable region: treat as a failed step
                conv = np.zeros(len(guess), dtype=bool)
                x_new = guess
            positive = np.sum((x_new @ self.problem.Vb) * self.y0, axis=1) > 0
            if np.all(conv) and np.all(positive):
                self._prev = (self.t, self.x)
                self.t, self.x = t_new, x_new
                h = min(self.step, 2.0 * h)
                continue
            h *= 0.5
            if h < self.min_step:
                raise BoundarySolveError(
                    f"Newton continuation stalled at t={self.t:.6g} (step below {self.min_step:g})",
                    self.t, self.x)
        self.boundary = self._finish(self.x, self.t)
        return self.boundary

    def reset(self):
        self.__init__(self.problem, self.grid, self.step, self.min_step)


def solve_boundary(H, Phi, P, t, grid=None, **kw):
    """Boundary nodes ``x_t`` by Newton continuation from ``t = 0``.

    Raises:
        NotComplexError: ``Phi^T V`` is not complex.
        BoundarySolveError: continuation stalled (carries the reached t).
    """
    problem = ShadowProblem(H, Phi, P, **kw)
    return BoundaryTracker(problem, grid).advance_to(t)


def boundary_shadow_volume(b, problem=None):
    """``f(t) = int (psi_t o x_t)^* alpha`` over the boundary grid.

    Raises:
        UnconvergedBoundaryError: some node did not converge.
    """
    if not b.all_converged:
        raise UnconvergedBoundaryError(f"{int(np.sum(~b.converged))} boundary nodes did not converge")
    Vb = problem.Vb if problem is not None else None
    if Vb is None:
        raise ValueError("problem (for the V-frame) is required")
    y = b.images @ Vb
    tang_x = b.grid.tangents(b.points)
    tang_y = [np.einsum("ai,mij,mj->ma", Vb.T, b.jacobians, tx) for tx in tang_x]
    if b.grid.k == 1:
        integrand = y[:, 0] * tang_y[0][:, 1]
    else:
        mat = np.stack([ty[:, 1:] for ty in tang_y], axis=1)
        integrand = y[:, 0] * np.linalg.det(mat)
    return float(np.sum(b.grid.weights * integrand))


def projected_curve(b, problem):
    """Planar curve ``P psi_t(x_t(theta))`` in V-coordinates (k = 1)."""
    return b.images @ problem.Vb


def self_intersections(curve):
    """Number of crossing pairs of non-adjacent segments of a closed polygon."""
    a = curve
    b = np.roll(curve, -1, axis=0)
    N = len(a)
    d1 = b - a

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    i, j = np.triu_indices(N, k=2)
    keep = ~((i == 0) & (j == N - 1))
    i, j = i[keep], j[keep]
    s1 = cross(d1[i], a[j] - a[i])
    s2 = cross(d1[i], b[j] - a[i])
    s3 = cross(d1[j], a[i] - a[j])
    s4 = cross(d1[j], b[i] - a[j])
    return int(np.sum((s1 * s2 < 0) & (s3 * s4 < 0)))


@dataclass(frozen=True)
class ShadowVolume:
    t: float
    volume: float
    error: float
    self_intersections: int | None
    boundary: ShadowBoundary = field(repr=False)


def shadow_volume_curve(H, Phi, P, t_values, grid=None, problem=None, **kw):
    """``f(t)`` on a set of times via one continuation per sign of t."""
    problem = problem or ShadowProblem(H, Phi, P, **kw)
    out = {}
    for sign in (1.0, -1.0):
        ts = sorted((t for t in t_values if (t > 0 if sign > 0 else t < 0)), key=abs)
        if not ts:
            continue
        tracker = BoundaryTracker(problem, grid)
        for t in ts:
            out[t] = _volume_record(tracker.advance_to(t), problem)
    if any(t == 0 for t in t_values):
        out[0.0] = _volume_record(BoundaryTracker(problem, grid).boundary, problem)
    return [out[t] for t in t_values]


def _volume_record(b, problem):
    vol = boundary_shadow_volume(b, problem)
    # the 1e-6 quadrature budget of the boundary integral plus the node residual contribution
    err = 1e-6 + float(np.max(b.residuals))
    crossings = self_intersections(projected_curve(b, problem)) if b.grid.k == 1 else None
    return ShadowVolume(t=b.t, volume=vol, error=err, self_intersections=crossings, boundary=b)


# -- Monte Carlo occupancy oracle ------------------------------------------

def _uniform_points(rng, count, dim, sphere):
    x = rng.standard_normal((count, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    if not sphere:
        x *= rng.uniform(size=(count, 1)) ** (1.0 / dim)
    return x


def _cell_keys(y, cell, offset):
    idx = np.floor((y + offset) / cell).astype(np.int64)
    lo = idx.min(axis=0)
    span = idx.max(axis=0) - lo + 1
    mult = np.cumprod(np.concatenate([[1], span[:-1]]))
    return np.unique((idx - lo) @ mult)


def _occupancy(y, cell, offsets):
    counts = [len(_cell_keys(y, cell, off)) for off in offsets]
    return np.array(counts, dtype=float) * cell ** y.shape[1]


@dataclass(frozen=True)
class MCShadowResult:
    """Occupancy estimates of a shadow volume.

    ``occupancy`` and ``coarse_occupancy`` are the raw occupied-cell volumes
    at ``cell`` and ``2 cell`` (mean over grid offsets); ``extrapolated`` is
    ``2 V(cell) - V(2 cell)``. ``estimate`` is calibrated: the occupancy
    ratio between time t and time 0 (same samples, same grids) times the
    exact linear shadow volume at time 0.
    """

    estimate: float
    error: float
    cells_occupied: int
    cell: float
    occupancy: float
    coarse_occupancy: float
    extrapolated: float
    reference_volume: float
    samples: int


def mc_shadow_volume(H, Phi, P, t, samples=1_000_000, cell=None, seed=0, sphere=None,
                     flow_step=None, order=DEFAULT_ORDER, offsets=4):
    """Occupancy estimate of ``vol_2k(P flow_t(Phi B))``.

    Points are drawn uniformly from the ball, or from its boundary sphere
    (default when n > k). The sphere suffices because every fiber of P meets
    the image of the ball in a compact set whose relative boundary lies on
    the image of the sphere.

    Raw occupancy overestimates by roughly surface times cell size and, in
    dimension four and up, underestimates through barely-touched boundary
    cells that saturate very slowly with the sample count. Both effects are
    nearly identical at time 0, where the volume is known exactly, so the
    returned ``estimate`` is the calibrated ratio. Its ``error`` combines the
    spread over grid offsets with the change between the two cell sizes.
    """
    from .symplinalg import linear_shadow_volume

    M = _as_matrix(Phi)
    n, k = P.n, P.k
    if sphere is None:
        sphere = n > k
    if cell is None:
        cell = 0.01 if k == 1 else 0.1
    rng = np.random.default_rng(seed)
    x = _uniform_points(rng, int(samples), 2 * n, sphere) @ M.T
    offs = [rng.uniform(0.0, 2.0 * cell, 2 * k) for _ in range(offsets)]
    y0 = x @ P.basis
    if t != 0 and np.any(H.coeffs):
        x = flow(H, x, t, flow_step or abs(t), jacobian=False, order=order).x
    y = x @ P.basis
    ref = linear_shadow_volume(M, P).volume
    fine_t, fine_0 = _occupancy(y, cell, offs), _occupancy(y0, cell, offs)
    coarse_t, coarse_0 = _occupancy(y, 2 * cell, offs), _occupancy(y0, 2 * cell, offs)
    ratio = ref * fine_t / fine_0
    ratio_coarse = ref * np.mean(coarse_t / coarse_0)
    est = float(np.mean(ratio))
    spread = float(np.std(ratio, ddof=1) / math.sqrt(len(ratio))) if len(ratio) > 1 else 0.0
    v1, v2 = float(np.mean(fine_t)), float(np.mean(coarse_t))
    return MCShadowResult(
        estimate=est,
        error=float(spread + abs(est - ratio_coarse)),
        cells_occupied=len(_cell_keys(y, cell, offs[0])),
        cell=cell,
        occupancy=v1,
        coarse_occupancy=v2,
        extrapolated=2.0 * v1 - v2,
        reference_volume=ref,
        samples=int(samples),
    )


def write_f_table(path, rows):
    """CSV with columns ``t, f, estimator, tolerance``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "f", "estimator", "tolerance"])
        for t, f, est, tol in rows:
            w.writerow([repr(float(t)), repr(float(f)), est, repr(float(tol))])
