"""Symplectic and complex linear algebra on R^2n.

Coordinates are ordered ``(p1, q1, ..., pn, qn)``; the complex structure is
``J(p, q) = (-q, p)`` on every pair and the symplectic form is represented as
``Omega[u, v] = (J u) . v``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg

COMPLEX_TOL = 1e-9
VOLUME_RTOL = 1e-7
SYMPLECTIC_TOL = 1e-10
DET_TOL = 1e-8


class NotSymplecticError(ValueError):
    """Raised when a matrix fails the symplecticity check."""


class DependentVectorsError(ValueError):
    """Raised when vectors required to be independent are (numerically) dependent."""


def ball_volume(dim):
    """Volume of the unit ball in R^dim (closed form, ``pi^k / k!`` for dim = 2k)."""
    if dim % 2 == 0:
        k = dim // 2
        return math.pi**k / math.factorial(k)
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def j_matrix(n):
    """The 2n x 2n matrix of the standard complex structure."""
    J = np.zeros((2 * n, 2 * n), dtype=np.int64)
    for j in range(n):
        J[2 * j, 2 * j + 1] = -1
        J[2 * j + 1, 2 * j] = 1
    return J


def apply_j(v):
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def omega(u, v):
    """Symplectic pairing ``Omega[u, v]`` (broadcasts over leading axes)."""
    return np.sum(apply_j(u) * np.asarray(v, dtype=float), axis=-1)


def symplectic_defect(M):
    """Max-entry norm of ``M^T J M - J``."""
    M = np.asarray(M, dtype=float)
    J = j_matrix(M.shape[0] // 2)
    return float(np.max(np.abs(M.T @ J @ M - J)))


def to_complex(x):
    """Map real vectors ``(..., 2n)`` to complex vectors ``(..., n)``: z_j = p_j + i q_j."""
    x = np.asarray(x, dtype=float)
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z):
    """Inverse of :func:`to_complex`."""
    z = np.asarray(z)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def realify(Mc):
    """Real 2n x 2n matrix of a complex n x n matrix acting on C^n."""
    Mc = np.asarray(Mc, dtype=complex)
    n = Mc.shape[0]
    M = np.empty((2 * n, 2 * n))
    M[0::2, 0::2] = Mc.real
    M[0::2, 1::2] = -Mc.imag
    M[1::2, 0::2] = Mc.imag
    M[1::2, 1::2] = Mc.real
    return M


def orthonormal_basis(vectors, rtol=1e-12):
    """Orthonormal basis (as columns) of the span of ``vectors`` given as rows.

    Raises:
        DependentVectorsError: if the rows are numerically dependent.
    """
    A = np.atleast_2d(np.asarray(vectors, dtype=float))
    Q, R = np.linalg.qr(A.T)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag.min() <= rtol * max(diag.max(), 1.0):
        raise DependentVectorsError("vectors are linearly dependent")
    return Q


def complexity_defect(basis):
    """``||(I - Q) J Q||_2`` for the orthogonal projector ``Q`` onto span(rows of ``basis``)."""
    Qb = orthonormal_basis(basis)
    JQ = apply_j(Qb.T).T
    resid = JQ - Qb @ (Qb.T @ JQ)
    return float(np.linalg.norm(resid, 2))


def is_complex_subspace(basis, tol=COMPLEX_TOL):
    """Whether the span of the rows of ``basis`` is J-invariant."""
    return complexity_defect(basis) <= tol


@dataclass(frozen=True)
class SympLinearMap:
    """A linear symplectic automorphism, certified at construction."""

    M: np.ndarray
    defect: float = field(init=False)

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
            raise ValueError(f"expected a square matrix of even size, got {M.shape}")
        M.setflags(write=False)
        object.__setattr__(self, "M", M)
        defect = symplectic_defect(M)
        object.__setattr__(self, "defect", defect)
        if defect > SYMPLECTIC_TOL:
            raise NotSymplecticError(f"symplectic defect {defect:.3e} exceeds {SYMPLECTIC_TOL:g}")
        det = np.linalg.det(M)
        if abs(det - 1.0) > DET_TOL:
            raise NotSymplecticError(f"determinant {det!r} differs from 1")

    @property
    def n(self):
        return self.M.shape[0] // 2

    @classmethod
    def identity(cls, n):
        return cls(np.eye(2 * n))

    def inverse(self):
        # M^{-1} = -J M^T J for symplectic M; exact in the symplectic group.
        J = j_matrix(self.n)
        return SympLinearMap(-J @ self.M.T @ J)

    def inverse_matrix(self):
        J = j_matrix(self.n)
        return -J @ self.M.T @ J

    def __matmul__(self, other):
        if isinstance(other, SympLinearMap):
            return SympLinearMap(self.M @ other.M)
        return self.M @ other


@dataclass(frozen=True)
class ComplexProjector:
    """Orthogonal projector onto a complex subspace V of real dimension 2k.

    ``basis`` holds 2k orthonormal columns ordered ``(v1, J v1, ..., vk, J vk)``,
    so that the coordinates it defines on V identify V with C^k.
    """

    basis: np.ndarray
    P: np.ndarray = field(init=False)

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim != 2 or B.shape[1] % 2 or B.shape[0] % 2:
            raise ValueError(f"bad basis shape {B.shape}")
        if np.max(np.abs(B.T @ B - np.eye(B.shape[1]))) > 1e-10:
            raise ValueError("basis columns are not orthonormal")
        if complexity_defect(B.T) > COMPLEX_TOL:
            raise ValueError("subspace is not complex")
        B.setflags(write=False)
        P = B @ B.T
        P.setflags(write=False)
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "P", P)

    @property
    def n(self):
        return self.basis.shape[0] // 2

    @property
    def k(self):
        return self.basis.shape[1] // 2

    @property
    def complement(self):
        """Orthonormal basis of V^perp, also in complex order."""
        if self.k == self.n:
            return np.zeros((2 * self.n, 0))
        return complex_basis(complement_rows(self.basis.T))

    @classmethod
    def coordinate(cls, n, k, pairs=None):
        """Projector onto the coordinate planes ``(p_j, q_j)`` for j in ``pairs`` (default the first k)."""
        pairs = range(k) if pairs is None else pairs
        B = np.zeros((2 * n, 2 * len(pairs)))
        for col, j in enumerate(pairs):
            B[2 * j, 2 * col] = 1.0
            B[2 * j + 1, 2 * col + 1] = 1.0
        return cls(B)

    @classmethod
    def from_span(cls, vectors):
        """Projector onto the span of the given rows (must be a complex subspace)."""
        return cls(complex_basis(vectors))

    @classmethod
    def random(cls, n, k, seed=None):
        rng = np.random.default_rng(seed)
        Z = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
        Q, _ = np.linalg.qr(Z)
        return cls(np.column_stack([c for q in Q.T for c in (to_real(q), apply_j(to_real(q)))]))

    def check(self, tol=1e-10):
        """Residuals of the defining identities (P^2 = P, P^T = P, PJ = JP, P basis = basis)."""
        P = self.P
        J = j_matrix(self.n)
        return {
            "idempotent": float(np.max(np.abs(P @ P - P))),
            "symmetric": float(np.max(np.abs(P - P.T))),
            "commutes_with_J": float(np.max(np.abs(P @ J - J @ P))),
            "fixes_basis": float(np.max(np.abs(P @ self.basis - self.basis))),
            "rank": int(np.linalg.matrix_rank(P, tol=tol)),
        }


def complex_basis(vectors):
    """Orthonormal basis ``(v1, J v1, ...)`` (columns) of a J-invariant span."""
    Q = orthonormal_basis(vectors)
    if Q.shape[1] % 2:
        raise ValueError("odd-dimensional span cannot be complex")
    if complexity_defect(Q.T) > COMPLEX_TOL:
        raise ValueError("span is not complex")
    Zc = to_complex(Q.T).T  # columns of complex vectors spanning V over C
    # complex rank-revealing QR picks k complex-independent columns
    _, R, piv = scipy.linalg.qr(Zc, mode="economic", pivoting=True)
    k = Q.shape[1] // 2
    U, _ = np.linalg.qr(Zc[:, piv[:k]])
    cols = []
    for u in U.T:
        r = to_real(u)
        cols.extend([r, apply_j(r)])
    return np.column_stack(cols)


def complement_rows(basis_rows):
    """Rows spanning the orthogonal complement of the span of ``basis_rows``."""
    B = orthonormal_basis(basis_rows)
    N = scipy.linalg.null_space(B.T)
    return N.T


def complex_unitary_completion(basis):
    """Full 2n x 2n unitary (orthogonal + symplectic) matrix whose first columns are ``basis``.

    ``basis`` must already be in complex order ``(v1, J v1, ...)``.
    """
    n = basis.shape[0] // 2
    k = basis.shape[1] // 2
    Vc = to_complex(basis[:, 0::2].T).T  # n x k complex, orthonormal
    if k == n:
        Uc = Vc
    else:
        rng = np.random.default_rng(0)
        extra = rng.standard_normal((n, n - k)) + 1j * rng.standard_normal((n, n - k))
        extra -= Vc @ (Vc.conj().T @ extra)
        Q, _ = np.linalg.qr(extra)
        Uc = np.column_stack([Vc, Q])
    return realify(Uc)


def unitary_between(V_basis, W_basis):
    """A unitary U of R^2n with ``U V = W`` mapping complex bases column-wise."""
    UV = complex_unitary_completion(V_basis)
    UW = complex_unitary_completion(W_basis)
    return UW @ UV.T


def random_symplectic(n, seed=None, scale=0.5):
    """``exp(J S)`` for a random symmetric ``S`` with entries uniform in [-scale, scale]."""
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    rng = np.random.default_rng(seed)
    A = rng.uniform(-scale, scale, size=(2 * n, 2 * n))
    S = np.triu(A) + np.triu(A, 1).T
    return SympLinearMap(scipy.linalg.expm(j_matrix(n) @ S))


def random_unitary(n, seed=None):
    """Random unitary automorphism of C^n as a real orthogonal symplectic matrix."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    Q = Q * (np.diag(R) / np.abs(np.diag(R)))
    return SympLinearMap(realify(Q))


def hamiltonian_matrix(S, n=None):
    """``J S`` for symmetric ``S``: the linear vector field of ``H = x^T S x / 2``."""
    S = np.asarray(S, dtype=float)
    return j_matrix(S.shape[0] // 2) @ (0.5 * (S + S.T))


# ---------------------------------------------------------------------------
# exterior forms


@dataclass(frozen=True)
class FormsContext:
    """Constant-coefficient forms on R^2n used by the shadow computations.

    ``omega_k`` pairs the first k coordinate planes, ``omega_hat`` the rest;
    ``alpha = p1 dq1 ^ dp2 ^ dq2 ^ ... ^ dpk ^ dqk`` and ``beta`` satisfy
    ``Omega^k = k! (d alpha + beta)``.
    """

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got n={self.n}, k={self.k}")

    @property
    def J(self):
        return j_matrix(self.n)

    def omega(self, u, v):
        return omega(u, v)

    def omega_k(self, u, v):
        return _partial_omega(u, v, range(self.k))

    def omega_hat(self, u, v):
        return _partial_omega(u, v, range(self.k, self.n))

    def lam(self, x, u):
        """Primitive one-form ``Lambda = sum p_j dq_j`` at ``x`` applied to ``u``."""
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return np.sum(x[..., 0::2] * u[..., 1::2], axis=-1)

    def d_alpha(self, vectors):
        """``dp1 ^ dq1 ^ ... ^ dpk ^ dqk`` on 2k vectors (rows)."""
        V = np.asarray(vectors, dtype=float)
        return np.linalg.det(V[..., : 2 * self.k].swapaxes(-1, -2))

    def alpha(self, x, vectors):
        """``alpha`` at base point ``x`` on 2k-1 vectors (rows)."""
        V = np.asarray(vectors, dtype=float)
        x = np.asarray(x, dtype=float)
        return x[..., 0] * np.linalg.det(V[..., 1 : 2 * self.k].swapaxes(-1, -2))

    def beta(self, vectors):
        """``beta``: the sum of ``dp_I ^ dq_I`` over k-subsets I of pairs meeting the tail."""
        V = np.asarray(vectors, dtype=float)
        total = 0.0
        for subset in itertools.combinations(range(self.n), self.k):
            if subset[-1] < self.k:
                continue
            cols = [c for j in subset for c in (2 * j, 2 * j + 1)]
            total = total + np.linalg.det(V[..., cols].swapaxes(-1, -2))
        return total

    def omega_power(self, vectors, method="auto"):
        return omega_power_eval(self, vectors, method=method)


def _partial_omega(u, v, pairs):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    total = 0.0
    for j in pairs:
        total = total + u[..., 2 * j] * v[..., 2 * j + 1] - u[..., 2 * j + 1] * v[..., 2 * j]
    return total


@lru_cache(maxsize=None)
def _pair_permutations(size):
    perms = np.array(list(itertools.permutations(range(size))), dtype=np.int64)
    # sign via inversion count
    inv = np.zeros(len(perms), dtype=np.int64)
    for i in range(size):
        for j in range(i + 1, size):
            inv += perms[:, i] > perms[:, j]
    signs = np.where(inv % 2 == 0, 1.0, -1.0)
    return perms, signs


@lru_cache(maxsize=None)
def _perfect_matchings(size):
    """All perfect matchings of range(size) with their Pfaffian signs."""

    def rec(items):
        if not items:
            return [((), 1)]
        first, rest = items[0], items[1:]
        out = []
        for idx, partner in enumerate(rest):
            remaining = rest[:idx] + rest[idx + 1 :]
            for pairs, sign in rec(remaining):
                out.append((((first, partner),) + pairs, sign * (-1) ** idx))
        return out

    matchings = rec(tuple(range(size)))
    pairs = np.array([m for m, _ in matchings], dtype=np.int64)
    signs = np.array([s for _, s in matchings], dtype=float)
    return pairs, signs


def omega_gram(vectors):
    """Antisymmetric matrix ``Omega[u_i, u_j]`` of a tuple (rows; batches allowed)."""
    U = np.asarray(vectors, dtype=float)
    return np.einsum("...ia,...ja->...ij", apply_j(U), U)


def omega_power_eval(ctx, vectors, method="auto"):
    """Evaluate the 2k-form ``Omega^k`` on 2k vectors.

    ``vectors`` has shape ``(2k, 2n)`` or ``(batch, 2k, 2n)``. The
    ``"permutation"`` method sums over all of S_2k; ``"matching"`` expands the
    Pfaffian of ``Omega[u_i, u_j]`` over perfect matchings. ``"auto"`` uses
    permutations for 2k <= 6.
    """
    U = np.asarray(vectors, dtype=float)
    if U.shape[-2] != 2 * ctx.k or U.shape[-1] != 2 * ctx.n:
        raise ValueError(
            f"expected {2 * ctx.k} vectors in R^{2 * ctx.n}, got shape {U.shape[-2:]}"
        )
    size = 2 * ctx.k
    if method == "auto":
        method = "permutation" if size <= 6 else "matching"
    M = omega_gram(U)
    if method == "permutation":
        perms, signs = _pair_permutations(size)
        vals = M[..., perms[:, 0::2], perms[:, 1::2]]  # (..., n_perm, k)
        return np.prod(vals, axis=-1) @ signs / 2**ctx.k
    if method == "matching":
        pairs, signs = _perfect_matchings(size)
        vals = M[..., pairs[..., 0], pairs[..., 1]]  # (..., n_match, k)
        return math.factorial(ctx.k) * (np.prod(vals, axis=-1) @ signs)
    raise ValueError(f"unknown method {method!r}")


def wedge_norm(vectors):
    """Volume of the prism spanned by the rows: sqrt of the Gram determinant."""
    U = np.asarray(vectors, dtype=float)
    G = np.einsum("...ia,...ja->...ij", U, U)
    det = np.linalg.det(G)
    return np.sqrt(np.maximum(det, 0.0))


@dataclass(frozen=True)
class WirtingerResult:
    lhs: float
    rhs: float
    gap: float
    is_equality: bool
    span_complex: bool
    complexity_defect: float


def wirtinger_check(ctx, vectors, tol=COMPLEX_TOL):
    """Compare ``|Omega^k[u]|`` with ``k! |u_1 ^ ... ^ u_2k|`` for one tuple."""
    U = np.asarray(vectors, dtype=float)
    vol = float(wedge_norm(U))
    scale = float(np.prod(np.linalg.norm(U, axis=1)))
    if vol <= 1e-12 * max(scale, 1e-300):
        raise DependentVectorsError("Wirtinger check needs independent vectors")
    lhs = abs(float(omega_power_eval(ctx, U)))
    rhs = math.factorial(ctx.k) * vol
    gap = rhs - lhs
    defect = complexity_defect(U)
    return WirtingerResult(
        lhs=lhs,
        rhs=rhs,
        gap=gap,
        is_equality=gap <= tol * rhs,
        span_complex=defect <= tol,
        complexity_defect=defect,
    )


# ---------------------------------------------------------------------------
# volumes of linear shadows and sections


@dataclass(frozen=True)
class VolumeResult:
    volume: float
    equality: bool
    gap: float  # volume / omega_2k - 1
    complexity_defect: float
    volume_equality: bool


def _as_symplectic(Phi):
    return Phi if isinstance(Phi, SympLinearMap) else SympLinearMap(Phi)


def linear_shadow_volume(Phi, P):
    """2k-volume of ``P Phi(B)`` for the unit ball B.

    ``equality`` is the complexity test on ``Phi^T V``; ``volume_equality``
    compares the volume with the unit-ball volume at relative tolerance 1e-7.
    """
    Phi = _as_symplectic(Phi)
    k = P.k
    w = ball_volume(2 * k)
    W = Phi.M.T @ P.basis  # spans Phi^T V = ran A^T
    Xi = orthonormal_basis(W.T)
    A = P.basis.T @ Phi.M  # A = P Phi in V-coordinates
    G = (A @ Xi).T @ (A @ Xi)
    ratio = math.sqrt(max(np.linalg.det(G), 0.0))
    defect = complexity_defect(Xi.T)
    return VolumeResult(
        volume=w * ratio,
        equality=defect <= COMPLEX_TOL,
        gap=ratio - 1.0,
        complexity_defect=defect,
        volume_equality=abs(ratio - 1.0) <= VOLUME_RTOL,
    )


def section_volume(Phi, P):
    """2k-volume of ``V cap Phi(B)``; equality iff ``Phi^-1 V`` is complex."""
    Phi = _as_symplectic(Phi)
    w = ball_volume(2 * P.k)
    Minv = Phi.inverse_matrix()
    C = Minv @ P.basis
    G = C.T @ C
    ratio = 1.0 / math.sqrt(np.linalg.det(G))
    defect = complexity_defect(C.T)
    return VolumeResult(
        volume=w * ratio,
        equality=defect <= COMPLEX_TOL,
        gap=ratio - 1.0,
        complexity_defect=defect,
        volume_equality=abs(ratio - 1.0) <= VOLUME_RTOL,
    )


def det_on_subspace(A, W):
    """``|det A|_W|`` for a linear map A and a subspace W (rows or orthonormal columns)."""
    A = np.asarray(A, dtype=float)
    Wb = orthonormal_basis(np.asarray(W, dtype=float))
    AW = A @ Wb
    return math.sqrt(max(np.linalg.det(AW.T @ AW), 0.0))


@dataclass(frozen=True)
class MaxJacobian:
    basis: np.ndarray  # orthonormal columns spanning ran A^T
    value: float


def max_jacobian_subspace(A, rtol=1e-10):
    """Subspace maximizing ``|det A|_W|`` over the Grassmannian: ``ran A^T``.

    ``A`` is an ``m x N`` matrix of rank m, or an ``N x N`` matrix whose rank
    equals its numerical rank (e.g. ``P Phi``); the target dimension is the rank.
    """
    A = np.asarray(A, dtype=float)
    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > rtol * s[0])) if s.size and s[0] > 0 else 0
    if A.shape[0] < A.shape[1] and rank < A.shape[0]:
        raise DependentVectorsError("A is not onto")
    if rank == 0:
        raise DependentVectorsError("A is zero")
    U, s, Vt = np.linalg.svd(A)
    basis = Vt[:rank].T
    return MaxJacobian(basis=basis, value=det_on_subspace(A, basis.T))
