"""Pure numpy implementations of the hot kernels.

Same call signatures as the compiled ``_kernels`` extension; selected by
:mod:`shadowlab._backend` when the extension is missing or disabled.

Polynomials are stored as an exponent table ``exps`` of shape ``(m, d)`` and
coefficients ``coeffs`` of shape ``(m,)``. Time-dependent Hamiltonians carry
an extra ``term`` index per monomial and a ``weights`` table whose row ``i``
holds the ascending coefficients of the scalar weight polynomial of term
``i``.
"""

from __future__ import annotations

import numpy as np

# Suzuki-Yoshida triple jump: three midpoint substeps give a symmetric 4th-order map.
_TJ1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_TJ2 = 1.0 - 2.0 * _TJ1

STATUS_OK = 0
STATUS_NOT_CONVERGED = 1
STATUS_BLOWUP = 2


def substep_fractions(order):
    if order == 2:
        return (1.0,)
    if order == 4:
        return (_TJ1, _TJ2, _TJ1)
    raise ValueError(f"unsupported integrator order {order}")


def apply_j(v):
    """Apply the standard complex structure J(p, q) = (-q, p) pairwise on the last axis."""
    out = np.empty_like(v)
    out[..., 0::2] = -v[..., 1::2]
    out[..., 1::2] = v[..., 0::2]
    return out


def _tables(exps):
    exps = np.asarray(exps, dtype=np.int64)
    d = exps.shape[1]
    eye = np.eye(d, dtype=np.int64)
    g_exps = np.clip(exps[None, :, :] - eye[:, None, :], 0, None)
    g_fac = exps.T.astype(float)
    h_exps = np.clip(
        exps[None, None, :, :] - eye[:, None, None, :] - eye[None, :, None, :], 0, None
    )
    h_fac = (exps.T[:, None, :] * (exps.T[None, :, :] - eye[:, :, None])).astype(float)
    return g_exps, g_fac, h_exps, h_fac


def poly_eval(exps, coeffs, x):
    x = np.atleast_2d(x)
    pw = np.prod(x[:, None, :] ** np.asarray(exps)[None], axis=-1)
    return pw @ np.asarray(coeffs, dtype=float)


def poly_grad(exps, coeffs, x, _tabs=None):
    x = np.atleast_2d(x)
    g_exps, g_fac, _, _ = _tabs or _tables(exps)
    pw = np.prod(x[:, None, None, :] ** g_exps[None], axis=-1)
    return np.einsum("bim,im->bi", pw, g_fac * coeffs[None, :])


def poly_grad_hess(exps, coeffs, x, _tabs=None):
    x = np.atleast_2d(x)
    g_exps, g_fac, h_exps, h_fac = _tabs or _tables(exps)
    coeffs = np.asarray(coeffs, dtype=float)
    pw = np.prod(x[:, None, None, :] ** g_exps[None], axis=-1)
    grad = np.einsum("bim,im->bi", pw, g_fac * coeffs[None, :])
    pw2 = np.prod(x[:, None, None, None, :] ** h_exps[None], axis=-1)
    hess = np.einsum("bijm,ijm->bij", pw2, h_fac * coeffs[None, None, :])
    return grad, hess


def _weighted(coeffs, term, weights, s):
    w = np.polynomial.polynomial.polyval(s, np.asarray(weights, dtype=float).T)
    return coeffs * np.atleast_1d(w)[term]


def midpoint_flow(exps, coeffs, term, weights, x0, Y0, t0, h, nsteps, order=2,
                  tol=1e-13, maxiter=100, bound=1e6):
    """Integrate ``nsteps`` implicit-midpoint steps of size ``h`` from time ``t0``.

    ``x0`` has shape ``(B, d)``; ``Y0`` is ``None`` or ``(B, d, d)`` and is
    propagated by the exact derivative of the discrete map (a Cayley
    transform, hence symplectic to rounding).

    Returns ``(x, Y, status, iters)`` where ``iters`` is the largest number of
    fixed-point sweeps any substep needed.
    """
    exps = np.asarray(exps, dtype=np.int64)
    coeffs = np.asarray(coeffs, dtype=float)
    term = np.asarray(term, dtype=np.int64)
    x = np.array(x0, dtype=float, copy=True)
    Y = None if Y0 is None else np.array(Y0, dtype=float, copy=True)
    d = x.shape[1]
    tabs = _tables(exps)
    eye = np.eye(d)
    fracs = substep_fractions(order)
    worst = 0
    s = t0
    # divergence is reported through the status code
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(nsteps):
            for frac in fracs:
                dt = frac * h
                c = _weighted(coeffs, term, weights, s + 0.5 * dt)
                x1 = x + dt * apply_j(poly_grad(exps, c, x, tabs))
                for it in range(1, maxiter + 1):
                    mid = 0.5 * (x + x1)
                    x_new = x + dt * apply_j(poly_grad(exps, c, mid, tabs))
                    delta = np.max(np.abs(x_new - x1), axis=1)
                    x1 = x_new
                    if np.all(delta <= tol * (1.0 + np.max(np.abs(x1), axis=1))):
                        break
                else:
                    return x1, Y, STATUS_NOT_CONVERGED, maxiter
                worst = max(worst, it)
                if Y is not None:
                    _, hess = poly_grad_hess(exps, c, 0.5 * (x + x1), tabs)
                    A = apply_j(np.swapaxes(hess, 1, 2)).swapaxes(1, 2)
                    Y = np.linalg.solve(eye - 0.5 * dt * A, Y + 0.5 * dt * (A @ Y))
                x = x1
                if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > bound:
                    return x, Y, STATUS_BLOWUP, worst
                s += dt
    return x, Y, STATUS_OK, worst
