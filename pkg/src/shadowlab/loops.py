"""Energy and symplectic area of 2pi-periodic loops in R^2n.

Fourier coefficients are taken with respect to ``e^{m theta J}``: pairing
``(p_j, q_j)`` into ``p_j + i q_j`` turns ``e^{theta J}`` into multiplication
by ``e^{i theta}``, so a plain DFT per complex coordinate gives the
expansion ``z(theta) = sum_m e^{m theta J} z_m``.

All functionals broadcast over leading batch axes: ``samples`` has shape
``(..., N, 2n)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .symplinalg import apply_j, to_complex, to_real

DEFAULT_SAMPLES = 256
DEFAULT_MODES = 100
MIN_SAMPLES = 8


class TooFewSamplesError(ValueError):
    pass


def theta_grid(N):
    return 2.0 * np.pi * np.arange(N) / N


def rotate(x, theta):
    """``e^{theta J} x`` (theta broadcasts against the leading axes of x)."""
    c = to_complex(x) * np.exp(1j * np.asarray(theta))[..., None]
    return to_real(c)


class FourierLoop:
    """Uniformly sampled loop together with its complex-structure Fourier data."""

    def __init__(self, samples, modes=None):
        samples = np.asarray(samples, dtype=float)
        if samples.ndim < 2 or samples.shape[-1] % 2:
            raise ValueError(f"samples must have shape (..., N, 2n), got {samples.shape}")
        N = samples.shape[-2]
        if N < MIN_SAMPLES:
            raise TooFewSamplesError(f"need at least {MIN_SAMPLES} samples, got {N}")
        if modes is None:
            modes = min(DEFAULT_MODES, (N - 1) // 2)
        if not 0 <= modes < N / 2:
            raise ValueError(f"retained modes must satisfy M < N/2 (M={modes}, N={N})")
        self.samples = samples
        self.M = int(modes)

    @property
    def N(self):
        return self.samples.shape[-2]

    @property
    def n(self):
        return self.samples.shape[-1] // 2

    @property
    def theta(self):
        return theta_grid(self.N)

    @cached_property
    def _spectrum(self):
        return np.fft.fft(to_complex(self.samples), axis=-2) / self.N

    @property
    def modes(self):
        return np.arange(-self.M, self.M + 1)

    @cached_property
    def coeffs(self):
        """Real coefficient vectors ``z_m`` for ``m = -M..M``, shape ``(..., 2M+1, 2n)``."""
        idx = self.modes % self.N
        return to_real(self._spectrum[..., idx, :])

    def coefficient(self, m):
        return self.coeffs[..., m + self.M, :]

    @classmethod
    def from_function(cls, func, N=DEFAULT_SAMPLES, modes=None):
        """Sample ``func(theta) -> (..., 2n)`` evaluated on the uniform grid."""
        th = theta_grid(N)
        vals = np.stack([np.asarray(func(t), dtype=float) for t in th], axis=-2)
        return cls(vals, modes)

    @classmethod
    def from_coefficients(cls, modes, coeffs, N=DEFAULT_SAMPLES, retain=None):
        """Synthesize ``sum_m e^{m theta J} z_m`` on N samples."""
        modes = np.asarray(modes, dtype=int)
        cc = to_complex(np.asarray(coeffs, dtype=float))  # (..., K, n)
        th = theta_grid(N)
        phase = np.exp(1j * np.outer(th, modes))  # (N, K)
        samples = to_real(np.einsum("tk,...kj->...tj", phase, cc))
        if retain is None:
            retain = min(DEFAULT_MODES, (N - 1) // 2)
        return cls(samples, retain)

    def resynthesize(self, N=None):
        """Samples rebuilt from the retained coefficients."""
        return FourierLoop.from_coefficients(self.modes, self.coeffs, N or self.N, self.M).samples

    def derivative_samples(self):
        """``z'(theta_i)`` by spectral differentiation (Nyquist mode dropped)."""
        N = self.N
        m = np.fft.fftfreq(N, d=1.0 / N)
        if N % 2 == 0:
            m[N // 2] = 0.0
        spec = self._spectrum * (1j * m)[:, None]
        return to_real(np.fft.ifft(spec, axis=-2) * N)

    def mean_square(self):
        """``(1/2pi) int |z|^2`` by the trapezoid rule."""
        return np.mean(np.sum(self.samples**2, axis=-1), axis=-1)

    def parseval_sum(self):
        return np.sum(self.coeffs**2, axis=(-2, -1))

    def to_json(self):
        return json.dumps(
            {
                "n": self.n,
                "samples": self.N,
                "modes": self.modes.tolist(),
                "coeffs": np.asarray(self.coeffs).tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls.from_coefficients(data["modes"], data["coeffs"], data["samples"])

    def write_csv(self, path):
        if self.samples.ndim != 2:
            raise ValueError("CSV export supports a single loop")
        header = ["theta"] + [f"{c}{j + 1}" for j in range(self.n) for c in ("p", "q")]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for t, row in zip(self.theta, self.samples):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path, modes=None):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(data[:, 1:], modes)


def loop_energy(z, method="spectral"):
    """``E(z) = 1/2 int |z'|^2``.

    ``method`` is ``"spectral"`` (differentiate samples) or ``"coefficients"``
    (``pi sum m^2 |z_m|^2``).
    """
    if method == "spectral":
        dz = z.derivative_samples()
        return 0.5 * (2.0 * np.pi) * np.mean(np.sum(dz**2, axis=-1), axis=-1)
    if method == "coefficients":
        m = z.modes.astype(float)
        return np.pi * np.sum(m**2 * np.sum(z.coeffs**2, axis=-1), axis=-1)
    raise ValueError(f"unknown method {method!r}")


def loop_area(z, method="spectral"):
    """``A(z) = 1/2 int Omega[z, z']``.

    ``method``: ``"spectral"``, ``"coefficients"`` (``pi sum m |z_m|^2``) or
    ``"primitive"`` (the pullback of ``Lambda = sum p_j dq_j``).
    """
    if method == "spectral":
        dz = z.derivative_samples()
        return 0.5 * (2.0 * np.pi) * np.mean(np.sum(apply_j(z.samples) * dz, axis=-1), axis=-1)
    if method == "coefficients":
        m = z.modes.astype(float)
        return np.pi * np.sum(m * np.sum(z.coeffs**2, axis=-1), axis=-1)
    if method == "primitive":
        dz = z.derivative_samples()
        return 2.0 * np.pi * np.mean(np.sum(z.samples[..., 0::2] * dz[..., 1::2], axis=-1), axis=-1)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class GapResult:
    gap: np.ndarray  # E - A from the coefficient formula
    energy: np.ndarray
    area: np.ndarray
    higher_mode_norm: np.ndarray  # sqrt(sum_{m not in {0,1}} |z_m|^2)
    is_harmonic_circle: np.ndarray
    gap_is_zero: np.ndarray


def energy_area_gap(z, tol=1e-8):
    """``E - A = pi sum m(m-1) |z_m|^2`` and the harmonic-circle test.

    ``is_harmonic_circle`` requires every mode outside {0, 1} to have norm at
    most ``sqrt(tol)``; ``gap_is_zero`` is ``gap <= tol``. Because
    ``gap >= 2 pi sum_{m not in {0,1}} |z_m|^2``, a zero gap implies the
    coefficient test.
    """
    m = z.modes.astype(float)
    power = np.sum(z.coeffs**2, axis=-1)
    gap = np.pi * np.sum(m * (m - 1.0) * power, axis=-1)
    mask = (z.modes != 0) & (z.modes != 1)
    higher = np.sqrt(np.sum(power[..., mask], axis=-1))
    return GapResult(
        gap=gap,
        energy=loop_energy(z, "coefficients"),
        area=loop_area(z, "coefficients"),
        higher_mode_norm=higher,
        is_harmonic_circle=np.max(np.sqrt(power[..., mask]), axis=-1) <= math.sqrt(tol),
        gap_is_zero=gap <= tol,
    )


def harmonic_circle_residual(z):
    """Max deviation of z from ``1/2(z(0)+z(pi)) + 1/2 e^{theta J}(z(0)-z(pi))``."""
    if z.N % 2:
        raise ValueError("need an even number of samples so that theta = pi is a node")
    z0 = z.samples[..., 0, :]
    zpi = z.samples[..., z.N // 2, :]
    th = z.theta
    centre = 0.5 * (z0 + zpi)[..., None, :]
    circ = rotate(0.5 * (z0 - zpi)[..., None, :], th)
    return np.max(np.linalg.norm(z.samples - centre - circ, axis=-1), axis=-1)


def random_band_limited(n, modes, N=DEFAULT_SAMPLES, batch=None, seed=None, decay=1.0):
    """Random loop(s) with Gaussian coefficients on ``|m| <= modes``, damped like ``(1+|m|)^-decay``."""
    rng = np.random.default_rng(seed)
    shape = () if batch is None else (batch,)
    ms = np.arange(-modes, modes + 1)
    coeffs = rng.standard_normal(shape + (ms.size, 2 * n))
    coeffs *= ((1.0 + np.abs(ms)) ** -decay)[:, None]
    return FourierLoop.from_coefficients(ms, coeffs, N, retain=max(modes, min(DEFAULT_MODES, (N - 1) // 2)))
