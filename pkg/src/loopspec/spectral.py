"""Fourier helpers on the uniform periodic grid ``s_j = 2*pi*j/M``.

Conventions used throughout the package:

* ``coefficients(f)`` returns ``c_n`` with ``f(s) = sum_n c_n exp(i n s)``,
  i.e. ``c_n = (1/2pi) int_0^{2pi} f(s) exp(-i n s) ds``.  The unitary
  coefficients ``(1/sqrt(2pi)) int f exp(-ins) ds`` equal ``sqrt(2pi) c_n``.
* Integrals over a period use the trapezoid rule, which is spectrally
  accurate for smooth periodic integrands.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

TWO_PI = 2.0 * np.pi


def grid(M: int) -> np.ndarray:
    return TWO_PI * np.arange(M) / M


def wavenumbers(M: int) -> np.ndarray:
    """Integer wavenumbers in numpy FFT order."""
    return np.fft.fftfreq(M, d=1.0 / M)


def next_pow2(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(max(n, 1)))))


def integrate(f: np.ndarray, axis: int = 0) -> np.ndarray:
    """Trapezoid integral over one period of uniformly sampled data."""
    f = np.asarray(f)
    return f.sum(axis=axis) * (TWO_PI / f.shape[axis])


def coefficients(f: np.ndarray, axis: int = 0) -> np.ndarray:
    return np.fft.fft(f, axis=axis) / np.asarray(f).shape[axis]


def derivative(f: np.ndarray, order: int = 1, axis: int = 0) -> np.ndarray:
    """Spectral derivative of real periodic samples.

    For odd orders the Nyquist mode is dropped (its derivative is not real);
    for even orders it is kept so that the second-derivative operator stays
    symmetric.
    """
    f = np.asarray(f, dtype=float)
    M = f.shape[axis]
    k = wavenumbers(M)
    mult = (1j * k) ** order
    if order % 2 == 1 and M % 2 == 0:
        mult[M // 2] = 0.0
    shape = [1] * f.ndim
    shape[axis] = M
    fh = np.fft.fft(f, axis=axis) * mult.reshape(shape)
    return np.fft.ifft(fh, axis=axis).real


def antiderivative(f: np.ndarray, axis: int = 0) -> np.ndarray:
    """``F(s) = int_0^s f`` for periodic samples, including the mean drift."""
    f = np.asarray(f, dtype=float)
    M = f.shape[axis]
    k = wavenumbers(M)
    shape = [1] * f.ndim
    shape[axis] = M
    fh = np.fft.fft(f, axis=axis)
    mean = np.take(fh, [0], axis=axis).real / M
    inv = np.zeros(M, dtype=complex)
    nz = k != 0
    inv[nz] = 1.0 / (1j * k[nz])
    if M % 2 == 0:
        inv[M // 2] = 0.0
    periodic = np.fft.ifft(fh * inv.reshape(shape), axis=axis).real
    periodic = periodic - np.take(periodic, [0], axis=axis)
    s = grid(M).reshape(shape)
    return periodic + mean * s


def evaluate(f: np.ndarray, s: np.ndarray, axis: int = 0) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

    The Nyquist coefficient is split evenly between ``+-M/2`` so the
    interpolant is real.  Output has the sample axis replaced by ``len(s)``
    and moved to the front.
    """
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    M = f.shape[0]
    c = np.fft.fft(f, axis=0) / M
    k = wavenumbers(M)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    phase = np.exp(1j * np.outer(s, k))
    if M % 2 == 0:
        phase[:, M // 2] = np.cos(s * (M // 2))
    out = phase @ c.reshape(M, -1)
    return out.real.reshape((len(s),) + f.shape[1:])


def resample(f: np.ndarray, M_new: int, axis: int = 0) -> np.ndarray:
    """Fourier resampling of periodic samples onto a uniform grid of size M_new."""
    f = np.asarray(f, dtype=float)
    if f.shape[axis] == M_new:
        return f.copy()
    return signal.resample(f, M_new, axis=axis)


def second_derivative_matrix(M: int) -> np.ndarray:
    """Dense Fourier differentiation matrix for d^2/ds^2 (M even).

    Symmetric; its eigenvalues are ``-n^2`` for ``|n| < M/2`` and
    ``-(M/2)^2`` for the Nyquist mode.
    """
    if M % 2:
        raise ValueError("M must be even")
    h = TWO_PI / M
    j = np.arange(M)
    diff = j[:, None] - j[None, :]
    with np.errstate(divide="ignore"):
        D2 = -0.5 * (-1.0) ** diff / np.sin(0.5 * h * diff) ** 2
    D2[j, j] = -np.pi**2 / (3.0 * h**2) - 1.0 / 6.0
    return D2
