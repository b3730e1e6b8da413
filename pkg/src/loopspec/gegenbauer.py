"""Dirichlet spectrum of ``K_g = -d^2/ds^2 + g sec^2 s`` on ``(-pi/2, pi/2)``.

With ``a = (1 + sqrt(1 + 4g)) / 2`` the eigenvalues are ``(n + a)^2`` and the
eigenfunctions are ``cos^a(s) C_n^(a)(sin s)``, ``C^(a)`` the Gegenbauer
polynomial with parameter ``a`` (weight ``(1 - z^2)^(a - 1/2)``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .eigensolver import dirichlet_spectrum, richardson
from .errors import BoundaryViolation, OutOfRange
from .quadrature import graded_gauss, tanh_sinh

HALF_PI = 0.5 * np.pi
QUANTIZATION_TOL = 1e-12


def exponent_a(g: float) -> float:
    if not g >= -0.25:
        raise OutOfRange(f"g must be >= -1/4, got {g}")
    return 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * g))


def _strict_a(g: float) -> float:
    if not g > -0.25:
        raise OutOfRange(f"g must be > -1/4, got {g}")
    return exponent_a(g)


def eigenvalue(g: float, n: int) -> float:
    if n < 0:
        raise OutOfRange("n must be nonnegative")
    return (n + _strict_a(g)) ** 2


def gegenbauer(n: int, lam: float, z):
    """``C_n^(lam)(z)`` by the three-term recurrence."""
    z = np.asarray(z, dtype=float)
    c_prev = np.ones_like(z)
    if n == 0:
        return c_prev
    c = 2.0 * lam * z
    for k in range(1, n):
        c_prev, c = c, (2.0 * z * (k + lam) * c - (k + 2.0 * lam - 1.0) * c_prev) / (k + 1)
    return c


def gegenbauer_norm(n: int, lam: float) -> float:
    """``int_{-1}^{1} (1-z^2)^(lam-1/2) C_n^(lam)(z)^2 dz``."""
    log = (np.log(np.pi) + (1 - 2 * lam) * np.log(2.0) + gammaln(n + 2 * lam)
           - gammaln(n + 1) - np.log(n + lam) - 2 * gammaln(lam))
    return float(np.exp(log))


@dataclass(frozen=True)
class GegenbauerSpectrum:
    g: float
    a: float

    @classmethod
    def of(cls, g: float) -> "GegenbauerSpectrum":
        return cls(float(g), _strict_a(g))

    def eigenvalue(self, n: int) -> float:
        return (n + self.a) ** 2

    def eigenfunction(self, n: int, s, *, derivatives: int = 0):
        return eigenfunction(self.g, n, s, derivatives=derivatives)


def eigenfunction(g: float, n: int, s, *, derivatives: int = 0, cos_s=None):
    """Normalised ``w_n`` at ``s`` (and optionally ``w_n'``, ``w_n''``).

    ``cos_s`` may carry ``cos s`` computed to full relative accuracy near the
    endpoints (e.g. from endpoint distances).
    """
    if n < 0:
        raise OutOfRange("n must be nonnegative")
    a = _strict_a(g)
    s = np.asarray(s, dtype=float)
    C = np.cos(s) if cos_s is None else np.asarray(cos_s, dtype=float)
    C = np.abs(C)
    S = np.sin(s)
    scale = 1.0 / np.sqrt(gegenbauer_norm(n, a))
    P = gegenbauer(n, a, S)
    w = scale * C**a * P
    if derivatives == 0:
        return w
    P1 = 2 * a * gegenbauer(n - 1, a + 1, S) if n >= 1 else np.zeros_like(S)
    dw = scale * (-a * C ** (a - 1) * S * P + C ** (a + 1) * P1)
    if derivatives == 1:
        return w, dw
    P2 = 4 * a * (a + 1) * gegenbauer(n - 2, a + 2, S) if n >= 2 else np.zeros_like(S)
    d2w = scale * (a * (a - 1) * C ** (a - 2) * S**2 * P - a * C**a * P
                   - (2 * a + 1) * C**a * S * P1 + C ** (a + 2) * P2)
    return w, dw, d2w


def eigenfunction_residual(g: float, n: int, margin: float = 1e-4) -> float:
    """``||K_g w_n - lambda_n w_n||_2`` on ``[-pi/2 + margin, pi/2 - margin]``."""
    lam = eigenvalue(g, n)

    def sq(s):
        w, _, d2w = eigenfunction(g, n, s, derivatives=2)
        return (-d2w + g * w / np.cos(s) ** 2 - lam * w) ** 2
    return float(np.sqrt(graded_gauss(sq, -HALF_PI + margin, HALF_PI - margin,
                                      base_panels=32)))


def gram_matrix(g: float, n_max: int) -> np.ndarray:
    """Pairwise ``L^2`` inner products of ``w_0 .. w_n_max`` by tanh-sinh quadrature."""
    def f(s, dl, dr):
        c = np.where(dl < dr, np.sin(dl), np.sin(dr))
        W = np.stack([eigenfunction(g, n, s, cos_s=c) for n in range(n_max + 1)])
        return np.einsum("in,jn->ijn", W, W).reshape((n_max + 1) ** 2, -1)
    G = np.empty((n_max + 1) ** 2)
    for idx in range(G.size):
        G[idx] = tanh_sinh(lambda s, dl, dr, idx=idx: f(s, dl, dr)[idx], -HALF_PI, HALF_PI,
                           with_distances=True)
    return G.reshape(n_max + 1, n_max + 1)


@dataclass(frozen=True)
class RecursionResult:
    coefficients: np.ndarray
    terminates: bool
    last_nonzero: int | None


def recursion_coefficients(g: float, lam: float, n_max: int) -> RecursionResult:
    """Power-series coefficients ``b_0 .. b_n_max`` of the regular solution in ``xi``.

    ``b_{n+1} = ((n+a)^2 - lam) / ((n+a+1/2)(n+1)) b_n``.  A factor with
    ``|(n+a)^2 - lam| < 1e-12`` is treated as an exact zero.
    """
    a = exponent_a(g)
    b = np.zeros(n_max + 1)
    b[0] = 1.0
    last = None
    for n in range(n_max):
        num = (n + a) ** 2 - lam
        if abs(num) < QUANTIZATION_TOL:
            last = n
            break
        b[n + 1] = num / ((n + a + 0.5) * (n + 1)) * b[n]
    return RecursionResult(b, last is not None, last)


# -- Hardy-type inequalities ---------------------------------------------------------------

def _edge_check(values, scale, what):
    if np.max(np.abs(values)) > 1e-10 * max(1.0, scale):
        raise BoundaryViolation(f"{what} must vanish at the interval ends, got {values}")


def hardy_check(w: Callable, dw: Callable, length: float):
    """``(1/4) int_0^L w^2/s^2 ds`` and ``int_0^L w'^2 ds`` for ``w`` vanishing at both ends."""
    ends = np.asarray(w(np.array([0.0, length])), dtype=float)
    _edge_check(ends, float(np.max(np.abs(w(np.linspace(0, length, 33))))), "w")
    lhs = 0.25 * tanh_sinh(lambda s, dl, dr: (w(s) / dl) ** 2, 0.0, length, with_distances=True,
                           tol=1e-12)
    rhs = tanh_sinh(lambda s: dw(s) ** 2, 0.0, length, tol=1e-12)
    return float(lhs), float(rhs)


def sharp_quarter_form(w: Callable, dw: Callable, *, with_distances: bool = False) -> float:
    """``int w'^2 - (1/4) int w^2 - (1/4) int sec^2 w^2`` over ``(-pi/2, pi/2)``.

    With ``with_distances`` the callables receive ``(s, cos s)`` where the
    cosine comes from the exact endpoint distance; use this for functions
    like ``cos^p`` whose values near the ends need full relative accuracy.
    """
    if with_distances:
        def cosine(s, dl, dr):
            return np.where(dl < dr, np.sin(dl), np.sin(dr))
        ev = lambda f, s, dl, dr: f(s, cosine(s, dl, dr))  # noqa: E731
    else:
        # plain callables see the rounded abscissa, so the cosine must too
        def cosine(s, dl, dr):
            return np.cos(s)
        ev = lambda f, s, dl, dr: f(s)  # noqa: E731
    ends = np.array([ev(w, np.array([x]), np.array([dl]), np.array([dr]))[0]
                     for x, dl, dr in ((-HALF_PI, 0.0, np.pi), (HALF_PI, np.pi, 0.0))])
    _edge_check(ends, 1.0, "w")

    def integrand(s, dl, dr):
        c = cosine(s, dl, dr)
        wv = ev(w, s, dl, dr)
        return ev(dw, s, dl, dr) ** 2 - 0.25 * wv**2 - 0.25 * (wv / c) ** 2
    return float(tanh_sinh(integrand, -HALF_PI, HALF_PI, with_distances=True, tol=1e-12))


# -- numeric comparison tables ----------------------------------------------------------------

def galerkin_eigenvalues(g: float, n_eigs: int = 4, sizes=(200, 400, 800)) -> np.ndarray:
    """Richardson-extrapolated Dirichlet Galerkin eigenvalues of ``K_g``."""
    _strict_a(g)
    V = lambda s: g / np.cos(s) ** 2  # noqa: E731
    vals = np.array([dirichlet_spectrum(V, K, n_eigs).eigenvalues for K in sizes])
    return np.array([richardson(vals[:, j], sizes) for j in range(n_eigs)])


def spectrum_table(g: float, n_max: int, sizes=(200, 400, 800)) -> list[dict]:
    numeric = galerkin_eigenvalues(g, n_max + 1, sizes)
    return [{"g": float(g), "n": n, "lambda_exact": eigenvalue(g, n),
             "lambda_numeric": float(numeric[n]),
             "abserr": float(abs(numeric[n] - eigenvalue(g, n)))} for n in range(n_max + 1)]


def table_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["g", "n", "lambda_exact", "lambda_numeric", "abserr"])
    for r in rows:
        w.writerow([f"{r['g']:.12g}", r["n"], f"{r['lambda_exact']:.12g}",
                    f"{r['lambda_numeric']:.12g}", f"{r['abserr']:.12g}"])
    return buf.getvalue()
