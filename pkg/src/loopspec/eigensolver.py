"""Low spectrum of ``-d^2/ds^2 + V`` on the circle and on Dirichlet intervals."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import linalg

from . import spectral
from .curve import TangentField, curvature
from .errors import NumericalFailure, QuadratureFailure, ValidationError
from .quadrature import gauss_on_breaks, panel_breaks


@dataclass(frozen=True)
class EigenResult:
    """Eigenpairs in ascending order.

    For periodic problems ``eigenfunctions`` has shape ``(M, k)`` with
    ``h * sum(phi**2) = 1``; for Galerkin problems it holds orthonormal
    coefficient vectors, shape ``(K, k)``.
    """

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    residuals: np.ndarray
    gap: float = np.nan


@lru_cache(maxsize=8)
def _laplacian(M: int) -> np.ndarray:
    D2 = spectral.second_derivative_matrix(M)
    D2.setflags(write=False)
    return D2


def _fix_sign(phi: np.ndarray) -> np.ndarray:
    M = phi.shape[0]
    for j in range(phi.shape[1]):
        v = phi[:, j]
        total = v.sum()
        if abs(total) > 1e-10 * np.sqrt(M) * np.max(np.abs(v)):
            if total < 0:
                phi[:, j] = -v
            continue
        # mean vanishes: orient so the function increases through its first sign change
        sgn = np.sign(v)
        idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        if idx.size and v[idx[0] + 1] - v[idx[0]] < 0:
            phi[:, j] = -v
    return phi


def periodic_hamiltonian(V) -> np.ndarray:
    V = np.asarray(V, dtype=float)
    H = -_laplacian(V.shape[0]).copy()
    H[np.diag_indices_from(H)] += V
    return H


def periodic_ground_state(V, k: int = 1) -> EigenResult:
    """First ``k`` eigenpairs of the Fourier pseudospectral discretisation.

    ``V`` holds potential samples on a uniform grid of ``M`` points, ``M`` a
    power of two, at least 64.  ``gap`` records ``lambda_1 - lambda_0``.
    """
    V = np.asarray(V, dtype=float)
    M = V.shape[0] if V.ndim == 1 else -1
    if M < 64 or M & (M - 1):
        raise ValidationError(f"grid size must be a power of two >= 64, got {V.shape}")
    if not np.all(np.isfinite(V)):
        raise ValidationError("potential has non-finite samples")
    if k < 1 or k > M:
        raise ValidationError(f"k must lie in [1, {M}]")
    H = periodic_hamiltonian(V)
    kk = min(M, max(k, 2))
    try:
        lam, vec = linalg.eigh(H, subset_by_index=[0, kk - 1], driver="evr")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"symmetric eigensolve failed: {exc}") from exc
    h = spectral.TWO_PI / M
    # L2 residual of the grid-normalised function equals the Euclidean one here
    res = np.linalg.norm(H @ vec - vec * lam, axis=0)
    phi = _fix_sign(vec / np.sqrt(h))
    return EigenResult(lam[:k], phi[:, :k], res[:k], float(lam[1] - lam[0]))


def e0_of_curve(U: TangentField):
    """Lowest eigenvalue of ``-d^2/ds^2 + kappa^2`` and its normalised ground state."""
    kappa = curvature(U).curvature
    r = periodic_ground_state(kappa**2, 1)
    return float(r.eigenvalues[0]), r.eigenfunctions[:, 0]


# -- Dirichlet problems on (-pi/2, pi/2) ---------------------------------------

def _sine_breaks(K: int, refine: int) -> np.ndarray:
    # phase change per panel stays below ~9 rad for frequencies up to 2K
    base = max(16, int(np.ceil(0.7 * K))) * refine
    return panel_breaks(0.0, np.pi, (0.0, np.pi), base_panels=base, ratio=0.15,
                        min_width=1e-12)


def sine_potential_matrix(V: Callable, K: int, refine: int = 1) -> np.ndarray:
    """Matrix of ``V`` in the orthonormal basis ``sqrt(2/pi) sin(k(s + pi/2))``."""
    x, w = gauss_on_breaks(_sine_breaks(K, refine), 20)
    Vx = np.asarray(V(x - 0.5 * np.pi), dtype=float)
    if not np.all(np.isfinite(Vx)):
        raise QuadratureFailure("potential is not finite at interior quadrature nodes")
    k = np.arange(1, K + 1)
    out = np.zeros((K, K))
    chunk = 4096
    for start in range(0, x.size, chunk):
        xs = x[start:start + chunk]
        B = np.sin(np.outer(xs, k))
        out += B.T @ (B * (w[start:start + chunk] * Vx[start:start + chunk])[:, None])
    return out * (2.0 / np.pi)


def dirichlet_spectrum(V: Callable, basis_size: int, n_eigs: int | None = None,
                       *, tol: float = 1e-9) -> EigenResult:
    """Galerkin eigenpairs of ``-d^2/ds^2 + V`` on ``(-pi/2, pi/2)``, Dirichlet ends.

    The potential may blow up like an inverse square at the endpoints; the
    basis vanishes linearly there, so matrix elements stay finite.  They are
    computed on Gauss panels graded towards both endpoints and recomputed on
    a refined panel set; disagreement above ``tol`` (relative to the largest
    element) raises :class:`QuadratureFailure`.
    """
    K = int(basis_size)
    if K < 1:
        raise ValidationError("basis_size must be positive")
    P = sine_potential_matrix(V, K, 1)
    P2 = sine_potential_matrix(V, K, 2)
    scale = max(1.0, float(np.max(np.abs(P2))))
    if np.max(np.abs(P2 - P)) > tol * scale:
        raise QuadratureFailure("potential matrix elements not converged under panel refinement")
    k = np.arange(1, K + 1)
    H = 0.5 * (P2 + P2.T) + np.diag(k.astype(float) ** 2)
    n = K if n_eigs is None else min(int(n_eigs), K)
    try:
        lam, vec = linalg.eigh(H, subset_by_index=[0, n - 1])
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"Galerkin eigensolve failed: {exc}") from exc
    for j in range(n):
        if vec[np.argmax(np.abs(vec[:, j])), j] < 0:
            vec[:, j] = -vec[:, j]
    res = np.linalg.norm(H @ vec - vec * lam, axis=0)
    gap = float(lam[1] - lam[0]) if n > 1 else np.nan
    return EigenResult(lam, vec, res, gap)


def sine_basis_values(coeffs: np.ndarray, s) -> np.ndarray:
    """Evaluate a Galerkin coefficient vector at points ``s`` in ``[-pi/2, pi/2]``."""
    coeffs = np.asarray(coeffs, dtype=float)
    k = np.arange(1, coeffs.shape[0] + 1)
    x = np.asarray(s, dtype=float) + 0.5 * np.pi
    return np.sqrt(2.0 / np.pi) * np.sin(np.outer(x, k)) @ coeffs


def richardson(values, sizes) -> float:
    """Extrapolate ``lambda(K) ~ lambda_inf + c K**-p`` from three basis sizes.

    Sizes must form a geometric sequence.  The order ``p`` is estimated from
    the data; if the differences are at roundoff level the last value is
    returned unchanged.
    """
    v0, v1, v2 = (float(v) for v in values)
    r = sizes[1] / sizes[0]
    d1, d2 = v0 - v1, v1 - v2
    if abs(d2) < 1e-13 * max(1.0, abs(v2)) or d1 * d2 <= 0 or abs(d1) <= abs(d2):
        return v2
    p = np.log(d1 / d2) / np.log(r)
    return v2 - d2 / (r**p - 1.0)
