"""Second variation of the orbit functional around the elliptical orbits.

``X0(s) = (alpha cos s, beta sin s, 0)`` with ``alpha >= beta > 0``.  The
linearised closure constraint is ``int A(s) x(s) ds = 0`` with
``A = (|X0|^2 I - X0 X0^T) / |X0|^3``.

Fourier coefficients of matrices follow the unitary convention
``Ahat(n) = (2 pi)^(-1/2) int A(s) exp(-i n s) ds``; reports also carry the
plain integral ``int A ds = sqrt(2 pi) Ahat(0)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from . import spectral
from .errors import (DegenerateAxes, InvalidAxes, NotPiPeriodic, NumericalFailure,
                     TruncationTooCoarse)
from .quadrature import gauss_on_breaks, panel_breaks

SQRT_2PI = np.sqrt(spectral.TWO_PI)
TAIL_TOL = 1e-8
COLLAPSE_SWITCH = 1e-3


def _check_axes(alpha: float, beta: float) -> None:
    if not (np.isfinite(alpha) and np.isfinite(beta)) or not (alpha >= beta > 0):
        raise InvalidAxes(f"need alpha >= beta > 0, got alpha={alpha}, beta={beta}")


def singularity_distance(alpha: float, beta: float) -> float:
    """Distance from the real axis to the nearest complex zero of ``|X0|^2``."""
    r = beta / alpha
    return np.inf if r >= 1.0 else float(np.arctanh(r))


def resolving_grid(alpha: float, beta: float, minimum: int = 256) -> int:
    """Power-of-two grid on which the Fourier data of ``A`` is exact to roundoff."""
    rho = singularity_distance(alpha, beta)
    need = minimum if not np.isfinite(rho) else int(np.ceil(40.0 / rho))
    return spectral.next_pow2(max(minimum, need))


def orbit_norm(alpha: float, beta: float, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.sqrt((alpha * np.cos(s)) ** 2 + (beta * np.sin(s)) ** 2)


def a_entries(alpha: float, beta: float, s):
    """``(A11, A12, A22, A33)`` at points ``s``."""
    s = np.asarray(s, dtype=float)
    c, sn = np.cos(s), np.sin(s)
    r = orbit_norm(alpha, beta, s)
    r3 = r**3
    return ((beta * sn) ** 2 / r3, -alpha * beta * c * sn / r3, (alpha * c) ** 2 / r3, 1.0 / r)


@dataclass(frozen=True)
class AMatrixField:
    alpha: float
    beta: float
    samples: np.ndarray   # (M, 3, 3)
    fourier: np.ndarray   # (2N+1, 3, 3), modes -N..N, unitary normalisation

    @property
    def mode_count(self) -> int:
        return (self.fourier.shape[0] - 1) // 2

    def coefficient(self, n: int) -> np.ndarray:
        N = self.mode_count
        if abs(n) > N:
            return np.zeros((3, 3), dtype=complex)
        return self.fourier[n + N]


def a_matrix(alpha: float, beta: float, grid_size: int | None = None) -> AMatrixField:
    _check_axes(alpha, beta)
    M = grid_size or resolving_grid(alpha, beta)
    if M % 4:
        raise InvalidAxes("grid size must be divisible by 4")
    s = spectral.grid(M)
    a11, a12, a22, a33 = a_entries(alpha, beta, s)
    A = np.zeros((M, 3, 3))
    A[:, 0, 0], A[:, 0, 1], A[:, 1, 0], A[:, 1, 1], A[:, 2, 2] = a11, a12, a12, a22, a33
    c = spectral.coefficients(A, axis=0) * SQRT_2PI
    N = M // 2 - 1
    idx = np.arange(-N, N + 1) % M
    return AMatrixField(float(alpha), float(beta), A, c[idx])


def _even_multiplier(M: int) -> tuple[np.ndarray, np.ndarray]:
    k = spectral.wavenumbers(M)
    even = (k.astype(int) % 2) == 0
    mult = np.zeros(M)
    mult[even] = 1.0 / (1.0 - k[even] ** 2)
    return mult, even


def convolve_K(f) -> np.ndarray:
    """Convolution with ``K(s) = |sin s| / 4``: the pi-periodic inverse of ``d^2/ds^2 + 1``."""
    f = np.asarray(f, dtype=float)
    M = f.shape[0]
    if M % 2:
        raise NotPiPeriodic("grid size must be even")
    c = spectral.coefficients(f, axis=0)
    mult, even = _even_multiplier(M)
    scale = max(1.0, float(np.max(np.abs(c))))
    if np.max(np.abs(c[~even]), initial=0.0) > 1e-10 * scale:
        raise NotPiPeriodic("input has odd Fourier modes")
    shape = (M,) + (1,) * (f.ndim - 1)
    return np.fft.ifft(c * M * mult.reshape(shape), axis=0).real


def kernel_inner(f, g=None) -> float:
    """``<f, K*g>`` over one period from samples, via Parseval."""
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    M = f.shape[0]
    cf, cg = spectral.coefficients(f), spectral.coefficients(g)
    mult, _ = _even_multiplier(M)
    return float(spectral.TWO_PI * np.sum((np.conj(cf) * cg).real * mult))


# -- the integrals I1, I2, I3 -------------------------------------------------------

def _I_fourier(alpha, beta):
    s = spectral.grid(resolving_grid(alpha, beta))
    a11, a12, a22, a33 = a_entries(alpha, beta, s)
    k12 = kernel_inner(a12)
    return kernel_inner(a11) + k12, kernel_inner(a22) + k12, kernel_inner(a33)


def _sign_kernel_quadratic(funcs, alpha, beta):
    """``sum_f int_0^pi int_0^pi f(s) f(t) |sin(s-t)| ds dt`` by cumulative quadrature.

    On ``[0, pi]^2`` the sign of ``sin(s-t)`` is that of ``s-t``, so the inner
    integral splits into running integrals of ``f cos`` and ``f sin``.
    """
    width = min(1.0, beta / alpha)
    br = panel_breaks(0.0, np.pi, (0.5 * np.pi,), base_panels=32, ratio=0.25,
                      min_width=1e-4 * width)
    order = 24
    xg, wg = np.polynomial.legendre.leggauss(order)
    lo, hi = br[:-1], br[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (lo + hi))[:, None] + half[:, None] * xg     # (P, q)
    weights = half[:, None] * wg
    # nodes for the partial integral from each panel start to each node
    sub_half = 0.5 * (nodes - lo[:, None])                     # (P, q)
    sub_nodes = (lo[:, None] + sub_half)[..., None] + sub_half[..., None] * xg  # (P, q, q)
    sub_w = sub_half[..., None] * wg
    total = 0.0
    for f in funcs:
        fv = f(nodes)
        fs = f(sub_nodes)
        out = 0.0
        for trig_in, trig_out, sgn in ((np.cos, np.sin, 1.0), (np.sin, np.cos, -1.0)):
            panel_int = np.sum(weights * fv * trig_in(nodes), axis=1)
            before = np.concatenate([[0.0], np.cumsum(panel_int)[:-1]])
            partial = np.sum(sub_w * fs * trig_in(sub_nodes), axis=2)
            running = before[:, None] + partial
            T = panel_int.sum()
            out += sgn * np.sum(weights * fv * trig_out(nodes) * (2.0 * running - T))
        total += out
    return float(total)


def _I_quadrature(alpha, beta):
    def comp(i):
        return lambda s: a_entries(alpha, beta, s)[i]
    a11, a12, a22, a33 = (comp(i) for i in range(4))
    return (_sign_kernel_quadratic([a11, a12], alpha, beta),
            _sign_kernel_quadratic([a22, a12], alpha, beta),
            _sign_kernel_quadratic([a33], alpha, beta))


def I_integrals(alpha: float, beta: float, method: str = "auto"):
    """Kernel-weighted quadratic integrals of the entries of ``A``.

    ``method="fourier"`` uses Parseval on a grid resolving the complex
    singularities of ``A``; ``"quadrature"`` evaluates the double integral
    with panels clustered at ``s = pi/2``, and is what ``"auto"`` picks for
    ``beta/alpha < 1e-3``.
    """
    _check_axes(alpha, beta)
    if method == "auto":
        method = "quadrature" if beta / alpha < COLLAPSE_SWITCH else "fourier"
    if method == "fourier":
        out = _I_fourier(alpha, beta)
    elif method == "quadrature":
        out = _I_quadrature(alpha, beta)
    else:
        raise ValueError(f"unknown method {method!r}")
    return tuple(float(v) for v in out)


def closed_form_I(alpha: float, beta: float):
    """``(I1, I2)`` from the single integral ``J = <1/|X0|, K*(1/|X0|)>``."""
    _check_axes(alpha, beta)
    if abs(alpha - beta) < 1e-4:
        raise DegenerateAxes("alpha and beta too close for the closed form")
    s = spectral.grid(resolving_grid(alpha, beta))
    J = kernel_inner(1.0 / orbit_norm(alpha, beta, s))
    d2 = (alpha**2 - beta**2) ** 2
    brace = ((alpha**2 + beta**2) * J - 4.0 * np.pi) / d2
    return float(beta**2 * brace), float(alpha**2 * brace)


def a_diagonal_integrals(alpha: float, beta: float) -> np.ndarray:
    """``int A_ii ds`` for i = 1, 2, 3."""
    _check_axes(alpha, beta)
    s = spectral.grid(resolving_grid(alpha, beta))
    a11, _, a22, a33 = a_entries(alpha, beta, s)
    return np.array([spectral.integrate(a11), spectral.integrate(a22), spectral.integrate(a33)])


# -- the matrix D ---------------------------------------------------------------------

@dataclass(frozen=True)
class VariationReport:
    alpha: float
    beta: float
    I1: float
    I2: float
    I3: float
    A0: np.ndarray            # unitary Ahat(0)
    A0_integral: np.ndarray   # int A ds = sqrt(2 pi) Ahat(0)
    D: np.ndarray
    eta: float
    bound_constant: float
    mode_cutoff: int
    tail_bound: float
    off_diagonal_max: float

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("A0", "A0_integral", "D"):
            d[key] = np.asarray(d[key]).tolist()
        return d

    CSV_FIELDS = ("alpha", "beta", "I1", "I2", "I3", "eta", "bound_constant")

    def csv_row(self) -> list:
        return [getattr(self, k) for k in self.CSV_FIELDS]


def _lowest_eigenvalue(D: np.ndarray) -> float:
    try:
        return float(linalg.eigvalsh(D)[0])
    except linalg.LinAlgError:
        roots = np.roots(np.poly(D))
        if np.max(np.abs(roots.imag)) > 1e-8:
            raise NumericalFailure("characteristic polynomial has complex roots")
        return float(np.min(roots.real))


def d_matrix_eta(alpha: float, beta: float, mode_cutoff: int = 256) -> VariationReport:
    """Matrix ``D`` and its lowest eigenvalue ``eta``.

    The mode sum is truncated at ``|n| <= mode_cutoff``.  The neglected part
    is measured from the coefficients between the cutoff and the Nyquist mode
    of a grid that resolves ``A``; if its effect on ``D`` may exceed 1e-8,
    :class:`TruncationTooCoarse` is raised.
    """
    _check_axes(alpha, beta)
    if mode_cutoff < 32:
        raise InvalidAxes("mode_cutoff must be at least 32")
    M = spectral.next_pow2(max(resolving_grid(alpha, beta), 4 * mode_cutoff + 4))
    field = a_matrix(alpha, beta, M)
    N = field.mode_count
    n = np.arange(-N, N + 1)
    weight = np.zeros(n.shape)
    keep = np.abs(n) != 1
    weight[keep] = 1.0 / (1.0 - n[keep] ** 2.0)
    coef = field.fourier
    prods = np.einsum("nij,nkj->nik", coef, np.conj(coef)).real   # Ahat(n) Ahat(n)^*
    inside = np.abs(n) <= mode_cutoff
    B = np.einsum("n,nij->ij", weight * inside, prods)
    tail = float(np.sum(np.abs(weight[~inside]) * np.einsum("nii->n", prods[~inside])))
    A0 = field.coefficient(0).real
    A0 = 0.5 * (A0 + A0.T)
    A0inv = linalg.inv(A0)
    D = A0inv @ B @ A0inv
    D = 0.5 * (D + D.T)
    tail_bound = tail * float(np.linalg.norm(A0inv, 2)) ** 2
    if tail_bound > TAIL_TOL:
        raise TruncationTooCoarse(
            f"mode tail may shift D by {tail_bound:.2e}; raise mode_cutoff")
    eta = _lowest_eigenvalue(D)
    off = float(np.max(np.abs(D - np.diag(np.diag(D)))))
    return VariationReport(
        alpha=float(alpha), beta=float(beta),
        I1=float(B[0, 0]), I2=float(B[1, 1]), I3=float(B[2, 2]),
        A0=A0, A0_integral=SQRT_2PI * A0, D=D, eta=eta,
        bound_constant=eta / (2.0 * (1.0 - eta)),
        mode_cutoff=int(mode_cutoff), tail_bound=tail_bound, off_diagonal_max=off)


def second_variation(x1, alpha: float, beta: float):
    """``(L(x1), int A x1 ds)`` for perturbation samples of shape ``(M, 3)``."""
    _check_axes(alpha, beta)
    x = np.asarray(x1, dtype=float)
    M = x.shape[0]
    s = spectral.grid(M)
    dx = spectral.derivative(x, axis=0)
    L2 = 0.5 * float(spectral.integrate(np.sum(dx**2, axis=1) - np.sum(x**2, axis=1)))
    a11, a12, a22, a33 = a_entries(alpha, beta, s)
    Ax = np.stack([a11 * x[:, 0] + a12 * x[:, 1], a12 * x[:, 0] + a22 * x[:, 1], a33 * x[:, 2]],
                  axis=1)
    return L2, spectral.integrate(Ax, axis=0)


def random_constrained_perturbation(alpha: float, beta: float, rng, modes: int = 8,
                                    grid_size: int | None = None) -> np.ndarray:
    """Random trigonometric perturbation with its mean adjusted so ``int A x = 0``.

    ``int A ds`` is diagonal and positive, so shifting the constant mode
    alone removes the constraint defect.
    """
    M = grid_size or resolving_grid(alpha, beta)
    s = spectral.grid(M)
    n = np.arange(modes + 1)
    decay = 1.0 / (1.0 + n) ** 1.5
    a = rng.standard_normal((modes + 1, 3)) * decay[:, None]
    b = rng.standard_normal((modes + 1, 3)) * decay[:, None]
    x = np.cos(np.outer(s, n)) @ a + np.sin(np.outer(s, n)) @ b
    _, defect = second_variation(x, alpha, beta)
    return x - defect / a_diagonal_integrals(alpha, beta)


# -- diagnostics ----------------------------------------------------------------------

def eigen_equation_residual(alpha: float, beta: float, grid_size: int | None = None) -> float:
    """L2 norm of ``-Phi'' + alpha^2 beta^2 / Phi^3 - Phi`` for ``Phi = |X0|``."""
    _check_axes(alpha, beta)
    M = grid_size or resolving_grid(alpha, beta)
    phi = orbit_norm(alpha, beta, spectral.grid(M))
    r = -spectral.derivative(phi, order=2) + (alpha * beta) ** 2 / phi**3 - phi
    return float(np.sqrt(spectral.integrate(r**2)))


def beta_asymptotics(beta_list, alpha: float = 1.0) -> list[dict]:
    """Rows of ``I1, I2, I3``, ``int A_ii`` and ``eta`` with log-scaled ratios.

    ``eta`` comes from the exact diagonal form ``D_ii = 2 pi I_i / (int A_ii)^2``.
    """
    rows = []
    for beta in beta_list:
        I1, I2, I3 = I_integrals(alpha, beta)
        diag = a_diagonal_integrals(alpha, beta)
        D = spectral.TWO_PI * np.array([I1, I2, I3]) / diag**2
        L = np.log(1.0 / beta)
        rows.append({
            "beta": float(beta), "I1": I1, "I2": I2, "I3": I3,
            "A0_11": float(diag[0] / SQRT_2PI), "A0_22": float(diag[1] / SQRT_2PI),
            "A0_33": float(diag[2] / SQRT_2PI), "eta": float(D.min()),
            "I1_over_b2log": I1 / (beta**2 * L), "I2_over_log": I2 / L, "I3_over_log": I3 / L,
        })
    return rows


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(VariationReport.CSV_FIELDS)
    for r in reports:
        w.writerow([f"{v:.12g}" for v in r.csv_row()])
    return buf.getvalue()
