"""Perturbations of collapsed orbits ``X0 = cos_ab(s) e1``.

``cos_ab`` equals ``alpha cos s`` on ``[-pi/2, pi/2]`` and ``beta cos s`` on
``[pi/2, 3pi/2]``; the orbit vanishes at the two junctions.  Functions that
take a perturbation accept either samples of shape ``(M, 3)`` on the uniform
grid (``M`` divisible by 4, so the junctions are grid points) or a
vectorised callable ``s -> (len(s), 3)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg, optimize

from . import spectral
from .errors import (BoundaryViolation, ConstraintViolation, InvalidAxes,
                     ProjectionIllConditioned, ValidationError)
from .quadrature import graded_gauss

HALF_PI = 0.5 * np.pi
JUNCTIONS = (HALF_PI, 3 * HALF_PI)


def _check_ab(alpha: float, beta: float, allow_zero_beta: bool = True) -> None:
    ok = alpha > 0 and (beta >= 0 if allow_zero_beta else beta > 0) and beta <= alpha
    if not ok:
        raise InvalidAxes(f"need alpha >= beta {'>=' if allow_zero_beta else '>'} 0, "
                          f"got alpha={alpha}, beta={beta}")


def _on_first(s) -> np.ndarray:
    """True on ``[-pi/2, pi/2)`` modulo 2 pi."""
    return np.mod(np.asarray(s, dtype=float) + HALF_PI, spectral.TWO_PI) < np.pi


def cos_ab(alpha: float, beta: float, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return np.where(_on_first(s), alpha, beta) * np.cos(s)


def cos_ab_derivative(alpha: float, beta: float, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return -np.where(_on_first(s), alpha, beta) * np.sin(s)


def coupling(alpha: float, beta: float) -> tuple[float, float]:
    """Piecewise constant ``g_ab`` on the two intervals."""
    _check_ab(alpha, beta, allow_zero_beta=False)
    g1 = -beta * (alpha - beta) / (alpha * (alpha + beta))
    g2 = alpha * (alpha - beta) / (beta * (alpha + beta))
    return g1, g2


def g_ab(alpha: float, beta: float, s) -> np.ndarray:
    g1, g2 = coupling(alpha, beta)
    return np.where(_on_first(s), g1, g2)


@dataclass(frozen=True)
class CollapsedOrbit:
    alpha: float
    beta: float
    grid_size: int = 256

    def __post_init__(self):
        _check_ab(self.alpha, self.beta)
        if self.grid_size % 4:
            raise ValidationError("grid size must be divisible by 4")

    @property
    def s_grid(self) -> np.ndarray:
        return spectral.grid(self.grid_size)

    @property
    def samples(self) -> np.ndarray:
        X = np.zeros((self.grid_size, 3))
        X[:, 0] = cos_ab(self.alpha, self.beta, self.s_grid)
        return X


# -- perturbation plumbing -------------------------------------------------------------

def _as_callable(x) -> Callable:
    if callable(x):
        return x
    x = np.asarray(x, dtype=float)
    return lambda s: spectral.evaluate(x, s, axis=0)


def _junction_values(x) -> tuple[np.ndarray, np.ndarray]:
    if callable(x):
        v = np.asarray(x(np.array([HALF_PI, 3 * HALF_PI])), dtype=float)
        return v[0], v[1]
    x = np.asarray(x, dtype=float)
    M = x.shape[0]
    if M % 4:
        raise ValidationError("grid size must be divisible by 4 so junctions are grid points")
    return x[M // 4], x[3 * M // 4]


def _samples(x, grid_size: int | None) -> np.ndarray:
    if callable(x):
        return np.asarray(x(spectral.grid(grid_size or 256)), dtype=float)
    return np.asarray(x, dtype=float)


def first_variation(alpha: float, beta: float, x1) -> float:
    """Boundary form ``-(alpha - beta) (x1(pi/2) + x1(3pi/2))`` of the first variation."""
    _check_ab(alpha, beta)
    va, vb = _junction_values(x1)
    return float(-(alpha - beta) * (va[0] + vb[0]))


def first_variation_quadrature(alpha: float, beta: float, x1, dx1) -> float:
    """``int (X0' . x1' - X0 . x1) ds`` integrated piecewise; ``x1``, ``dx1`` callables."""
    _check_ab(alpha, beta)

    def f(s):
        return (cos_ab_derivative(alpha, beta, s) * dx1(s)[:, 0]
                - cos_ab(alpha, beta, s) * x1(s)[:, 0])
    return float(graded_gauss(f, -HALF_PI, HALF_PI, base_panels=16)
                 + graded_gauss(f, HALF_PI, 3 * HALF_PI, base_panels=16))


def sign_constrained_L1(alpha: float, beta: float, x1, mu_sign: int, *, tol: float = 1e-9,
                        strict: bool = False):
    """First variation per unit ``|mu|`` once the first-order closure constraint holds.

    Returns ``(value, admissible)`` where ``value`` is
    ``(alpha-beta)^2/(alpha+beta) * (|x1(pi/2)| + |x1(3pi/2)|)`` and
    ``admissible`` reports whether ``x1`` actually satisfies the leading
    order of the first closure component for this sign of ``mu``.  For
    ``beta = 0`` the limiting sign conditions are checked instead.  With
    ``strict`` an inadmissible ``x1`` raises :class:`ConstraintViolation`.
    """
    _check_ab(alpha, beta)
    if mu_sign not in (1, -1):
        raise ValidationError("mu_sign must be +1 or -1")
    va, vb = _junction_values(x1)
    N = float(np.linalg.norm(va) + np.linalg.norm(vb))
    S = float(va[0] + vb[0])
    scale = max(1.0, N)
    if beta == 0:
        ok = mu_sign * va[0] <= tol * scale and mu_sign * vb[0] <= tol * scale
        if not callable(x1):
            x = np.asarray(x1, dtype=float)
            second = ~_on_first(spectral.grid(x.shape[0]))
            ok = ok and float(np.max(np.abs(x[second, 1:]), initial=0.0)) <= tol * scale
        else:
            ok = ok and max(abs(va[1]), abs(va[2]), abs(vb[1]), abs(vb[2])) <= tol * scale
        value = alpha * N
    else:
        lead = mu_sign * (1 / alpha + 1 / beta) * S - (1 / alpha - 1 / beta) * N
        ok = abs(lead) <= tol * scale * (1 / alpha + 1 / beta)
        value = (alpha - beta) ** 2 / (alpha + beta) * N
    if strict and not ok:
        raise ConstraintViolation("leading closure term does not vanish for this perturbation")
    return float(value), bool(ok)


def second_variation_collapsed(alpha: float, beta: float, x1, x2) -> float:
    """``(1/2) int (|x1'|^2 - |x1|^2) - (alpha-beta)(x2(pi/2) + x2(3pi/2))`` for samples ``x1``."""
    _check_ab(alpha, beta)
    x = np.asarray(x1, dtype=float)
    dx = spectral.derivative(x, axis=0)
    quad = 0.5 * float(spectral.integrate(np.sum(dx**2, axis=1) - np.sum(x**2, axis=1)))
    va, vb = _junction_values(x2)
    return quad - (alpha - beta) * float(va[0] + vb[0])


# -- singular quadratures on the two intervals ---------------------------------------------

def _interval_integral(f, lo, hi, **kw):
    kw.setdefault("base_panels", 16)
    kw.setdefault("min_width", 1e-9)
    kw.setdefault("order", 20)
    return graded_gauss(f, lo, hi, (lo, hi), **kw)


def sec2_integral(f: Callable, lo: float, hi: float) -> float:
    """``int f(s)^2 sec^2(s) ds`` on an interval whose ends are zeros of ``cos``."""
    return float(_interval_integral(lambda s: (f(s) / np.cos(s)) ** 2, lo, hi))


def second_order_constraint(alpha: float, beta: float, x1, x2) -> float:
    """Coefficient of ``mu^2`` in the first closure component when ``x1`` vanishes at the junctions."""
    _check_ab(alpha, beta, allow_zero_beta=False)
    f = _as_callable(x1)
    yz = lambda s: np.linalg.norm(np.asarray(f(s))[:, 1:], axis=1)  # noqa: E731
    q = (sec2_integral(yz, -HALF_PI, HALF_PI) / alpha**2
         - sec2_integral(yz, HALF_PI, 3 * HALF_PI) / beta**2)
    va, vb = _junction_values(x2)
    S = va[0] + vb[0]
    N = np.linalg.norm(va) + np.linalg.norm(vb)
    return float(-0.5 * q + (1 / alpha + 1 / beta) * S - (1 / alpha - 1 / beta) * N)


def second_variation_reduced(alpha: float, beta: float, x1, x2) -> float:
    """Second variation after the first closure component has been used to eliminate ``x2``.

    ``x1`` are samples; the ``sec^2`` part uses its trigonometric interpolant.
    """
    _check_ab(alpha, beta, allow_zero_beta=False)
    x = np.asarray(x1, dtype=float)
    dx = spectral.derivative(x, axis=0)
    quad = 0.5 * float(spectral.integrate(np.sum(dx**2, axis=1) - np.sum(x**2, axis=1)))
    g1, g2 = coupling(alpha, beta)
    f = _as_callable(x)
    yz = lambda s: np.linalg.norm(np.asarray(f(s))[:, 1:], axis=1)  # noqa: E731
    quad += 0.5 * (g1 * sec2_integral(yz, -HALF_PI, HALF_PI)
                   + g2 * sec2_integral(yz, HALF_PI, 3 * HALF_PI))
    va, vb = _junction_values(x2)
    return quad + (alpha - beta) ** 2 / (alpha + beta) * float(
        np.linalg.norm(va) + np.linalg.norm(vb))


def reduced_form(alpha: float, beta: float, w, dw: Callable | None = None, *,
                 tol: float = 1e-8) -> float:
    """``int (w'^2 + g_ab sec^2 w^2) ds`` over one period.

    ``w`` is a callable (then ``dw`` is required) or scalar samples on the
    uniform grid, differentiated spectrally.
    """
    _check_ab(alpha, beta, allow_zero_beta=False)
    if callable(w):
        if dw is None:
            raise ValidationError("dw is required when w is a callable")
        wf, dwf = w, dw
    else:
        ws = np.asarray(w, dtype=float)
        wf = _as_callable(ws)
        dwf = _as_callable(spectral.derivative(ws))
    ends = np.asarray(wf(np.array([HALF_PI, 3 * HALF_PI])), dtype=float)
    scale = max(1.0, float(np.max(np.abs(wf(spectral.grid(64))))))
    if np.max(np.abs(ends)) > tol * scale:
        raise BoundaryViolation(f"w must vanish at the junctions, got {ends}")
    g1, g2 = coupling(alpha, beta)
    total = 0.0
    for (lo, hi), g in (((-HALF_PI, HALF_PI), g1), ((HALF_PI, 3 * HALF_PI), g2)):
        total += float(_interval_integral(lambda s: dwf(s) ** 2, lo, hi))
        if g != 0:
            total += g * sec2_integral(wf, lo, hi)
    return total


# -- the constrained sec^2 problem ---------------------------------------------------------

def sec2_galerkin_matrix(K: int) -> np.ndarray:
    """Exact ``sec^2`` matrix in the orthonormal Dirichlet sine basis of a length-pi interval."""
    k = np.arange(1, K + 1)
    S = 2.0 * np.minimum.outer(k, k).astype(float)
    S[(k[:, None] + k[None, :]) % 2 == 1] = 0.0
    return S


@dataclass(frozen=True)
class ConstrainedSpectrumResult:
    alpha: float
    beta: float
    eta_values: np.ndarray
    eigenvector_overlap: float
    w0_check: float
    lambda_bounds: tuple
    lambda_galerkin: np.ndarray
    basis_size: int


def constrained_spectrum(alpha: float, beta: float, n_eigs: int = 4,
                         basis_size: int = 400) -> ConstrainedSpectrumResult:
    """Critical values of ``int (w'^2 + g_ab sec^2 w^2)`` under ``||w|| = 1``, ``int w/|cos_ab| = 0``.

    Galerkin in the Dirichlet sine bases of both intervals.  The constraint
    vector has exact coefficients, so the discrete problem is posed on a
    subspace of the continuous one and its values are upper bounds.
    ``lambda_bounds`` holds the exact ``(lambda_0, lambda_1)`` of the
    unconstrained operator.
    """
    _check_ab(alpha, beta, allow_zero_beta=False)
    K = int(basis_size)
    g1, g2 = coupling(alpha, beta)
    k = np.arange(1, K + 1)
    S = sec2_galerkin_matrix(K)
    H = linalg.block_diag(np.diag(k**2.0) + g1 * S, np.diag(k**2.0) + g2 * S)
    # <1/|cos_ab|, e_k>: e_k = sqrt(2/pi) sin(k(s -+ pi/2)); only odd k contribute
    odd = (k % 2 == 1).astype(float)
    c = np.sqrt(2.0 / np.pi) * np.pi * np.concatenate([odd / alpha, odd / beta])
    cn = np.linalg.norm(c)
    if not np.isfinite(cn) or cn == 0:
        raise ProjectionIllConditioned("constraint vector is not finite")
    c = c / cn
    # orthonormal basis of the complement of c
    Q, _ = linalg.qr(np.column_stack([c, np.eye(2 * K)[:, : 2 * K - 1]]), mode="economic")
    Qp = Q[:, 1:]
    if abs(float(c @ Q[:, 0])) < 1 - 1e-12:
        raise ProjectionIllConditioned("failed to orthogonalise against the constraint")
    Hp = Qp.T @ H @ Qp
    n = min(int(n_eigs), 2 * K - 1)
    eta, vec = linalg.eigh(0.5 * (Hp + Hp.T), subset_by_index=[0, n - 1])
    # w0 = cos_ab: first sine mode on each interval, amplitudes alpha and -beta
    w0 = np.zeros(2 * K)
    w0[0], w0[K] = alpha, -beta
    w0 /= np.linalg.norm(w0)
    v0 = Qp @ vec[:, 0]
    overlap = float(abs(v0 @ w0))
    # residual of K w0 = nu / |cos_ab| + w0 at sample points, nu = g1 alpha^2
    nu = g1 * alpha**2
    s1 = np.linspace(-HALF_PI, HALF_PI, 203)[1:-1]
    s2 = s1 + np.pi
    r1 = alpha * np.cos(s1) + g1 * alpha / np.cos(s1) - nu / (alpha * np.cos(s1)) - alpha * np.cos(s1)
    r2 = beta * np.cos(s2) + g2 * beta / np.cos(s2) - nu / (beta * np.abs(np.cos(s2))) - beta * np.cos(s2)
    w0_check = float(max(np.max(np.abs(r1)), np.max(np.abs(r2)),
                         np.linalg.norm(Qp.T @ (H @ w0) - Qp.T @ w0)))
    a1 = 0.5 * (1 + np.sqrt(1 + 4 * g1))
    a2 = 0.5 * (1 + np.sqrt(1 + 4 * g2))
    exact = np.sort(np.concatenate([(np.arange(4) + a1) ** 2, (np.arange(4) + a2) ** 2]))
    lam = linalg.eigvalsh(H, subset_by_index=[0, 3])
    return ConstrainedSpectrumResult(float(alpha), float(beta), eta, overlap, w0_check,
                                     (float(exact[0]), float(exact[1])), lam, K)


# -- expansion checks near a collapsed orbit --------------------------------------------

def _x_roots(h: Callable, width: float) -> list[float]:
    """Zeros of ``h`` within ``width`` of either end of ``[-pi/2, pi/2]``."""
    roots = []
    for lo, hi in ((-HALF_PI, -HALF_PI + width), (HALF_PI - width, HALF_PI)):
        a, b = float(h(np.array([lo]))[0]), float(h(np.array([hi]))[0])
        if a == 0:
            roots.append(lo)
        elif a * b < 0:
            roots.append(optimize.brentq(lambda t: float(h(np.array([t]))[0]), lo, hi,
                                         xtol=1e-300, rtol=4 * np.finfo(float).eps))
    return roots


def closure_pieces(alpha: float, field: Callable, mu: float, scale: float) -> np.ndarray:
    """``int_{-pi/2}^{pi/2} X/|X| ds - (pi sign(alpha), 0, 0)`` for ``X = alpha cos s e1 + field(s)``.

    The x-component is formed without cancellation.  Panels are graded
    towards the junctions and towards the zeros of the x-component, down to
    widths well below ``scale`` (the size of the perturbation there).
    """
    sig = 1.0 if alpha > 0 else -1.0

    def integrand(s):
        p = np.asarray(field(s), dtype=float)
        X = alpha * np.cos(s) + p[:, 0]
        Y, Z = p[:, 1], p[:, 2]
        r = np.sqrt(X**2 + Y**2 + Z**2)
        aligned = sig * X >= 0
        with np.errstate(divide="ignore", invalid="ignore"):
            dx = np.where(aligned, -sig * (Y**2 + Z**2) / (r * (r + sig * X)), X / r - sig)
            out = np.stack([dx, Y / r, Z / r], axis=1)
        return np.where(r[:, None] > 0, out, 0.0)

    hx = lambda s: alpha * np.cos(s) + np.asarray(field(s))[:, 0]  # noqa: E731
    pts = [-HALF_PI, HALF_PI] + _x_roots(hx, min(0.5, 1e3 * scale + 1e-3))
    return graded_gauss(integrand, -HALF_PI, HALF_PI, pts, base_panels=24, ratio=0.15,
                        min_width=max(1e-300, 1e-6 * scale), order=24, check=True, tol=1e-14)


def _endpoints(f: Callable) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(f(np.array([-HALF_PI, HALF_PI])), dtype=float)
    return v[0], v[1]


@dataclass(frozen=True)
class LemmaRow:
    mu: float
    component: str
    direct: float
    predicted: float
    residual: float
    residual_over_power: float


def lemma41_check(alpha: float, x1: Callable, mu_list) -> list[LemmaRow]:
    """Compare direct closure integrals over ``[-pi/2, pi/2]`` with the first-order law.

    ``x`` gets ``pi sign(alpha) + (mu/|alpha|) S - (|mu|/alpha) N`` with
    ``S`` the sum of endpoint values of the first component and ``N`` the
    sum of endpoint norms; ``y`` and ``z`` get
    ``(mu/|alpha|) ln(1/|mu|)`` times their endpoint sums.  The x residual
    is divided by ``|mu|``, the others by ``|mu| ln(1/|mu|)``.
    """
    if alpha == 0:
        raise ValidationError("alpha must be nonzero")
    va, vb = _endpoints(x1)
    S = va + vb
    N = np.linalg.norm(va) + np.linalg.norm(vb)
    sig = np.sign(alpha)
    rows = []
    for mu in mu_list:
        mu = float(mu)
        amp = abs(mu) * max(1.0, float(np.max(np.abs(np.concatenate([va, vb])))))
        d = closure_pieces(alpha, lambda s: mu * np.asarray(x1(s)), mu, amp)
        L = np.log(1.0 / abs(mu))
        pred = [mu / abs(alpha) * S[0] - abs(mu) / alpha * N,
                mu / abs(alpha) * L * S[1], mu / abs(alpha) * L * S[2]]
        powers = [abs(mu), abs(mu) * L, abs(mu) * L]
        for i, name in enumerate("xyz"):
            off = np.pi * sig if i == 0 else 0.0
            res = d[i] - pred[i]
            rows.append(LemmaRow(mu, name, float(d[i] + off), float(pred[i] + off),
                                 float(res), float(res / powers[i])))
    return rows


def lemma42_check(alpha: float, x1: Callable, x2: Callable, mu_list, *,
                  tol: float = 1e-8) -> list[LemmaRow]:
    """Compare direct closure integrals with the second-order law (``x1`` vanishing at the ends).

    The x residual is divided by ``mu^2``, the y and z residuals by ``|mu|``.
    """
    if alpha == 0:
        raise ValidationError("alpha must be nonzero")
    ua, ub = _endpoints(x1)
    if max(np.max(np.abs(ua)), np.max(np.abs(ub))) > tol:
        raise BoundaryViolation("x1 must vanish at both ends of the interval")
    va, vb = _endpoints(x2)
    S2 = va[0] + vb[0]
    N2 = np.linalg.norm(va) + np.linalg.norm(vb)
    sig = np.sign(alpha)
    yz = lambda s: np.linalg.norm(np.asarray(x1(s))[:, 1:], axis=1)  # noqa: E731
    q = sec2_integral(yz, -HALF_PI, HALF_PI)
    lin = _interval_integral(lambda s: np.asarray(x1(s))[:, 1:] / np.abs(np.cos(s))[:, None],
                             -HALF_PI, HALF_PI)
    coef_x = S2 / abs(alpha) - N2 / alpha - sig * q / (2 * alpha**2)
    rows = []
    for mu in mu_list:
        mu = float(mu)
        amp = mu**2 * max(1.0, float(np.max(np.abs(np.concatenate([va, vb])))))
        d = closure_pieces(alpha,
                           lambda s: mu * np.asarray(x1(s)) + mu**2 * np.asarray(x2(s)),
                           mu, amp)
        pred = [mu**2 * coef_x, mu / abs(alpha) * lin[0], mu / abs(alpha) * lin[1]]
        powers = [mu**2, abs(mu), abs(mu)]
        for i, name in enumerate("xyz"):
            off = np.pi * sig if i == 0 else 0.0
            res = d[i] - pred[i]
            rows.append(LemmaRow(mu, name, float(d[i] + off), float(pred[i] + off),
                                 float(res), float(res / powers[i])))
    return rows


def fit_first_order(alpha: float, x1: Callable, mu: float) -> dict:
    """Fitted and predicted first-order coefficients from ``+-mu`` and ``+-mu/10``.

    x: the parts odd and even in ``mu`` give the endpoint sum and norm terms.
    y, z: the coefficient of ``mu ln(1/|mu|)`` comes from two scales.
    """
    mu = abs(float(mu))
    scale = max(1.0, float(np.max(np.abs(np.concatenate(_endpoints(x1))))))
    vals = {}
    for m in (mu, -mu, mu / 10):
        vals[m] = closure_pieces(alpha, lambda s, m=m: m * np.asarray(x1(s)), m, abs(m) * scale)
    va, vb = _endpoints(x1)
    L1, L2 = np.log(1 / mu), np.log(10 / mu)
    return {
        "x_odd": (float((vals[mu][0] - vals[-mu][0]) / (2 * mu)), float((va[0] + vb[0]) / abs(alpha))),
        "x_even": (float(-(vals[mu][0] + vals[-mu][0]) / (2 * mu)),
                   float((np.linalg.norm(va) + np.linalg.norm(vb)) / alpha)),
        "y_log": (float((vals[mu][1] / mu - vals[mu / 10][1] / (mu / 10)) / (L1 - L2)),
                  float((va[1] + vb[1]) / abs(alpha))),
        "z_log": (float((vals[mu][2] / mu - vals[mu / 10][2] / (mu / 10)) / (L1 - L2)),
                  float((va[2] + vb[2]) / abs(alpha))),
    }


def fit_second_order(alpha: float, x1: Callable, x2: Callable, mu: float) -> dict:
    """Fitted and predicted second-order coefficients from ``+-mu``."""
    mu = abs(float(mu))
    rows = lemma42_check(alpha, x1, x2, [mu, -mu])
    sig = np.sign(alpha)
    get = {(r.mu, r.component): r for r in rows}
    even = 0.5 * (get[(mu, "x")].direct + get[(-mu, "x")].direct) - np.pi * sig
    out = {"x_mu2": (float(even / mu**2), float((get[(mu, "x")].predicted - np.pi * sig) / mu**2))}
    for c in "yz":
        odd = 0.5 * (get[(mu, c)].direct - get[(-mu, c)].direct) / mu
        out[f"{c}_lin"] = (float(odd), float(get[(mu, c)].predicted / mu))
    return out


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["mu", "component", "direct", "predicted", "residual", "residual_over_power"])
    for r in rows:
        w.writerow([f"{r.mu:.12g}", r.component] +
                   [f"{v:.12g}" for v in (r.direct, r.predicted, r.residual, r.residual_over_power)])
    return buf.getvalue()


# -- test utilities ---------------------------------------------------------------------------

def holder_ratio(x) -> float:
    """``max |x(s)-x(t)| / (||x'||_2 |s-t|^(1/2))`` over grid pairs; never exceeds 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    M = x.shape[0]
    norm = float(np.sqrt(spectral.integrate(np.sum(spectral.derivative(x, axis=0) ** 2, axis=1))))
    if norm == 0:
        return 0.0
    s = spectral.grid(M)
    d = np.abs(s[:, None] - s[None, :])
    d = np.minimum(d, spectral.TWO_PI - d)
    diff = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    mask = d > 0
    return float(np.max(diff[mask] / np.sqrt(d[mask])) / norm)


def _junction_root(p: float, a: float, b: float, r: float, sgn: int) -> float:
    """Solve ``sgn (p + q) + r (sqrt(p^2+a^2) + sqrt(q^2+b^2)) = 0`` for ``q`` (``0 <= r < 1``)."""
    f = lambda q: sgn * (p + q) + r * (np.hypot(p, a) + np.hypot(q, b))  # noqa: E731
    span = 1.0 + abs(p) + a + b
    lo, hi = -span, span
    while f(lo) * f(hi) > 0:
        lo, hi = 2 * lo, 2 * hi
    return optimize.brentq(f, lo, hi, xtol=1e-15)


def random_admissible_first_order(alpha: float, beta: float, mu_sign: int, rng,
                                  modes: int = 6, grid_size: int = 256) -> np.ndarray:
    """Random smooth ``x1`` satisfying the first-order closure condition for ``sign(mu)``.

    For ``beta > 0`` the x-component is corrected by ``c1 (1+sin s)/2 + c2 (1-sin s)/2``
    so that its junction values solve the leading constraint.  For
    ``beta = 0`` the limiting conditions are imposed: ``mu x1 <= 0`` at the
    junctions and ``y1 = z1 = 0`` on ``[pi/2, 3pi/2]``.
    """
    _check_ab(alpha, beta)
    s = spectral.grid(grid_size)
    n = np.arange(modes + 1)
    decay = 1.0 / (1.0 + n) ** 2
    x = (np.cos(np.outer(s, n)) @ (rng.standard_normal((modes + 1, 3)) * decay[:, None])
         + np.sin(np.outer(s, n)) @ (rng.standard_normal((modes + 1, 3)) * decay[:, None]))
    ia, ib = grid_size // 4, 3 * grid_size // 4
    up, down = 0.5 * (1 + np.sin(s)), 0.5 * (1 - np.sin(s))
    if beta == 0:
        bump = np.maximum(np.cos(s), 0.0) ** 2
        x[:, 1:] *= bump[:, None]
        targ_a = -mu_sign * abs(x[ia, 0])
        targ_b = -mu_sign * abs(x[ib, 0])
    else:
        r = (alpha - beta) / (alpha + beta)
        targ_a = x[ia, 0]
        targ_b = _junction_root(targ_a, np.hypot(x[ia, 1], x[ia, 2]),
                                np.hypot(x[ib, 1], x[ib, 2]), r, mu_sign)
    x[:, 0] += (targ_a - x[ia, 0]) * up + (targ_b - x[ib, 0]) * down
    return x
