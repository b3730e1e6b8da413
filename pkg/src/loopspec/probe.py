"""Numerical probes of the lower bound ``e0 >= 1``.

Two tools live here: a derivative-free descent of ``e0`` over admissible
tangent fields, and a scan of ``e0`` along one-parameter perturbations of a
planar elliptical loop.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from . import spectral
from .curve import TangentField, default_grid_size, family_F, project_to_admissible, to_json
from .eigensolver import e0_of_curve
from .errors import LoopspecError, OutOfRange, ProjectionFailure, ValidationError

VIOLATION_MARGIN = 1e-6
PERSIST_MARGIN = 1e-3
FLOOR = 0.5
DEFAULT_MUS = (0.005, 0.01, 0.02, 0.04)


@dataclass(frozen=True)
class ProbeConfig:
    modes: int = 6
    max_evals: int = 2000
    step0: float = 0.05
    step_min: float = 1e-4
    shrink: float = 0.5
    seed: int = 0
    restarts: int = 1
    amplitude: float = 0.3
    accept_tol: float = 1e-10
    ratio_grid: int = 12
    phase_grid: int = 16
    nm_restarts: int = 3

    def __post_init__(self):
        if self.modes < 2:
            raise OutOfRange("modes must be at least 2")
        if self.max_evals < 1 or self.restarts < 0 or self.ratio_grid < 2 \
                or self.phase_grid < 2 or self.nm_restarts < 1:
            raise OutOfRange("caps and grid sizes must be positive")
        if not (self.step0 > 0 and self.step_min > 0 and 0 < self.shrink < 1):
            raise OutOfRange("need step0 > 0, step_min > 0, 0 < shrink < 1")
        if not 0 <= self.amplitude <= 0.5:
            raise OutOfRange("amplitude must lie in [0, 0.5]")
        if self.accept_tol < 0:
            raise OutOfRange("accept_tol must be nonnegative")

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeConfig":
        names = cls.__dataclass_fields__
        unknown = set(d) - set(names)
        if unknown:
            raise ValidationError(f"unknown probe settings: {sorted(unknown)}")
        return cls(**{k: type(getattr(cls, k))(v) for k, v in d.items()})


@dataclass(frozen=True)
class FamilyDistance:
    distance: float
    ratio: float
    phase: float
    rotation: np.ndarray


@dataclass
class ProbeRecord:
    seed: int | None
    config: dict
    start_e0: float
    best_e0: float
    e0_history: list
    evaluations: int
    accepted_steps: int
    status: str
    final_field: TangentField
    family_distance: float
    family_ratio: float
    family_phase: float
    violation_flag: bool = field(init=False)

    def __post_init__(self):
        self.violation_flag = bool(self.best_e0 < 1.0 - VIOLATION_MARGIN)

    def to_dict(self, field_modes: int = 32) -> dict:
        U = self.final_field
        out = {k: v for k, v in asdict(self).items() if k != "final_field"}
        out["final_field"] = to_json(U, min(field_modes, U.grid_size // 2 - 1))
        if self.best_e0 < 1.0 - PERSIST_MARGIN:
            # full samples: replay does not depend on the truncated coefficients
            out["reproduction"] = {"grid_size": U.grid_size, "samples": U.samples.tolist()}
        return out


# -- curves ------------------------------------------------------------------------

def random_curve(seed: int, N: int, amplitude: float,
                 grid_size: int | None = None) -> TangentField:
    """Circle tangent plus seeded trigonometric noise of sup-norm ``amplitude``, projected."""
    if not 0 <= amplitude <= 0.5:
        raise OutOfRange("amplitude must lie in [0, 0.5]")
    if N < 1:
        raise OutOfRange("N must be positive")
    M = grid_size or default_grid_size(N)
    s = spectral.grid(M)
    raw = np.stack([np.cos(s), np.sin(s), np.zeros(M)], axis=1)
    if amplitude > 0:
        rng = np.random.default_rng(seed)
        k = np.arange(N + 1)
        a = rng.standard_normal((N + 1, 3)) / (1.0 + k[:, None])
        b = rng.standard_normal((N + 1, 3)) / (1.0 + k[:, None])
        b[0] = 0.0
        noise = np.cos(np.outer(s, k)) @ a + np.sin(np.outer(s, k)) @ b
        raw = raw + amplitude * noise / np.max(np.linalg.norm(noise, axis=1))
    return project_to_admissible(raw, N, M)


def _trig_basis(M: int, N: int) -> np.ndarray:
    s = spectral.grid(M)
    k = np.arange(1, N + 1)
    return np.concatenate([np.cos(np.outer(s, k)), np.sin(np.outer(s, k))], axis=1).T


# -- distance to the family of ellipse tangents -----------------------------------------

def _ellipse_tangent(ratio: float, phase: float, s: np.ndarray) -> np.ndarray:
    t = s + phase
    X = np.stack([np.cos(t), ratio * np.sin(t), np.zeros_like(t)], axis=1)
    return X / np.linalg.norm(X, axis=1)[:, None]


def _procrustes(U: np.ndarray, F: np.ndarray):
    W, sig, Vt = np.linalg.svd(U.T @ F)
    h = spectral.TWO_PI / U.shape[0]
    d2 = h * (np.sum(U**2) + np.sum(F**2) - 2.0 * sig.sum())
    return np.sqrt(max(d2, 0.0)), W @ Vt


def family_distance(U: TangentField, cfg: ProbeConfig | None = None) -> FamilyDistance:
    """L2 distance from ``U`` to the closest tangent ``R (cos, r sin, 0)(s + phase)/|.|``.

    Rotation ``R`` ranges over O(3) and is solved exactly; ratio and phase
    are searched on a grid and refined by Nelder-Mead.
    """
    cfg = cfg or ProbeConfig()
    s = U.s_grid
    S = U.samples

    def dist(p):
        r = float(np.clip(p[0], 1e-3, 1.0))
        return _procrustes(S, _ellipse_tangent(r, p[1], s))[0]

    ratios = np.linspace(0.05, 1.0, cfg.ratio_grid)
    phases = np.linspace(0.0, np.pi, cfg.phase_grid, endpoint=False)
    scores = np.array([[dist((r, p)) for p in phases] for r in ratios])
    starts = np.argsort(scores, axis=None)[:cfg.nm_restarts]
    best = (np.inf, None)
    for idx in starts:
        i, j = np.unravel_index(idx, scores.shape)
        res = minimize(dist, [ratios[i], phases[j]], method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 400,
                                "initial_simplex": [[ratios[i], phases[j]],
                                                    [ratios[i] - 0.03, phases[j]],
                                                    [ratios[i], phases[j] + 0.05]]})
        if res.fun < best[0]:
            best = (float(res.fun), res.x)
    r = float(np.clip(best[1][0], 1e-3, 1.0))
    ph = float(best[1][1] % np.pi)
    d, R = _procrustes(S, _ellipse_tangent(r, ph, s))
    return FamilyDistance(float(d), r, ph, R)


# -- descent ---------------------------------------------------------------------------

def _evaluate(raw: np.ndarray, modes: int):
    try:
        V = project_to_admissible(raw, modes, raw.shape[0])
        return e0_of_curve(V)[0], V
    except LoopspecError:
        return np.inf, None


def minimize_e0(start: TangentField, cfg: ProbeConfig, *, seed: int | None = None) -> ProbeRecord:
    """Coordinate pattern search on ``e0`` over Fourier perturbations of the tangent.

    A trial adds ``+-step`` times ``cos(ks)`` or ``sin(ks)`` (``1 <= k <= N``)
    to one component of the current field and re-projects.  Only trials that
    lower ``e0`` by more than ``accept_tol`` are accepted.  The step shrinks
    after a sweep without progress; the search ends below ``step_min`` (after
    ``restarts`` restarts at ``step0``) or at the evaluation cap.
    """
    M = start.grid_size
    basis = _trig_basis(M, cfg.modes)
    cur = start
    best = e0_of_curve(start)[0]
    start_e0 = best
    history = [best]
    evals, accepted = 1, 0
    status = "converged"
    restarts_left = cfg.restarts
    step = cfg.step0
    while True:
        improved = False
        for comp in range(3):
            for phi in basis:
                for sign in (1.0, -1.0):
                    if evals >= cfg.max_evals:
                        status = "eval_cap"
                        break
                    raw = cur.samples.copy()
                    raw[:, comp] += sign * step * phi
                    e, V = _evaluate(raw, cfg.modes)
                    evals += 1
                    if e < best - cfg.accept_tol:
                        best, cur = e, V
                        accepted += 1
                        improved = True
                    history.append(best)
                    if V is cur:
                        break
                if status == "eval_cap":
                    break
            if status == "eval_cap":
                break
        if status == "eval_cap":
            break
        if not improved:
            step *= cfg.shrink
            if step < cfg.step_min:
                if restarts_left == 0 or accepted == 0:
                    break
                restarts_left -= 1
                step = cfg.step0
    fd = family_distance(cur, cfg)
    return ProbeRecord(seed, asdict(cfg), float(start_e0), float(best),
                       [float(v) for v in history], evals, accepted, status, cur,
                       fd.distance, fd.ratio, fd.phase)


def run_probe(seed: int, cfg: ProbeConfig) -> ProbeRecord:
    return minimize_e0(random_curve(seed, cfg.modes, cfg.amplitude), cfg, seed=seed)


def _worker(args):
    seed, cfg_dict = args
    return run_probe(seed, ProbeConfig(**cfg_dict))


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("LOOPSPEC_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ValidationError(f"LOOPSPEC_THREADS must be an integer, got {cap!r}") from exc
    return max(1, min(n, n_tasks))


def run_probes(seeds, cfg: ProbeConfig, out=None, workers: int | None = None) -> list[ProbeRecord]:
    """Run one probe per seed; records come back (and are appended to ``out``) in seed order."""
    seeds = sorted(int(s) for s in seeds)
    n = workers or worker_count(len(seeds))
    cfg_d = asdict(cfg)
    if n == 1:
        records = [run_probe(s, cfg) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            records = list(pool.map(_worker, [(s, cfg_d) for s in seeds]))
    if out is not None:
        append_jsonl(records, out)
    return records


def append_jsonl(records, path) -> None:
    with Path(path).open("a") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


# -- local scan around an ellipse --------------------------------------------------------

def ellipse_tangent(alpha: float, beta: float, grid_size: int = 256) -> np.ndarray:
    return family_F(alpha, beta, grid_size=grid_size).samples


def admissible_direction(U0: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``P (v - c)`` with ``P = I - U0 U0^T`` and ``c`` chosen so the result integrates to zero."""
    P = np.eye(3)[None] - U0[:, :, None] * U0[:, None, :]
    Pint = spectral.integrate(P, axis=0)
    c = np.linalg.solve(Pint, spectral.integrate(np.einsum("mij,mj->mi", P, v), axis=0))
    return np.einsum("mij,mj->mi", P, v - c)


def _d_beta(alpha: float, beta: float, grid_size: int) -> np.ndarray:
    s = spectral.grid(grid_size)
    X = np.stack([alpha * np.cos(s), beta * np.sin(s), np.zeros_like(s)], axis=1)
    r = np.linalg.norm(X, axis=1)
    U0 = X / r[:, None]
    e2 = np.stack([np.zeros_like(s), np.sin(s), np.zeros_like(s)], axis=1)
    return (e2 - U0 * np.sum(U0 * e2, axis=1)[:, None]) / r[:, None]


def family_tangent_space(alpha: float, beta: float, grid_size: int = 256) -> np.ndarray:
    """Directions that keep the loop inside the family: rotations, arclength shift, ``d/dbeta``.

    Returned as an orthonormal (in L2 over the period) stack ``(r, M, 3)``.
    """
    U0 = ellipse_tangent(alpha, beta, grid_size)
    dirs = [_d_beta(alpha, beta, grid_size), spectral.derivative(U0, axis=0)]
    for axis in range(3):
        w = np.zeros(3)
        w[axis] = 1.0
        dirs.append(np.cross(w, U0))
    A = np.stack([d.ravel() for d in dirs], axis=1) * np.sqrt(spectral.TWO_PI / grid_size)
    Q, sv, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    return (Q[:, :rank].T / np.sqrt(spectral.TWO_PI / grid_size)).reshape(rank, grid_size, 3)


def _l2(u, v) -> float:
    return float(spectral.integrate(np.sum(u * v, axis=1)))


def direction(name: str, alpha: float, beta: float, grid_size: int = 256) -> np.ndarray:
    """First-order tangent direction named by ``name``, scaled to ``max |u1| = 1``.

    ``family``: the change of axis ratio.  ``outofplane``: ``(0, 0, cos 2s)``
    made admissible.  ``random:SEED``: a seeded random field made admissible
    with the family directions removed.
    """
    s = spectral.grid(grid_size)
    U0 = ellipse_tangent(alpha, beta, grid_size)
    if name == "family":
        u = _d_beta(alpha, beta, grid_size)
    elif name == "outofplane":
        v = np.stack([np.zeros_like(s), np.zeros_like(s), np.cos(2 * s)], axis=1)
        u = admissible_direction(U0, v)
    elif name.startswith("random:"):
        try:
            seed = int(name.split(":", 1)[1])
        except ValueError as exc:
            raise ValidationError(f"bad direction {name!r}") from exc
        rng = np.random.default_rng(seed)
        k = np.arange(5)
        v = (np.cos(np.outer(s, k)) @ rng.standard_normal((5, 3))
             + np.sin(np.outer(s, k)) @ rng.standard_normal((5, 3)))
        u = admissible_direction(U0, v)
        for t in family_tangent_space(alpha, beta, grid_size):
            u = u - _l2(u, t) * t
    else:
        raise ValidationError(f"unknown direction {name!r}; use family, outofplane or random:SEED")
    peak = np.max(np.linalg.norm(u, axis=1))
    if peak < 1e-12:
        raise ValidationError(f"direction {name!r} vanishes")
    return u / peak


def check_direction(U0: np.ndarray, u1: np.ndarray, tol: float = 1e-9) -> None:
    if u1.shape != U0.shape:
        raise ValidationError(f"direction has shape {u1.shape}, expected {U0.shape}")
    if np.max(np.abs(np.sum(U0 * u1, axis=1))) > tol:
        raise ValidationError("direction is not orthogonal to the tangent")
    if np.linalg.norm(spectral.integrate(u1, axis=0)) > tol:
        raise ValidationError("direction does not integrate to zero")


def perturbed_tangent(U0: np.ndarray, u1: np.ndarray, mu: float) -> TangentField:
    """Exponential map ``cos(mu|u1|) U0 + sin(mu|u1|) u1/|u1|`` followed by closure projection."""
    n = np.linalg.norm(u1, axis=1)
    theta = mu * n
    if np.max(np.abs(theta)) > 0.25 * np.pi:
        raise ProjectionFailure(f"mu={mu} rotates the tangent by more than pi/4")
    safe = np.where(n > 0, n, 1.0)
    U = np.cos(theta)[:, None] * U0 + (np.sin(theta) / safe)[:, None] * u1
    M = U0.shape[0]
    try:
        return project_to_admissible(U, M // 4, M)
    except LoopspecError as exc:
        raise ProjectionFailure(f"closure projection failed at mu={mu}: {exc}") from exc


@dataclass(frozen=True)
class ScanResult:
    alpha: float
    beta: float
    direction: str
    mu: np.ndarray
    e0: np.ndarray
    q: float
    odd_coefficient: float
    coefficients: np.ndarray
    min_excess: float
    fit_residual: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "direction": self.direction,
                "mu": self.mu.tolist(), "e0": self.e0.tolist(), "q": self.q,
                "odd_coefficient": self.odd_coefficient,
                "coefficients": self.coefficients.tolist(),
                "min_excess": self.min_excess, "fit_residual": self.fit_residual}


def symmetric_grid(mus) -> np.ndarray:
    m = np.unique(np.abs(np.asarray(mus, dtype=float)))
    m = m[m > 0]
    if m.size < 2:
        raise ValidationError("need at least two distinct nonzero |mu| values")
    return np.concatenate([-m[::-1], m])


def theorem1_scan(alpha: float, beta: float, u1="outofplane", mu_grid=DEFAULT_MUS,
                  grid_size: int = 256) -> ScanResult:
    """``e0`` along ``mu -> exp-map(U0, mu u1)`` with a fit ``e0 - 1 ~ c1 mu + q mu^2 + c3 mu^3 + c4 mu^4``.

    ``u1`` is a direction name or an admissible sample array.
    """
    U0 = ellipse_tangent(alpha, beta, grid_size)
    label = u1 if isinstance(u1, str) else "custom"
    u = direction(u1, alpha, beta, grid_size) if isinstance(u1, str) else np.asarray(u1, float)
    check_direction(U0, u)
    mu = symmetric_grid(mu_grid)
    e = np.array([e0_of_curve(perturbed_tangent(U0, u, m))[0] for m in mu])
    A = np.stack([mu, mu**2, mu**3, mu**4], axis=1)
    coef, *_ = np.linalg.lstsq(A, e - 1.0, rcond=None)
    resid = float(np.max(np.abs(A @ coef - (e - 1.0))))
    return ScanResult(float(alpha), float(beta), label, mu, e, float(coef[1]), float(coef[0]),
                      coef, float(np.min(e) - 1.0), resid)
