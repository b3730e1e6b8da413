"""Closed loops of length 2*pi described by their unit tangent field."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import spectral
from .errors import DegenerateInput, InvalidAxes, NonConvergence, ValidationError

PROJECTION_TOL = 1e-12
PROJECTION_MAX_ITER = 500


def default_grid_size(modes: int) -> int:
    """Power of two at least ``max(256, 4N+4)``."""
    return spectral.next_pow2(max(256, 4 * modes + 4))


@dataclass(frozen=True)
class TangentField:
    """Unit tangent ``U(s)`` of a closed loop sampled on the uniform grid.

    The grid samples are the authoritative data; ``coeffs`` exposes their
    Fourier coefficients for modes ``-N..N``.
    """

    samples: np.ndarray
    modes: int
    iterations: int = 0
    closure_defect: np.ndarray = field(init=False)
    unit_defect: float = field(init=False)

    def __post_init__(self):
        U = np.array(self.samples, dtype=float)
        U.setflags(write=False)
        object.__setattr__(self, "samples", U)
        object.__setattr__(self, "closure_defect", U.mean(axis=0))
        object.__setattr__(self, "unit_defect",
                           float(np.max(np.abs(np.linalg.norm(U, axis=1) - 1.0))))

    @property
    def grid_size(self) -> int:
        return self.samples.shape[0]

    @property
    def s_grid(self) -> np.ndarray:
        return spectral.grid(self.grid_size)

    @property
    def coeffs(self) -> np.ndarray:
        """Complex coefficients, shape ``(3, 2N+1)``, modes ``-N..N``."""
        c = spectral.coefficients(self.samples, axis=0)
        idx = np.arange(-self.modes, self.modes + 1) % self.grid_size
        return c[idx].T.copy()

    def derivative(self) -> np.ndarray:
        return spectral.derivative(self.samples, axis=0)


@dataclass(frozen=True)
class CurveSamples:
    s_grid: np.ndarray
    position: np.ndarray
    curvature: np.ndarray
    closure_gap: float


def _check_raw(raw: np.ndarray) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 3:
        raise ValidationError(f"expected samples of shape (M, 3), got {raw.shape}")
    if raw.shape[0] < 8:
        raise ValidationError("need at least 8 samples")
    return raw


def project_to_admissible(raw, modes: int, grid_size: int | None = None) -> TangentField:
    """Turn a nonvanishing periodic vector field into an admissible tangent field.

    Alternates pointwise normalisation with subtraction of the mean until
    ``max | |U| - 1 | < 1e-12`` and ``|mean U| < 1e-12``.

    ``raw`` is either an ``(M, 3)`` array of samples on the uniform grid or a
    vectorised callable ``s -> (len(s), 3)``.  Array input is Fourier
    resampled onto ``grid_size`` (default :func:`default_grid_size`).
    """
    M = grid_size or default_grid_size(modes)
    if callable(raw):
        U = _check_raw(raw(spectral.grid(M)))
    else:
        U = _check_raw(raw)
        if U.shape[0] != M:
            U = spectral.resample(U, M, axis=0)
    norms = np.linalg.norm(U, axis=1)
    if norms.min() <= 1e-8:
        raise DegenerateInput("raw field vanishes on the grid")

    for it in range(PROJECTION_MAX_ITER + 1):
        unit = np.max(np.abs(norms - 1.0))
        mean = U.mean(axis=0)
        if unit < PROJECTION_TOL and np.linalg.norm(mean) < PROJECTION_TOL:
            return TangentField(U, modes, iterations=it)
        if it == PROJECTION_MAX_ITER:
            break
        U = U / norms[:, None]
        U = U - U.mean(axis=0)
        norms = np.linalg.norm(U, axis=1)
        if norms.min() <= 1e-8:
            raise DegenerateInput("projection collapsed the field to zero")
        # a closed unit field after normalisation is the common exit
        Un = U / norms[:, None]
        if np.linalg.norm(Un.mean(axis=0)) < PROJECTION_TOL:
            return TangentField(Un, modes, iterations=it + 1)
    raise NonConvergence(f"projection did not converge in {PROJECTION_MAX_ITER} iterations")


def family_F(alpha: float, beta: float, rotation=None, *, phase: float = 0.0,
             grid_size: int = 256) -> TangentField:
    """Tangent of the planar loop with ``U(s) ~ R (alpha cos s, beta sin s, 0)``.

    ``phase`` shifts the arclength origin, ``U(s + phase)``.
    """
    if not (beta > 0) or beta > alpha:
        raise InvalidAxes(f"need alpha >= beta > 0, got alpha={alpha}, beta={beta}")
    R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
    if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-12):
        raise ValidationError("rotation must be a 3x3 orthogonal matrix")
    s = spectral.grid(grid_size) + phase
    X = np.stack([alpha * np.cos(s), beta * np.sin(s), np.zeros_like(s)], axis=1)
    U = X / np.linalg.norm(X, axis=1)[:, None]
    U = U @ R.T
    return TangentField(U, modes=grid_size // 4)


def circle(grid_size: int = 256) -> TangentField:
    return family_F(1.0, 1.0, grid_size=grid_size)


def curvature(U: TangentField) -> CurveSamples:
    """Curvature ``|U'|`` and position ``Y(s) = int_0^s U`` by spectral calculus."""
    kappa = np.linalg.norm(U.derivative(), axis=1)
    Y = spectral.antiderivative(U.samples, axis=0)
    gap = float(np.linalg.norm(spectral.TWO_PI * U.samples.mean(axis=0)))
    return CurveSamples(U.s_grid, Y, kappa, gap)


def family_curvature(alpha: float, beta: float, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return alpha * beta / (alpha**2 * np.cos(s) ** 2 + beta**2 * np.sin(s) ** 2)


# -- file formats -------------------------------------------------------------

def to_json(U: TangentField, modes: int | None = None) -> dict:
    N = U.modes if modes is None else modes
    c = TangentField(U.samples, N).coeffs
    return {"modes": N,
            "components": [[[float(z.real), float(z.imag)] for z in comp] for comp in c]}


def from_json(data: dict, grid_size: int | None = None) -> TangentField:
    N = int(data["modes"])
    comps = np.asarray(data["components"], dtype=float)
    if comps.shape != (3, 2 * N + 1, 2):
        raise ValidationError(f"components must have shape (3, {2 * N + 1}, 2)")
    c = comps[..., 0] + 1j * comps[..., 1]
    M = grid_size or default_grid_size(N)
    n = np.arange(-N, N + 1)
    raw = (np.exp(1j * np.outer(spectral.grid(M), n)) @ c.T).real
    return project_to_admissible(raw, N, M)


def read_curve(path, modes: int | None = None) -> TangentField:
    """Read a tangent field from a ``.json`` coefficient file or a ``s,Ux,Uy,Uz`` CSV."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return from_json(json.loads(path.read_text()))
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: no rows")
    s = np.array([float(r["s"]) for r in rows])
    U = np.array([[float(r["Ux"]), float(r["Uy"]), float(r["Uz"])] for r in rows])
    N = modes or max(1, len(s) // 4)
    M = default_grid_size(N)
    order = np.argsort(s % spectral.TWO_PI)
    s, U = s[order] % spectral.TWO_PI, U[order]
    if np.allclose(np.diff(s), spectral.TWO_PI / len(s), atol=1e-9) and s[0] < 1e-12:
        raw = spectral.resample(U, M, axis=0)
    else:
        ss = np.append(s, s[0] + spectral.TWO_PI)
        UU = np.vstack([U, U[:1]])
        raw = CubicSpline(ss, UU, bc_type="periodic")(spectral.grid(M))
    return project_to_admissible(raw, N, M)


def write_curve(U: TangentField, path, modes: int | None = None) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(to_json(U, modes)))
        return
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "Ux", "Uy", "Uz"])
        for s, u in zip(U.s_grid, U.samples):
            w.writerow([f"{s:.17g}"] + [f"{v:.17g}" for v in u])
