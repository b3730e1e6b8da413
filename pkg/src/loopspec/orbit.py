"""Orbit form of the eigenvalue problem: ``X(s) = Phi(s) U(s)``.

An orbit is a 2*pi-periodic vector function.  For the ground state ``Phi`` of
a closed loop with tangent ``U`` the Rayleigh quotient ``int|X'|^2 / int|X|^2``
equals ``e0``, and closure of the loop becomes ``int X/|X| ds = 0``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import spectral
from .curve import TangentField
from .errors import DimensionMismatch, NearSingularOrbit, ValidationError, ZeroOrbit

SINGULAR_NORM = 1e-8


@dataclass(frozen=True)
class Orbit:
    samples: np.ndarray
    min_norm: float = field(init=False)
    zero_set: np.ndarray = field(init=False)

    def __post_init__(self):
        X = np.array(self.samples, dtype=float)
        if X.ndim != 2 or X.shape[1] != 3:
            raise DimensionMismatch(f"orbit samples must have shape (M, 3), got {X.shape}")
        X.setflags(write=False)
        object.__setattr__(self, "samples", X)
        r = np.linalg.norm(X, axis=1)
        object.__setattr__(self, "min_norm", float(r.min()))
        object.__setattr__(self, "zero_set", np.nonzero(r < 1e-10)[0])

    @property
    def grid_size(self) -> int:
        return self.samples.shape[0]

    @property
    def s_grid(self) -> np.ndarray:
        return spectral.grid(self.grid_size)

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.samples, axis=1)

    def derivative(self, order: int = 1) -> np.ndarray:
        return spectral.derivative(self.samples, order=order, axis=0)

    @classmethod
    def from_function(cls, f, grid_size: int = 256) -> "Orbit":
        return cls(f(spectral.grid(grid_size)))


@dataclass(frozen=True)
class LagrangeMultiplier:
    """Multiplier ``b`` of the closure constraint."""

    b: tuple = (0.0, 0.0, 0.0)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.b, dtype=dtype or float)


def _vector(b) -> np.ndarray:
    v = np.asarray(b, dtype=float)
    if v.shape != (3,):
        raise DimensionMismatch(f"multiplier must be a 3-vector, got shape {v.shape}")
    return v


def orbit_from_curve(U: TangentField, phi) -> Orbit:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (U.grid_size,):
        raise DimensionMismatch(f"phi has shape {phi.shape}, expected ({U.grid_size},)")
    if np.any(phi <= 0):
        raise ValidationError("phi must be positive on the grid")
    return Orbit(phi[:, None] * U.samples)


def lagrange_functional(X: Orbit) -> float:
    """``(1/2) int (|X'|^2 - |X|^2) ds``."""
    dX = X.derivative()
    return 0.5 * float(spectral.integrate(np.sum(dX**2, axis=1) - np.sum(X.samples**2, axis=1)))


def rayleigh_orbit(X: Orbit) -> float:
    den = float(spectral.integrate(np.sum(X.samples**2, axis=1)))
    if den <= 0:
        raise ZeroOrbit("orbit vanishes identically")
    return float(spectral.integrate(np.sum(X.derivative() ** 2, axis=1))) / den


def _require_regular(X: Orbit) -> None:
    if X.min_norm <= SINGULAR_NORM:
        raise NearSingularOrbit(
            f"min |X| = {X.min_norm:.3e}; use the collapsed-orbit expansions instead")


def closure_integral(X: Orbit) -> np.ndarray:
    """Trapezoid value of ``int X/|X| ds``."""
    _require_regular(X)
    return spectral.integrate(X.samples / X.norms[:, None], axis=0)


def constraint_force(X: np.ndarray, b) -> np.ndarray:
    """``A(s) b = (|X|^2 b - (X.b) X) / |X|^3`` row by row."""
    b = _vector(b)
    r = np.linalg.norm(X, axis=-1)
    return (r[..., None] ** 2 * b - (X @ b)[..., None] * X) / r[..., None] ** 3


def euler_lagrange_residual(X: Orbit, b):
    """Residual ``X'' + X - A(s) b`` of the constrained Euler-Lagrange equation.

    Returns ``(norm, samples)`` with the L2 norm over one period.
    """
    _require_regular(X)
    r = X.derivative(2) + X.samples - constraint_force(X.samples, b)
    return float(np.sqrt(spectral.integrate(np.sum(r**2, axis=1)))), r


def first_integrals(X, b, velocity=None):
    """Energy and angular momentum along an orbit.

    ``X`` is an :class:`Orbit` (velocity by spectral differentiation) or an
    array of positions with ``velocity`` supplied, e.g. from an ODE solve.
    Returns ``(energy, angmom, energy_dev, angmom_dev)`` where the deviations
    are the maximum distance of each sample array from its mean.
    """
    b = _vector(b)
    if isinstance(X, Orbit):
        _require_regular(X)
        pos, vel = X.samples, X.derivative()
    else:
        pos = np.asarray(X, dtype=float)
        if velocity is None:
            raise ValidationError("velocity is required for raw position arrays")
        vel = np.asarray(velocity, dtype=float)
        if np.min(np.linalg.norm(pos, axis=1)) <= SINGULAR_NORM:
            raise NearSingularOrbit("trajectory passes through the origin")
    r = np.linalg.norm(pos, axis=1)
    energy = 0.5 * np.sum(vel**2, axis=1) + 0.5 * r**2 - (pos @ b) / r
    angmom = np.cross(pos, vel) @ b
    return (energy, angmom,
            float(np.max(np.abs(energy - energy.mean()))),
            float(np.max(np.abs(angmom - angmom.mean()))))


def integrate_euler_lagrange(x0, v0, b, s_max: float = spectral.TWO_PI,
                             n_out: int = 512, rtol: float = 1e-10):
    """Integrate ``X'' + X = A(X) b`` from ``(x0, v0)`` with an adaptive 8th-order scheme."""
    b = _vector(b)

    def rhs(_, y):
        x, v = y[:3], y[3:]
        return np.concatenate([v, -x + constraint_force(x, b)])

    s = np.linspace(0.0, s_max, n_out)
    sol = solve_ivp(rhs, (0.0, s_max), np.concatenate([x0, v0]), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2, t_eval=s)
    if not sol.success:
        raise ValidationError(f"integration failed: {sol.message}")
    return s, sol.y[:3].T, sol.y[3:].T


def direction_perturbation_bound(v, w):
    """``(|(v+w)/|v+w| - v/|v||, 4|w|/|v|)``; the first never exceeds the second when ``|v| >= 2|w|``."""
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    nv = np.linalg.norm(v, axis=-1)
    lhs = np.linalg.norm((v + w) / np.linalg.norm(v + w, axis=-1)[..., None]
                         - v / nv[..., None], axis=-1)
    return lhs, 4.0 * np.linalg.norm(w, axis=-1) / nv


# -- CSV ------------------------------------------------------------------------

def write_orbit_csv(X: Orbit, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "Xx", "Xy", "Xz"])
        for s, x in zip(X.s_grid, X.samples):
            w.writerow([f"{s:.17g}"] + [f"{v:.17g}" for v in x])


def read_orbit_csv(path) -> Orbit:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    X = np.array([[float(r["Xx"]), float(r["Xy"]), float(r["Xz"])] for r in rows])
    s = np.array([float(r["s"]) for r in rows])
    if not np.allclose(s, spectral.grid(len(s)), atol=1e-9):
        raise ValidationError("orbit CSV must be sampled on the uniform grid 2*pi*j/M")
    return Orbit(X)
