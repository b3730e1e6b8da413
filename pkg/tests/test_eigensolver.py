import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import fd_periodic_ground_state
from loopspec import spectral
from loopspec.curve import circle, family_F
from loopspec.eigensolver import (
    dirichlet_spectrum, e0_of_curve, periodic_ground_state, periodic_hamiltonian, richardson,
    sine_basis_values,
)
from loopspec.errors import QuadratureFailure, ValidationError
from loopspec.probe import random_curve


def test_shifted_free_operator():
    r = periodic_ground_state(np.ones(64), 5)
    assert np.allclose(r.eigenvalues, [1, 2, 2, 5, 5], atol=1e-10)
    assert np.all(r.residuals <= 1e-8 * (1 + np.abs(r.eigenvalues)))
    assert r.gap == pytest.approx(1.0)


def test_family_potential_has_unit_ground_state():
    U = family_F(1, 0.5)
    e0, phi = e0_of_curve(U)
    assert e0 == pytest.approx(1.0, abs=1e-8)
    s = U.s_grid
    ref = np.sqrt(np.cos(s) ** 2 + 0.25 * np.sin(s) ** 2)
    ref /= np.sqrt(spectral.integrate(ref**2) / 1.0)
    h = 2 * np.pi / len(s)
    ref_grid = ref / np.sqrt(h * np.sum(ref**2))
    assert np.max(np.abs(phi - ref_grid)) < 1e-8


def test_finite_difference_oracle():
    V = lambda s: 1 + 0.3 * np.cos(2 * s)  # noqa: E731
    lam = periodic_ground_state(V(spectral.grid(256))).eigenvalues[0]
    assert lam == pytest.approx(fd_periodic_ground_state(V), abs=1e-6)


def test_normalisation_and_sign_convention():
    r = periodic_ground_state(1 + 0.5 * np.sin(spectral.grid(128)), 3)
    h = 2 * np.pi / 128
    assert np.allclose(h * np.sum(r.eigenfunctions**2, axis=0), 1.0)
    assert r.eigenfunctions[:, 0].sum() > 0


def test_rayleigh_quotient_consistency():
    V = 2 + np.cos(spectral.grid(128)) ** 3
    r = periodic_ground_state(V, 4)
    H = periodic_hamiltonian(V)
    for lam, phi in zip(r.eigenvalues, r.eigenfunctions.T):
        assert abs(lam - phi @ H @ phi / (phi @ phi)) <= 1e-9 * (1 + abs(lam))


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 1), st.floats(0, 0.5))
def test_monotone_in_the_potential(a, b, c):
    s = spectral.grid(64)
    V1 = a * np.cos(s) + b * np.sin(3 * s) ** 2
    V2 = V1 + c * (1 + np.cos(2 * s))
    assert periodic_ground_state(V1).eigenvalues[0] <= periodic_ground_state(V2).eigenvalues[0] + 1e-9


def test_grid_refinement_stability():
    V = lambda s: np.exp(np.cos(s))  # noqa: E731
    l1 = periodic_ground_state(V(spectral.grid(128))).eigenvalues[0]
    l2 = periodic_ground_state(V(spectral.grid(256))).eigenvalues[0]
    assert abs(l1 - l2) <= 1e-8


@pytest.mark.parametrize("V", [np.ones(48), np.ones(100), np.array([1.0, np.inf] * 32)])
def test_periodic_input_validation(V):
    with pytest.raises(ValidationError):
        periodic_ground_state(V)


def test_circle_ground_state_is_constant():
    e0, phi = e0_of_curve(circle())
    assert e0 == pytest.approx(1.0, abs=1e-10)
    assert np.ptp(phi) < 1e-10


@pytest.mark.parametrize("beta", [0.2, 0.4, 0.6, 0.8])
def test_family_members_share_the_value(beta):
    assert e0_of_curve(family_F(1, beta))[0] == pytest.approx(1.0, abs=1e-7)


def test_random_curve_above_known_floor():
    assert e0_of_curve(random_curve(11, 6, 0.3))[0] >= 0.5


def test_dirichlet_laplacian():
    r = dirichlet_spectrum(lambda s: 0 * s, 20, 5)
    assert np.allclose(r.eigenvalues, [1, 4, 9, 16, 25])


def test_dirichlet_inverse_square_potential_converges():
    V = lambda s: 2 / np.cos(s) ** 2  # noqa: E731
    vals = [dirichlet_spectrum(V, K, 1).eigenvalues[0] for K in (100, 200, 400)]
    assert vals[0] > vals[1] > vals[2] > 4.0
    assert richardson(vals, (100, 200, 400)) == pytest.approx(4.0, abs=1e-3)


def test_dirichlet_fractional_exponent_with_extrapolation():
    V = lambda s: 0.5 / np.cos(s) ** 2  # noqa: E731
    sizes = (100, 200, 400)
    vals = [dirichlet_spectrum(V, K, 1).eigenvalues[0] for K in sizes]
    assert richardson(vals, sizes) == pytest.approx(((1 + np.sqrt(3)) / 2) ** 2, abs=1e-3)


def test_dirichlet_refinement_guard():
    with pytest.raises(QuadratureFailure):
        dirichlet_spectrum(lambda s: 1 / np.cos(s) ** 4, 20, 1)


def test_sine_basis_values():
    v = sine_basis_values(np.array([1.0, 0.0]), np.array([-np.pi / 2, 0.0, np.pi / 2]))
    assert np.allclose(v, [0.0, np.sqrt(2 / np.pi), 0.0], atol=1e-15)


def test_richardson_on_exact_power_law():
    sizes = (10, 20, 40)
    vals = [3 + 5 * K**-1.5 for K in sizes]
    assert richardson(vals, sizes) == pytest.approx(3.0, abs=1e-12)
