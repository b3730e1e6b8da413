import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import sharp_form_cos_power
from loopspec import gegenbauer as gg
from loopspec.errors import BoundaryViolation, OutOfRange

H = np.pi / 2


def gegenbauer_sum(n, lam, z):
    """Explicit finite sum for ``C_n^(lam)(z)`` in extended precision."""
    lam, z = mp.mpf(lam), mp.mpf(z)
    return mp.fsum((-1) ** k * mp.gamma(n - k + lam) / (mp.gamma(lam) * mp.factorial(k)
                                                        * mp.factorial(n - 2 * k)) * (2 * z) ** (n - 2 * k)
                   for k in range(n // 2 + 1))


@pytest.mark.parametrize("g, a", [(0, 1), (2, 2), (-0.25, 0.5), (0.75, 1.5)])
def test_exponent(g, a):
    assert gg.exponent_a(g) == pytest.approx(a, abs=1e-15)


def test_exponent_domain():
    with pytest.raises(OutOfRange):
        gg.exponent_a(-0.3)
    with pytest.raises(OutOfRange):
        gg.eigenvalue(-0.25, 0)
    with pytest.raises(OutOfRange):
        gg.eigenvalue(1, -1)


def test_eigenvalue_formula():
    assert [gg.eigenvalue(0, n) for n in range(3)] == [1, 4, 9]
    assert gg.eigenvalue(2, 0) == 4
    assert gg.eigenvalue(0.5, 1) == pytest.approx(((3 + np.sqrt(3)) / 2) ** 2, rel=1e-15)
    sp = gg.GegenbauerSpectrum.of(2)
    assert sp.a == 2 and sp.eigenvalue(3) == 25


@pytest.mark.parametrize("g", [-0.2, -0.1, 0.5, 2])
def test_lowest_two_levels(g):
    lam0, lam1 = gg.eigenvalue(g, 0), gg.eigenvalue(g, 1)
    assert lam0 > 0.25 and lam1 > 1
    if g > 0:
        assert lam0 > 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 12), st.floats(0.5, 4), st.floats(-0.99, 0.99))
def test_polynomial_against_mpmath(n, lam, z):
    assert gg.gegenbauer(n, lam, z) == pytest.approx(float(gegenbauer_sum(n, lam, z)), rel=1e-11, abs=1e-11)


@pytest.mark.parametrize("n, lam", [(0, 1.0), (3, 0.7), (6, 2.5)])
def test_norm_against_mpmath(n, lam):
    ref = mp.quad(lambda z: (1 - z**2) ** (lam - 0.5) * gegenbauer_sum(n, lam, z) ** 2, [-1, 0, 1])
    assert gg.gegenbauer_norm(n, lam) == pytest.approx(float(ref), rel=1e-12)


def test_eigenfunction_shapes():
    s = np.linspace(-1.5, 1.5, 11)
    w = gg.eigenfunction(0, 0, s)
    assert np.allclose(w, np.cos(s) * np.sqrt(2 / np.pi))
    w = gg.eigenfunction(2, 0, s)
    assert np.allclose(w, np.cos(s) ** 2 / np.sqrt(3 * np.pi / 8))
    assert np.allclose(gg.eigenfunction(0.5, 2, np.array([-H, H])), 0, atol=1e-15)


@pytest.mark.parametrize("g, n", [(0.5, 2), (-0.2, 1), (2, 3)])
def test_eigenfunction_against_mpmath(g, n):
    a = mp.mpf(gg.exponent_a(g))
    norm = mp.sqrt(mp.quad(lambda s: mp.cos(s) ** (2 * a) * gegenbauer_sum(n, a, mp.sin(s)) ** 2,
                           [-mp.pi / 2, 0, mp.pi / 2]))
    f = lambda s: mp.cos(s) ** a * gegenbauer_sum(n, a, mp.sin(s)) / norm  # noqa: E731
    for s in (-1.2, 0.1, 0.9):
        w, dw, d2w = gg.eigenfunction(g, n, np.array([s]), derivatives=2)
        assert w[0] == pytest.approx(float(f(s)), rel=1e-11, abs=1e-13)
        assert dw[0] == pytest.approx(float(mp.diff(f, s)), rel=1e-9, abs=1e-11)
        assert d2w[0] == pytest.approx(float(mp.diff(f, s, 2)), rel=1e-8, abs=1e-10)


@pytest.mark.parametrize("g", [-0.2, 0.5, 2])
def test_operator_residual(g):
    for n in range(4):
        assert gg.eigenfunction_residual(g, n) <= 1e-7 * gg.eigenvalue(g, n)


@pytest.mark.parametrize("g", [-0.2, 0.5])
def test_orthonormality(g):
    assert np.max(np.abs(gg.gram_matrix(g, 6) - np.eye(7))) <= 1e-8


@pytest.mark.parametrize("g", [0, 0.5, 2])
def test_galerkin_cross_validation(g):
    rows = gg.spectrum_table(g, 3)
    assert all(r["abserr"] <= 1e-3 for r in rows)
    text = gg.table_to_csv(rows)
    assert text.splitlines()[0] == "g,n,lambda_exact,lambda_numeric,abserr"


def test_recursion_examples():
    r = gg.recursion_coefficients(0, 4, 10)
    assert r.terminates and r.last_nonzero == 1 and np.all(r.coefficients[2:] == 0)
    r = gg.recursion_coefficients(0.5, ((1 + np.sqrt(3)) / 2) ** 2, 10)
    assert r.terminates and r.last_nonzero == 0
    r = gg.recursion_coefficients(2, 5, 2000)
    b = r.coefficients
    assert not r.terminates and np.all(b != 0)
    # b_n ~ n^(a - 3/2) (1 + O(1/n)) with a = 2, so n (b_{n+1}/b_n - 1) -> 1/2
    local = [n * (b[n + 1] / b[n] - 1) for n in (100, 1000, 1999)]
    assert abs(local[0] - 0.5) > abs(local[1] - 0.5) > abs(local[2] - 0.5)
    assert local[2] == pytest.approx(0.5, abs=5e-3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), st.integers(0, 6))
def test_recursion_terminates_exactly_on_levels(g, m):
    assert gg.recursion_coefficients(g, gg.eigenvalue(g, m), 10).last_nonzero == m
    assert not gg.recursion_coefficients(g, gg.eigenvalue(g, m) + 1e-6, 10).terminates


def test_hardy_closed_forms():
    lhs, rhs = gg.hardy_check(lambda s: s * (1 - s), lambda s: 1 - 2 * s, 1.0)
    assert lhs == pytest.approx(1 / 12, abs=1e-12) and rhs == pytest.approx(1 / 3, abs=1e-12)
    lhs, rhs = gg.hardy_check(lambda s: np.sin(np.pi * s), lambda s: np.pi * np.cos(np.pi * s), 1.0)
    ref = float(mp.quad(lambda s: mp.sin(mp.pi * s) ** 2 / s**2, [0, 1])) / 4
    assert lhs == pytest.approx(ref, abs=1e-10) and rhs == pytest.approx(np.pi**2 / 2, abs=1e-12)
    l3, r3 = gg.hardy_check(lambda s: 3 * np.sin(np.pi * s), lambda s: 3 * np.pi * np.cos(np.pi * s), 1.0)
    assert (l3, r3) == pytest.approx((9 * lhs, 9 * rhs), rel=1e-12)


def test_hardy_requires_vanishing_ends():
    with pytest.raises(BoundaryViolation):
        gg.hardy_check(lambda s: 1 + 0 * s, lambda s: 0 * s, 1.0)
    with pytest.raises(BoundaryViolation):
        gg.sharp_quarter_form(lambda s: 1 + 0 * s, lambda s: 0 * s)


def sine_series(rng, length, K=12):
    c = rng.standard_normal(K) / np.arange(1, K + 1) ** 2
    k = np.arange(1, K + 1) * np.pi / length
    w = lambda s: np.sin(np.multiply.outer(s, k)) @ c  # noqa: E731
    dw = lambda s: np.cos(np.multiply.outer(s, k)) @ (c * k)  # noqa: E731
    return w, dw


def test_hardy_on_random_dirichlet_series():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        length = rng.uniform(0.5, 3)
        lhs, rhs = gg.hardy_check(*sine_series(rng, length), length)
        assert lhs <= rhs + 1e-9


def test_sharp_form_on_random_dirichlet_series():
    rng = np.random.default_rng(7)
    for _ in range(100):
        w, dw = sine_series(rng, np.pi)
        assert gg.sharp_quarter_form(lambda s: w(s + H), lambda s: dw(s + H)) >= -1e-6


def test_sharp_form_of_cosine_powers():
    Q = gg.sharp_quarter_form(np.cos, lambda s: -np.sin(s))
    assert Q == pytest.approx(sharp_form_cos_power(1.0), abs=1e-10)
    assert gg.sharp_quarter_form(lambda s: 0 * s, lambda s: 0 * s) == 0
    vals = []
    for eps in (0.2, 0.1, 0.05):
        p = 0.5 + eps
        q = gg.sharp_quarter_form(lambda s, c: c**p, lambda s, c: -p * c ** (p - 1) * np.sin(s),
                                  with_distances=True)
        assert q == pytest.approx(sharp_form_cos_power(p), rel=1e-7)
        vals.append(q)
    assert vals[0] > vals[1] > vals[2] > 0
