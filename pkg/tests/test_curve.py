import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from loopspec import spectral
from loopspec.curve import (
    TangentField, circle, curvature, default_grid_size, family_F, family_curvature,
    from_json, project_to_admissible, read_curve, to_json, write_curve,
)
from loopspec.errors import DegenerateInput, InvalidAxes, ValidationError
from loopspec.probe import random_curve


def unit_circle_raw(s):
    return np.stack([np.cos(s), np.sin(s), np.zeros_like(s)], axis=1)


def test_projection_leaves_circle_untouched():
    U = project_to_admissible(unit_circle_raw, 4)
    assert U.iterations == 0
    assert np.allclose(U.samples, unit_circle_raw(U.s_grid), atol=1e-15)


def test_projection_of_symmetric_ellipse_is_normalisation():
    raw = lambda s: np.stack([np.cos(s), 0.5 * np.sin(s), 0 * s], axis=1)  # noqa: E731
    U = project_to_admissible(raw, 4)
    s = U.s_grid
    expect = raw(s) / np.sqrt(np.cos(s) ** 2 + 0.25 * np.sin(s) ** 2)[:, None]
    assert np.allclose(U.samples, expect, atol=1e-14)


def test_projection_of_offset_field_converges():
    raw = lambda s: np.stack([np.cos(s) + 0.1, np.sin(s), 0.05 + 0 * s], axis=1)  # noqa: E731
    U = project_to_admissible(raw, 4)
    assert U.iterations > 0
    # defects re-measured independently of the stored fields
    assert np.max(np.abs(np.linalg.norm(U.samples, axis=1) - 1)) < 1e-12
    assert np.linalg.norm(np.mean(U.samples, axis=0)) < 1e-12


def test_projection_rejects_vanishing_field():
    with pytest.raises(DegenerateInput):
        project_to_admissible(lambda s: np.stack([np.cos(s), 0 * s, 0 * s], axis=1), 4, 256)


def test_projection_rejects_bad_shape():
    with pytest.raises(ValidationError):
        project_to_admissible(np.ones((16, 2)), 2, 16)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.0, 0.5))
def test_projection_invariants_hold_for_random_noise(seed, amp):
    U = random_curve(seed, 5, amp)
    assert U.unit_defect <= 1e-10
    assert np.linalg.norm(U.closure_defect) <= 1e-10
    assert curvature(U).closure_gap <= 1e-9


def test_grid_size_rule():
    assert default_grid_size(6) == 256
    assert default_grid_size(100) == 512


def test_family_of_equal_axes_is_circle():
    U = family_F(1, 1)
    assert np.allclose(U.samples, unit_circle_raw(U.s_grid), atol=1e-15)
    assert np.allclose(curvature(U).curvature, 1.0, atol=1e-12)


def test_family_curvature_profile():
    U = family_F(1, 0.5)
    k = curvature(U).curvature
    assert k[0] == pytest.approx(0.5, abs=1e-10)
    assert k[U.grid_size // 4] == pytest.approx(2.0, abs=1e-10)
    assert np.max(np.abs(k - family_curvature(1, 0.5, U.s_grid))) < 1e-8


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
def test_family_defects(beta):
    U = family_F(1, beta)
    assert U.unit_defect <= 1e-12 and np.linalg.norm(U.closure_defect) <= 1e-12


def test_curvature_is_rotation_invariant():
    R = Rotation.from_rotvec([np.pi / 2, 0, 0]).as_matrix()
    assert np.allclose(curvature(family_F(2, 1, R)).curvature, curvature(family_F(2, 1)).curvature,
                       atol=1e-12)


@pytest.mark.parametrize("ab", [(0.5, 1.0), (1.0, 0.0), (1.0, -0.1)])
def test_family_rejects_bad_axes(ab):
    with pytest.raises(InvalidAxes):
        family_F(*ab)


def test_curvature_matches_finite_differences():
    U = random_curve(7, 8, 0.3)
    h = 2 * np.pi / 4096
    s = U.s_grid
    at = lambda t: spectral.evaluate(U.samples, t % (2 * np.pi))  # noqa: E731
    d = (8 * (at(s + h) - at(s - h)) - (at(s + 2 * h) - at(s - 2 * h))) / (12 * h)
    assert np.max(np.abs(np.linalg.norm(d, axis=1) - curvature(U).curvature)) < 1e-6


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_fenchel_bound_and_closed_position(seed):
    U = random_curve(seed, 6, 0.4)
    c = curvature(U)
    assert spectral.integrate(c.curvature) >= 2 * np.pi - 1e-6
    assert c.closure_gap <= 1e-9


def test_json_round_trip(tmp_path):
    U = random_curve(1, 6, 0.2)
    data = to_json(U, 60)
    assert len(data["components"]) == 3 and len(data["components"][0]) == 121
    V = from_json(json.loads(json.dumps(data)))
    assert np.max(np.abs(V.samples - U.samples)) < 1e-10
    p = tmp_path / "u.json"
    write_curve(U, p, modes=60)
    assert np.max(np.abs(read_curve(p).samples - U.samples)) < 1e-10


def test_csv_round_trip_and_nonuniform_samples(tmp_path):
    U = family_F(1, 0.6)
    p = tmp_path / "u.csv"
    write_curve(U, p)
    assert np.max(np.abs(read_curve(p, 60).samples - U.samples)) < 1e-12
    t = np.sort(np.random.default_rng(2).uniform(0, 2 * np.pi, 600))
    X = np.stack([np.cos(t), 0.6 * np.sin(t), 0 * t], axis=1)
    X /= np.linalg.norm(X, axis=1)[:, None]
    q = tmp_path / "v.csv"
    q.write_text("s,Ux,Uy,Uz\n" + "\n".join(",".join(f"{v:.17g}" for v in (a, *x)) for a, x in zip(t, X)))
    V = read_curve(q, 60)
    assert np.max(np.abs(V.samples - U.samples)) < 1e-4


def test_tangent_field_coefficients_are_conjugate_symmetric():
    c = random_curve(4, 6, 0.3).coeffs
    assert np.allclose(c, np.conj(c[:, ::-1]), atol=1e-14)


def test_circle_helper():
    assert isinstance(circle(), TangentField) and circle().grid_size == 256
