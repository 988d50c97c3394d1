"""Vector primitives and the direction-preserving projection operator."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskshape.errors import DimMismatchError, NonFiniteError, ZeroVectorError
from taskshape.geometry import (
    ProjectionConfig,
    Projector,
    TaskDirection,
    as_vector,
    cosine_similarity,
    decompose,
    make_projector,
    progress_coordinate,
    project_image,
    project_text,
    text_direction,
)

finite_floats = st.floats(min_value=-1e6, max_value=1e6,
                          allow_nan=False, allow_infinity=False)


def vectors(dim=4):
    return st.lists(finite_floats, min_size=dim, max_size=dim).map(np.array)


# --- frozen numeric oracles -------------------------------------------------

def test_cosine_similarity_oracle():
    assert cosine_similarity([3.0, 4.0], [4.0, 3.0]) == pytest.approx(0.96)


def test_projection_oracle_along_x():
    d = TaskDirection.from_vector([1.0, 0.0])
    p = make_projector(d, ProjectionConfig(alpha=0.8))
    np.testing.assert_allclose(p.apply([3.0, 4.0]), [3.0, 0.8])


def test_projection_oracle_along_y():
    d = TaskDirection.from_vector([0.0, 1.0])
    p = make_projector(d, ProjectionConfig(alpha=0.5))
    np.testing.assert_allclose(p.apply([4.0, 6.0]), [2.0, 6.0])


def test_project_image_oracle():
    d = TaskDirection.from_vector([1.0, 0.0])
    out = project_image([2.0, 4.0], [0.0, 0.0], d, ProjectionConfig(alpha=0.75))
    np.testing.assert_allclose(out, [2.0, 1.0])


def test_progress_coordinate_oracle():
    d = TaskDirection.from_vector([2.0, 0.0])
    assert progress_coordinate([3.0, 7.0], [0.0, 0.0], d) == pytest.approx(1.5)


def test_decompose_oracle():
    d = TaskDirection.from_vector([1.0, 0.0])
    c, eps = decompose([3.0, 4.0], [0.0, 0.0], d)
    assert c == pytest.approx(3.0)
    np.testing.assert_allclose(eps, [0.0, 4.0])


# --- validation -------------------------------------------------------------

def test_as_vector_rejects_matrix():
    with pytest.raises(DimMismatchError):
        as_vector(np.eye(3))


def test_as_vector_rejects_scalar_dim():
    with pytest.raises(DimMismatchError):
        as_vector([1.0])


def test_as_vector_rejects_nan():
    with pytest.raises(NonFiniteError):
        as_vector([1.0, float("nan")])


def test_zero_direction_rejected():
    with pytest.raises(ZeroVectorError):
        TaskDirection.from_vector([0.0, 0.0, 0.0])


def test_text_direction_degenerate_pair():
    with pytest.raises(ZeroVectorError):
        text_direction([1.0, 2.0], [1.0, 2.0])


def test_cosine_zero_vector():
    with pytest.raises(ZeroVectorError):
        cosine_similarity([0.0, 0.0], [1.0, 1.0])


def test_cosine_dim_mismatch():
    with pytest.raises(DimMismatchError):
        cosine_similarity([1.0, 2.0], [1.0, 2.0, 3.0])


def test_alpha_out_of_range():
    with pytest.raises(ValueError):
        ProjectionConfig(alpha=1.5)


# --- operator properties ----------------------------------------------------

@given(vectors(), st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_along_direction_component_is_preserved(d_raw, alpha):
    if np.linalg.norm(d_raw) < 1e-6:
        return
    d = TaskDirection.from_vector(d_raw)
    p = Projector(direction=d, alpha=alpha)
    # any multiple of d passes through unchanged
    np.testing.assert_allclose(p.apply(3.5 * d.d), 3.5 * d.d,
                               rtol=1e-9, atol=1e-6)


@given(vectors(), vectors(), st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_orthogonal_component_is_shrunk(d_raw, x, alpha):
    if np.linalg.norm(d_raw) < 1e-6 or np.linalg.norm(x) < 1e-6:
        return
    d = TaskDirection.from_vector(d_raw)
    x_perp = x - (np.dot(x, d.d) / d.norm ** 2) * d.d
    if np.linalg.norm(x_perp) < 1e-8:
        return
    p = Projector(direction=d, alpha=alpha)
    np.testing.assert_allclose(p.apply(x_perp), (1.0 - alpha) * x_perp,
                               rtol=1e-7, atol=1e-7)


@given(vectors(), vectors(), finite_floats, finite_floats)
@settings(max_examples=60, deadline=None)
def test_projector_is_linear(x, y, a, b):
    d = TaskDirection.from_vector([1.0, -2.0, 0.5, 3.0])
    p = Projector(direction=d, alpha=0.8)
    combined = a * x + b * y
    if not np.all(np.isfinite(combined)):
        return
    np.testing.assert_allclose(p.apply(combined), a * p.apply(x) + b * p.apply(y),
                               rtol=1e-7, atol=1e-5)


@given(vectors())
@settings(max_examples=40, deadline=None)
def test_alpha_zero_is_identity(x):
    d = TaskDirection.from_vector([0.3, 0.1, -0.7, 2.0])
    p = Projector(direction=d, alpha=0.0)
    np.testing.assert_allclose(p.apply(x), x)


@given(vectors())
@settings(max_examples=40, deadline=None)
def test_alpha_one_is_rank_one_projection(x):
    d = TaskDirection.from_vector([0.3, 0.1, -0.7, 2.0])
    p = Projector(direction=d, alpha=1.0)
    out = p.apply(x)
    # image lies along d and a second application changes nothing
    cross = out - (np.dot(out, d.d) / d.norm ** 2) * d.d
    np.testing.assert_allclose(cross, np.zeros(4), atol=1e-9)
    np.testing.assert_allclose(p.apply(out), out, atol=1e-9)


@given(vectors(), vectors())
@settings(max_examples=60, deadline=None)
def test_decompose_reconstructs_displacement(e_ot, e_start):
    d = TaskDirection.from_vector([1.0, 2.0, -1.0, 0.5])
    c, eps = decompose(e_ot, e_start, d)
    np.testing.assert_allclose(e_start + c * d.d + eps, e_ot,
                               rtol=1e-9, atol=1e-6)
    assert abs(np.dot(eps, d.d)) <= 1e-6 * max(1.0, float(np.linalg.norm(eps)))


def test_start_embedding_is_fixed_point():
    d = TaskDirection.from_vector([1.0, 1.0, 0.0])
    e_start = np.array([5.0, -3.0, 2.0])
    for alpha in (0.0, 0.3, 0.8, 1.0):
        out = project_image(e_start, e_start, d, ProjectionConfig(alpha=alpha))
        np.testing.assert_allclose(out, e_start)


@given(st.floats(min_value=-1e3, max_value=1e3))
@settings(max_examples=40, deadline=None)
def test_cosine_is_scale_invariant(scale):
    if abs(scale) < 1e-6:
        return
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([-1.0, 0.5, 2.0])
    assert cosine_similarity(scale * a, b) == pytest.approx(
        np.sign(scale) * cosine_similarity(a, b), abs=1e-12)


def test_project_text_matches_plain_projection():
    d = TaskDirection.from_vector([2.0, 1.0])
    cfg = ProjectionConfig(alpha=0.6)
    np.testing.assert_allclose(project_text([1.0, 5.0], d, cfg),
                               make_projector(d, cfg).apply([1.0, 5.0]))
