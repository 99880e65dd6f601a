import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flareforge.errors import InvalidArgument, NumericDegenerate
from flareforge.optics import (
    RayState,
    RayTransferMatrix,
    compose,
    is_flat,
    reflection_matrix,
    refraction_matrix,
    trace_ray,
    translation_matrix,
)

finite = st.floats(-50, 50, allow_nan=False)
radius = st.one_of(st.floats(5, 500), st.floats(-500, -5), st.none())
index = st.floats(1.0, 2.0)


@st.composite
def elements(draw):
    kind = draw(st.sampled_from(["T", "R", "L"]))
    if kind == "T":
        return translation_matrix(draw(st.floats(0, 100)))
    if kind == "R":
        return refraction_matrix(draw(index), draw(index), draw(radius))
    return reflection_matrix(draw(radius))


def test_translation_closed_form():
    m = translation_matrix(7.5)
    assert m.as_array().tolist() == [[1.0, 7.5], [0.0, 1.0]]
    assert trace_ray(m, RayState(1.0, 0.1)) == pytest.approx(RayState(1.75, 0.1))


def test_refraction_closed_form():
    m = refraction_matrix(1.0, 1.5, 20.0)
    assert m.c == pytest.approx((1.0 - 1.5) / (1.5 * 20.0), abs=1e-15)
    assert m.d == pytest.approx(1.0 / 1.5, abs=1e-15)
    assert (m.a, m.b) == (1.0, 0.0)


def test_reflection_closed_form():
    m = reflection_matrix(-40.0)
    assert m.as_array().tolist() == [[1.0, 0.0], [2.0 / -40.0, 1.0]]


@pytest.mark.parametrize("flat", [None, math.inf])
def test_flat_surfaces(flat):
    assert is_flat(flat)
    assert refraction_matrix(1.0, 1.5, flat).c == 0.0
    assert reflection_matrix(flat).allclose(RayTransferMatrix.identity())


def test_empty_compose_rejected():
    with pytest.raises(InvalidArgument):
        compose([])


def test_non_finite_translation_rejected():
    with pytest.raises(InvalidArgument):
        translation_matrix(math.nan)


def test_singular_inverse():
    with pytest.raises(NumericDegenerate):
        RayTransferMatrix(1.0, 2.0, 2.0, 4.0).inverse()


def test_compose_rightmost_acts_first():
    t = translation_matrix(10.0)
    lens = refraction_matrix(1.0, 1.5, 25.0)
    ray = RayState(2.0, 0.0)
    assert trace_ray(compose([t, lens]), ray) == pytest.approx(trace_ray(t, trace_ray(lens, ray)))
    assert trace_ray(compose([t, lens]), ray) != pytest.approx(trace_ray(lens, trace_ray(t, ray)))


@given(elements(), elements(), finite, st.floats(-0.3, 0.3))
def test_compose_matches_sequential_trace(a, b, r, theta):
    ray = RayState(r, theta)
    left = trace_ray(compose([a, b]), ray)
    right = trace_ray(a, trace_ray(b, ray))
    assert left.r == pytest.approx(right.r, abs=1e-10)
    assert left.theta == pytest.approx(right.theta, abs=1e-10)


@given(st.floats(0, 100), index, index, radius)
def test_determinants(d, n1, n2, r):
    assert abs(translation_matrix(d).det - 1.0) < 1e-12
    assert abs(refraction_matrix(n1, n2, r).det - n1 / n2) < 1e-12
    assert abs(reflection_matrix(r).det - 1.0) < 1e-12


@given(st.lists(elements(), min_size=1, max_size=6))
def test_compose_agrees_with_numpy(ms):
    ref = np.eye(2)
    for m in ms:
        ref = ref @ m.as_array()
    assert np.allclose(compose(ms).as_array(), ref, atol=1e-9, rtol=1e-12)


@given(elements())
def test_inverse_roundtrip(m):
    assert (m @ m.inverse()).allclose(RayTransferMatrix.identity(), atol=1e-9)
