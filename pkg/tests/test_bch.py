"""Group law in exponential coordinates and the induced metric coefficients."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nilflow.bch import (
    MetricField,
    bch_product,
    left_translation_differential,
    metric_at,
    metric_convergence_distance,
    metric_field_2step,
    metric_field_fit,
    translation_jacobian,
)
from nilflow.exceptions import BracketFormatError, DegreeTooHigh, DimensionMismatch
from nilflow.generators import filiform, heisenberg, random_two_step

from conftest import random_sphere_bracket


def _ad_matrix(b, x):
    return np.einsum("i,ijk->kj", x, b.coeffs)


# ---------------------------------------------------------------------------
# the product itself


def test_two_step_product_is_three_terms(heis):
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    expected = x + y + 0.5 * heis.apply(x, y)
    assert np.allclose(bch_product(heis, x, y), expected, atol=1e-14)


def test_heisenberg_closed_form():
    b = heisenberg(2.5)
    x = np.array([0.3, -1.1, 0.7])
    y = np.array([-0.4, 0.9, 2.0])
    z = x + y
    z[2] += 0.5 * 2.5 * (x[0] * y[1] - x[1] * y[0])
    assert np.allclose(bch_product(b, x, y), z, atol=1e-13)


def test_three_step_product_matches_dynkin_terms(fil4):
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    br = fil4.apply
    expected = (
        x + y + 0.5 * br(x, y) + br(x, br(x, y)) / 12.0 - br(y, br(x, y)) / 12.0
    )
    assert np.allclose(bch_product(fil4, x, y), expected, atol=1e-12)


def test_four_step_product_matches_dynkin_terms():
    b = filiform(5)
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(5), rng.standard_normal(5)
    br = b.apply
    xy = br(x, y)
    expected = (
        x
        + y
        + 0.5 * xy
        + br(x, xy) / 12.0
        - br(y, xy) / 12.0
        - br(y, br(x, xy)) / 24.0
    )
    assert np.allclose(bch_product(b, x, y), expected, atol=1e-12)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_group_axioms(seed):
    b = filiform(5)
    rng = np.random.default_rng(seed)
    x, y, z = rng.standard_normal((3, 5))
    assert np.allclose(bch_product(b, x, np.zeros(5)), x, atol=1e-12)
    assert np.allclose(bch_product(b, np.zeros(5), x), x, atol=1e-12)
    assert np.allclose(bch_product(b, x, -x), np.zeros(5), atol=1e-12)
    lhs = bch_product(b, bch_product(b, x, y), z)
    rhs = bch_product(b, x, bch_product(b, y, z))
    assert np.allclose(lhs, rhs, atol=1e-11), f"associativity off by {np.abs(lhs - rhs).max():.2e}"


def test_degree_hint_matches_default(fil4):
    x = np.array([1.0, 0.5, -0.25, 2.0])
    y = np.array([0.1, -0.2, 0.3, -0.4])
    assert np.array_equal(bch_product(fil4, x, y, degree=3), bch_product(fil4, x, y))


def test_product_rejects_wrong_length(heis):
    with pytest.raises(DimensionMismatch):
        bch_product(heis, np.zeros(4), np.zeros(3))


# ---------------------------------------------------------------------------
# translations and the left-invariant metric


def test_two_step_frame_differential(heis):
    # at degree 2 the differential of translation by -x is exactly I - ad_x/2
    x = np.array([0.7, -0.3, 1.9])
    expected = np.eye(3) - 0.5 * _ad_matrix(heis, x)
    assert np.allclose(left_translation_differential(heis, x), expected, atol=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_translations_are_volume_preserving(seed):
    b = filiform(5)
    rng = np.random.default_rng(seed)
    z, x = rng.standard_normal((2, 5))
    assert np.linalg.det(translation_jacobian(b, z, x)) == pytest.approx(1.0, rel=1e-10)


def test_heisenberg_metric_closed_form(heis):
    x1, x2 = 0.8, -1.3
    g = metric_at(heis, np.array([x1, x2, 0.4]))
    expected = np.array(
        [
            [1 + x2**2 / 4, -x1 * x2 / 4, x2 / 2],
            [-x1 * x2 / 4, 1 + x1**2 / 4, -x1 / 2],
            [x2 / 2, -x1 / 2, 1.0],
        ]
    )
    assert np.allclose(g, expected, atol=1e-13)


@given(seed=st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_metric_left_invariance(seed):
    b = filiform(4)
    rng = np.random.default_rng(seed)
    z, x = rng.standard_normal((2, 4))
    a = translation_jacobian(b, z, x)
    pulled = a.T @ metric_at(b, bch_product(b, z, x)) @ a
    assert np.allclose(pulled, metric_at(b, x), atol=1e-11)


def test_metric_at_identity_is_euclidean(fil4):
    assert np.allclose(metric_at(fil4, np.zeros(4)), np.eye(4), atol=1e-14)


# ---------------------------------------------------------------------------
# polynomial coefficient tables


@pytest.mark.parametrize("seed", range(4))
def test_2step_field_matches_pointwise_metric(seed):
    b = random_two_step(4, np.random.default_rng(seed))
    field = metric_field_2step(b)
    rng = np.random.default_rng(100 + seed)
    for _ in range(5):
        x = rng.standard_normal(4)
        assert np.allclose(field(x), metric_at(b, x), atol=1e-12)


def test_2step_field_rejects_higher_degree(fil4):
    with pytest.raises(DegreeTooHigh):
        metric_field_2step(fil4)


def test_fitted_field_matches_pointwise_metric(fil4):
    field = metric_field_fit(fil4)
    assert field.degree == 4
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = rng.standard_normal(4) * 0.8
        assert np.abs(field(x) - metric_at(fil4, x)).max() < 1e-9


def test_fitted_field_linear_terms(fil4):
    # the degree-1 coefficients of g are -(mu(e_r, .) + transpose)/2
    field = metric_field_fit(fil4)
    c = fil4.coeffs
    for r in range(4):
        alpha = tuple(1 if t == r else 0 for t in range(4))
        expected = -0.5 * (c[r].T + c[r])
        got = field.coefficients.get(alpha, np.zeros((4, 4)))
        assert np.allclose(got, expected, atol=1e-10), f"x_{r + 1} coefficient wrong"


def test_field_derivative_matches_finite_differences(fil4):
    field = metric_field_fit(fil4)
    dfield = field.derivative((1, 0, 0, 0))
    x = np.array([0.3, -0.2, 0.5, 0.1])
    eps = 1e-6
    step = np.array([eps, 0, 0, 0])
    fd = (field(x + step) - field(x - step)) / (2 * eps)
    assert np.allclose(dfield(x), fd, atol=1e-7)


def test_field_serialization_round_trip(fil4):
    field = metric_field_fit(fil4)
    again = MetricField.from_dict(field.to_dict())
    assert again.n == field.n and again.degree == field.degree
    x = np.array([0.4, 0.1, -0.7, 0.2])
    assert np.allclose(again(x), field(x), atol=1e-15)


def test_field_from_dict_rejects_garbage():
    with pytest.raises(BracketFormatError):
        MetricField.from_dict({"n": 2})
    with pytest.raises(BracketFormatError):
        MetricField.from_dict(
            {"n": 2, "degree": 1, "coefficients": [{"i": 1, "j": 3, "alpha": [0, 0], "value": 1.0}]}
        )


# ---------------------------------------------------------------------------
# coefficient-table distance between two structures


def test_distance_to_self_is_zero(heis):
    assert metric_convergence_distance(heis, heis, radius=1.0) == 0.0


def test_distance_scales_linearly_in_perturbation(heis):
    d1 = metric_convergence_distance(heis, heisenberg(1.0 + 1e-4), radius=1.0)
    d2 = metric_convergence_distance(heis, heisenberg(1.0 + 1e-5), radius=1.0)
    assert d1 > 0 and d2 > 0
    assert d1 / d2 == pytest.approx(10.0, rel=1e-2)


def test_distance_rejects_dimension_mismatch(heis, fil4):
    with pytest.raises(DimensionMismatch):
        metric_convergence_distance(heis, fil4, radius=1.0)
