import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landscape_lab.certifier import saddle_test_direction
from landscape_lab.generators import GeneratorSpec, gen_tensor
from landscape_lab.objectives import tensor_ambient
from landscape_lab.sphere import (
    SpherePoint,
    TangentVector,
    project_tangent,
    retract,
    riemannian_grad,
    riemannian_hess,
    tangent_extreme_eigs,
    tangent_projector,
)


def l4(d):
    return tensor_ambient(gen_tensor(GeneratorSpec("tensor", d, {"standard_basis": True})))


def test_project_removes_normal_component():
    out = project_tangent(np.array([1.0, 0.0, 0.0]), np.array([3.0, 4.0, 0.0]))
    np.testing.assert_array_equal(out, [0.0, 4.0, 0.0])


def test_equal_magnitude_point_is_stationary():
    x = np.array([1.0, -1.0]) / math.sqrt(2)
    assert np.linalg.norm(riemannian_grad(l4(2), x)) <= 1e-14


@pytest.mark.parametrize("signs", [(1, 1), (1, -1, 1), (1, 1, -1, -1), (-1, 1, 1, 1, 1)])
def test_saddle_direction_has_quadratic_form_eight_over_s(signs):
    d = 6
    x = np.zeros(d)
    s = len(signs)
    x[:s] = np.array(signs, dtype=float) / math.sqrt(s)
    H = riemannian_hess(l4(d), x)
    v = saddle_test_direction(x)
    assert abs(v @ x) <= 1e-14 and np.linalg.norm(v) == pytest.approx(1.0)
    assert v @ H @ v == pytest.approx(8.0 / s, rel=1e-12)


def test_hessian_at_basis_vector_is_minus_four_on_tangent():
    d = 4
    x = np.eye(d)[0]
    H = riemannian_hess(l4(d), x)
    np.testing.assert_allclose(H, -4.0 * tangent_projector(x), atol=1e-14)
    lo, hi, _ = tangent_extreme_eigs(H, x)
    assert lo == pytest.approx(-4.0) and hi == pytest.approx(-4.0)


def test_riemannian_hessian_annihilates_base_point():
    inst = gen_tensor(GeneratorSpec("tensor", 7, seed=2))
    x = np.random.default_rng(0).standard_normal(7)
    x /= np.linalg.norm(x)
    H = riemannian_hess(tensor_ambient(inst), x)
    assert np.linalg.norm(H @ x) <= 1e-12
    assert np.array_equal(H, H.T)


def test_tangent_extremes_against_basis_restriction():
    rng = np.random.default_rng(3)
    d = 6
    x = rng.standard_normal(d)
    x /= np.linalg.norm(x)
    P = tangent_projector(x)
    S = rng.standard_normal((d, d))
    H = P @ (S + S.T) @ P
    # orthonormal basis of the tangent space, computed independently
    Q, _ = np.linalg.qr(np.column_stack([x, rng.standard_normal((d, d - 1))]))
    T = Q[:, 1:]
    ref = np.linalg.eigvalsh(T.T @ H @ T)
    spec = tangent_extreme_eigs(H, x)
    assert spec.lambda_min == pytest.approx(ref[0], abs=1e-10)
    assert spec.lambda_max == pytest.approx(ref[-1], abs=1e-10)
    assert abs(spec.dir_min @ x) <= 1e-10
    assert spec.dir_min @ H @ spec.dir_min == pytest.approx(ref[0], abs=1e-10)


def test_tangent_extremes_reject_non_tangent_operator():
    with pytest.raises(ValueError):
        tangent_extreme_eigs(np.eye(3), np.array([1.0, 0.0, 0.0]))


def test_retract_second_order_agreement():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(5)
    x /= np.linalg.norm(x)
    v = project_tangent(x, rng.standard_normal(5))
    ratios = []
    for t in [1e-1, 1e-2, 1e-3]:
        ratios.append(np.linalg.norm(retract(x, t * v) - (x + t * v)) / t**2)
    assert max(ratios) <= 1.0 * np.linalg.norm(v) ** 2
    assert ratios[-1] == pytest.approx(0.5 * np.linalg.norm(v) ** 2, rel=1e-2)


def test_retract_zero_vector():
    with pytest.raises(ValueError):
        retract(np.array([1.0, 0.0]), np.array([-1.0, 0.0]))


def test_point_and_tangent_vector_validation():
    with pytest.raises(ValueError):
        SpherePoint(np.array([1.0, 1.0]))
    x = SpherePoint(np.array([0.0, 1.0]))
    TangentVector(x, np.array([2.0, 0.0]))
    with pytest.raises(ValueError):
        TangentVector(x, np.array([1.0, 1.0]))


unit_vectors = st.lists(st.floats(-10, 10), min_size=2, max_size=8).map(np.array).filter(
    lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: v / np.linalg.norm(v))


@settings(max_examples=50, deadline=None)
@given(x=unit_vectors, seed=st.integers(0, 10_000))
def test_projection_idempotent_and_tangent(x, seed):
    v = np.random.default_rng(seed).standard_normal(x.size)
    p = project_tangent(x, v)
    np.testing.assert_allclose(project_tangent(x, p), p, atol=1e-12)
    assert abs(p @ x) <= 1e-12 * max(1.0, np.linalg.norm(v))


@settings(max_examples=50, deadline=None)
@given(x=unit_vectors, seed=st.integers(0, 10_000), scale=st.floats(0, 100))
def test_retract_lands_on_sphere(x, seed, scale):
    v = project_tangent(x, np.random.default_rng(seed).standard_normal(x.size))
    assert np.linalg.norm(retract(x, scale * v)) == pytest.approx(1.0, abs=1e-12)
