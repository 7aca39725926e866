import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from semcollapse.errors import DomainError, InputError, UndefinedLogError
from semcollapse.manifold import BALL_MAX_NORM, Euclidean, PoincareBall, Sphere, make_manifold
from semcollapse.rng import stream

ALL = [Euclidean(3), Sphere(3), PoincareBall(3)]


def ids(M):
    return M.name


def pair(M, g, n=None, ball_norm=0.95):
    if isinstance(M, PoincareBall):
        return M.random_point(g, n, max_norm=ball_norm), M.random_point(g, n, max_norm=ball_norm)
    x = M.random_point(g, n)
    y = M.random_point(g, n)
    if isinstance(M, Sphere):
        flip = np.sum(x * y, axis=-1) < -0.99
        y = np.where(flip[..., None], -y, y)
    return x, y


# -- worked examples ----------------------------------------------------------------------


def test_euclidean_exp_log_dist():
    E = Euclidean(2)
    np.testing.assert_allclose(E.exp([1.0, 1.0], [2.0, 3.0]), [3.0, 4.0])
    np.testing.assert_allclose(E.log([1.0, 0.0], [4.0, 4.0]), [3.0, 4.0])
    assert E.dist([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.0)


def test_sphere_quarter_turn():
    S = Sphere(2)
    np.testing.assert_allclose(S.exp([1.0, 0.0], [0.0, math.pi / 2]), [0.0, 1.0], atol=1e-15)


def test_sphere_log_orthonormal():
    S = Sphere(3)
    v = S.log([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(v, [0.0, math.pi / 2, 0.0], atol=1e-15)


def test_sphere_antipodal_distance():
    assert Sphere(3).dist([1.0, 0, 0], [-1.0, 0, 0]) == pytest.approx(math.pi)


def test_poincare_exp_at_origin_unit_metric_speed():
    # a tangent of metric length 1 at the origin reaches d = 1, i.e. r = tanh(1/2)
    B = PoincareBall(2)
    y = B.exp([0.0, 0.0], [0.5, 0.0])
    np.testing.assert_allclose(y, [math.tanh(0.5), 0.0], atol=1e-15)
    assert B.dist([0.0, 0.0], y) == pytest.approx(1.0, abs=1e-12)


def test_poincare_exp_at_origin_euclidean_unit_components():
    # components (1, 0) have metric length 2 at the origin (conformal factor 2)
    B = PoincareBall(2)
    y = B.exp([0.0, 0.0], [1.0, 0.0])
    np.testing.assert_allclose(y, [math.tanh(1.0), 0.0], atol=1e-15)
    assert B.norm([0.0, 0.0], [1.0, 0.0]) == pytest.approx(2.0)


def test_poincare_distance_against_line_integral():
    # oracle: integrate the metric 2/(1-r^2) along the radius
    for r in (0.1, 0.5, 0.9, 0.99):
        length, _ = quad(lambda s: 2.0 / (1.0 - s * s), 0.0, r, epsabs=1e-13, epsrel=1e-13)
        assert PoincareBall(2).dist([0.0, 0.0], [r, 0.0]) == pytest.approx(length, rel=1e-10)
    assert PoincareBall(2).dist([0.0, 0.0], [0.5, 0.0]) == pytest.approx(math.log(3), abs=1e-12)


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_log_of_self_is_zero(M):
    x = pair(M, stream(0, "self", M.name))[0]
    np.testing.assert_allclose(M.log(x, x), 0.0, atol=1e-15)
    assert M.dist(x, x) == pytest.approx(0.0, abs=1e-7)


# -- errors -------------------------------------------------------------------------------


def test_sphere_exp_outside_injectivity_radius():
    with pytest.raises(DomainError):
        Sphere(2).exp([1.0, 0.0], [0.0, math.pi])


def test_sphere_antipodal_log_undefined():
    with pytest.raises(UndefinedLogError):
        Sphere(3).log([1.0, 0, 0], [-1.0, 0, 0])


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_non_finite_rejected(M):
    x = pair(M, stream(0, "nf", M.name))[0]
    with pytest.raises(InputError):
        M.exp(x, [np.nan, 0.0, 0.0])


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_wrong_dimension_rejected(M):
    with pytest.raises(InputError):
        M.dist(np.zeros(2), np.zeros(2))


def test_membership_checks():
    with pytest.raises(InputError):
        Sphere(3).check_point([1.0, 1.0, 0.0])
    with pytest.raises(InputError):
        PoincareBall(2).check_point([1.0, 0.0])
    with pytest.raises(InputError):
        Sphere(3).check_tangent([1.0, 0, 0], [1.0, 0, 0])


def test_make_manifold():
    assert make_manifold("Sphere", 3) == Sphere(3)
    assert make_manifold("euclidean", 2) != Euclidean(3)
    with pytest.raises(InputError):
        make_manifold("torus", 2)
    with pytest.raises(InputError):
        Sphere(1)


def test_poincare_clamped_near_boundary():
    B = PoincareBall(2)
    y = B.exp([0.0, 0.0], [100.0, 0.0])
    assert np.linalg.norm(y) <= BALL_MAX_NORM


# -- invariants ---------------------------------------------------------------------------


@pytest.mark.parametrize("M,tol", [(Euclidean(3), 1e-9), (Sphere(3), 1e-9), (PoincareBall(3), 1e-7)], ids=["euclidean", "sphere", "poincare"])
def test_round_trip(M, tol):
    x, y = pair(M, stream(1, "rt", M.name), 1000, ball_norm=0.999)
    assert np.max(M.dist(M.exp(x, M.log(x, y)), y)) < tol
    np.testing.assert_allclose(M.norm(x, M.log(x, y)), M.dist(x, y), rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_speed(M):
    g = stream(2, "speed", M.name)
    x = pair(M, g, 500)[0]
    v = M.sample_tangent_gaussian(x, 1.0, g)
    n = M.norm(x, v)
    v = v * np.minimum(1.0, 3.0 / n)[:, None]
    np.testing.assert_allclose(M.dist(x, M.exp(x, v)), M.norm(x, v), atol=1e-9)


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_symmetry_and_triangle(M):
    g = stream(3, "tri", M.name)
    a, b = pair(M, g, 1000)
    c = pair(M, g, 1000)[0]
    assert np.max(np.abs(M.dist(a, b) - M.dist(b, a))) <= 1e-12
    assert np.min(M.dist(a, b) + M.dist(b, c) - M.dist(a, c)) >= -1e-9


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_frame_is_metric_orthonormal(M):
    x = pair(M, stream(4, "frame", M.name))[0]
    F = M.frame(x)
    gram = np.array([[M.inner(x, F[:, i], F[:, j]) for j in range(M.dim)] for i in range(M.dim)])
    np.testing.assert_allclose(gram, np.eye(M.dim), atol=1e-12)


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_chart_norm_is_distance(M):
    g = stream(5, "chart", M.name)
    a = pair(M, g)[0]
    y = M.random_ball(a, 1.0, g, 50)
    np.testing.assert_allclose(np.linalg.norm(M.chart(a, y), axis=-1), M.dist(a, y), atol=1e-9)


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_random_ball_radius(M):
    g = stream(6, "ball", M.name)
    a = pair(M, g)[0]
    assert np.max(M.dist(a, M.random_ball(a, 0.7, g, 200))) < 0.7 + 1e-9


def test_mobius_addition_identity():
    B = PoincareBall(2)
    x = np.array([0.3, -0.2])
    np.testing.assert_allclose(B.mobius_add(x, np.zeros(2)), x)
    np.testing.assert_allclose(B.mobius_add(-x, x), 0.0, atol=1e-15)


# -- sampler ------------------------------------------------------------------------------


def test_sampler_sigma_zero():
    np.testing.assert_array_equal(Euclidean(2).sample_tangent_gaussian([1.0, 2.0], 0.0, stream(0)), [0.0, 0.0])


@pytest.mark.parametrize("M", ALL, ids=ids)
def test_sampler_deterministic(M):
    x = pair(M, stream(7, "x", M.name))[0]
    a = M.sample_tangent_gaussian(x, 0.3, stream(7, "s"))
    b = M.sample_tangent_gaussian(x, 0.3, stream(7, "s"))
    np.testing.assert_array_equal(a, b)


def test_sampler_moments():
    z = Euclidean(2).sample_tangent_gaussian(np.zeros((100_000, 2)), 1.0, stream(8))
    assert np.all(np.abs(z.mean(axis=0)) < 0.02)
    assert np.all(np.abs(z.var(axis=0) - 1.0) < 0.05)


def test_sphere_sampler_tangent():
    S = Sphere(3)
    x = S.random_point(stream(9), 100)
    z = S.sample_tangent_gaussian(x, 1.0, stream(10))
    assert np.max(np.abs(np.sum(x * z, axis=-1))) < 1e-12


def test_poincare_sampler_metric_isotropic():
    # in metric units the spread must not depend on where we stand
    B = PoincareBall(2)
    x = np.tile([0.8, 0.0], (50_000, 1))
    z = B.sample_tangent_gaussian(x, 1.0, stream(11))
    assert np.mean(B.inner(x, z, z)) == pytest.approx(2.0, rel=0.03)


def test_negative_sigma_rejected():
    with pytest.raises(InputError):
        Euclidean(2).sample_tangent_gaussian([0.0, 0.0], -1.0, stream(0))


# -- property tests ------------------------------------------------------------------------

coords = st.floats(-0.6, 0.6, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(coords, min_size=4, max_size=4))
def test_poincare_round_trip_property(c):
    B = PoincareBall(2)
    x, y = np.array(c[:2]), np.array(c[2:])
    assert B.dist(B.exp(x, B.log(x, y)), y) < 1e-9
    assert B.dist(x, y) == pytest.approx(B.dist(y, x), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=6, max_size=6))
def test_sphere_log_tangent_property(c):
    S = Sphere(3)
    x, y = np.array(c[:3]), np.array(c[3:])
    if np.linalg.norm(x) < 1e-3 or np.linalg.norm(y) < 1e-3:
        return
    x, y = x / np.linalg.norm(x), y / np.linalg.norm(y)
    if np.dot(x, y) < -0.999:
        return
    v = S.log(x, y)
    assert abs(np.dot(v, x)) < 1e-9
    assert S.norm(x, v) == pytest.approx(S.dist(x, y), abs=1e-9)
