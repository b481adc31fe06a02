"""Tests for the constraint set catalog."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.cone_algebra import Cone, classify, is_trivial, member
from src.errors import DimensionMismatchError, PointNotInSetError, QualificationError
from src.set_catalog import (
    Box,
    Orthant,
    Polyhedron,
    ProductSet,
    QuadraticSublevel,
    Singleton,
    distance,
    parse_set,
)
X_HAT = [(1.0 - np.sqrt(3.0)) / 2.0, (1.0 + np.sqrt(3.0)) / 2.0]
UNIT_SQUARE = dict(rows=[[1, 0], [-1, 0], [0, 1], [0, -1]], rhs=[1, 0, 1, 0])


def _points_in(constraint_set, rng, center, radius, count):
    """Rejection sample of set points within radius of center."""
    d = len(center)
    draws = rng.standard_normal((4 * count, d))
    draws /= np.linalg.norm(draws, axis=1, keepdims=True)
    draws *= radius * rng.random((4 * count, 1)) ** (1.0 / d)
    X = np.asarray(center) + draws
    return X[constraint_set.contains_batch(X, 0.0)][:count]


class TestMembership:
    """contains / contains_batch."""

    def test_examples(self, omega1, annulus, half_line):
        assert omega1.contains([1, 1], 1e-12)
        assert not half_line.contains([-1.0])
        assert annulus.contains(X_HAT)
        assert not annulus.contains([0.0, 0.0])
        assert Singleton(point=[1.0, 2.0]).contains([1.0, 2.0])

    def test_dimension_mismatch(self, omega1):
        with pytest.raises(DimensionMismatchError):
            omega1.contains([1.0, 1.0, 1.0])

    def test_batch_agrees_with_pointwise(self, annulus):
        rng = np.random.Generator(np.random.PCG64(1))
        X = rng.uniform(-3, 3, size=(200, 2))
        batch = annulus.contains_batch(X, 1e-9)
        assert batch.tolist() == [annulus.contains(x) for x in X]

    def test_convexity_flags(self, omega1, annulus):
        assert not omega1.is_convex
        assert not annulus.is_convex
        assert QuadraticSublevel(P=[[1, 0], [0, 2]], q=[0, 0], theta=(None, 1)).is_convex
        assert ProductSet(factors=[Orthant(dim=1), Box(lower=[0], upper=[1])]).is_convex


class TestNormalCone:
    """Limiting normal cones at member points."""

    def test_omega1_boundary_is_ray(self, omega1):
        summary = classify(omega1.normal_cone([1, 1]))
        assert summary.kind == "ray"
        g = np.array(summary.generators[0])
        assert np.allclose(g / np.linalg.norm(g), np.array([1, -2]) / np.sqrt(5), atol=1e-12)

    def test_omega1_interior_is_zero(self, omega1):
        assert is_trivial(omega1.normal_cone([-1, 0]))[0]

    def test_orthant_at_origin(self, half_line):
        K = half_line.normal_cone([0.0])
        assert member(K, [-1.0])
        assert not member(K, [1.0])

    def test_annulus_inner_boundary(self, annulus):
        K = annulus.normal_cone(X_HAT)
        assert member(K, -np.array(X_HAT))
        assert not member(K, np.array(X_HAT))

    def test_point_not_in_set(self, omega1):
        with pytest.raises(PointNotInSetError):
            omega1.normal_cone([2, 1])

    def test_vanishing_gradient_raises(self):
        ball = QuadraticSublevel(P=[[1, 0], [0, 1]], q=[0, 0], theta=(None, 0))
        with pytest.raises(QualificationError):
            ball.normal_cone([0, 0])

    def test_polyhedron_corner(self):
        K = Polyhedron(**UNIT_SQUARE).normal_cone([1, 1])
        assert classify(K).kind == "halfline-product"
        assert member(K, [1, 2])
        assert not member(K, [-1, 0])

    def test_box_with_equal_bounds_is_line(self):
        box = Box(lower=[0, None], upper=[0, None])
        summary = classify(box.normal_cone([0, 5]))
        assert summary.kind == "line"

    def test_singleton_is_full(self):
        assert classify(Singleton(point=[1.0, 2.0]).normal_cone([1, 2])).kind == "FULL"

    def test_product_rule(self, omega1, half_line):
        S = ProductSet(factors=[omega1, half_line])
        K = S.normal_cone([1, 1, 0])
        assert member(K, [2, -4, -3])
        assert not member(K, [2, -4, 3])
        assert not member(K, [1, 1, -1])

    def test_interior_samples_have_zero_cone(self, annulus):
        rng = np.random.Generator(np.random.PCG64(2))
        angles = rng.uniform(0, 2 * np.pi, 20)
        radii = np.sqrt(rng.uniform(2.2, 4.8, 20))
        for t, rad in zip(angles, radii):
            assert is_trivial(annulus.normal_cone([rad * np.cos(t), rad * np.sin(t)]))[0]

    @pytest.mark.parametrize("radius", [1e-3, 1e-5])
    def test_regular_normal_inequality(self, omega1, annulus, radius):
        """<g, x - xbar> / |x - xbar| is at most O(radius) for set points near xbar."""
        rng = np.random.Generator(np.random.PCG64(3))
        cases = [
            (omega1, np.array([1.0, 1.0]), np.array([1.0, -2.0])),
            (annulus, np.array(X_HAT), -np.array(X_HAT)),
            (annulus, np.array([np.sqrt(5.0), 0.0]), np.array([1.0, 0.0])),
        ]
        for constraint_set, xbar, g in cases:
            assert member(constraint_set.normal_cone(xbar), g)
            g = g / np.linalg.norm(g)
            X = _points_in(constraint_set, rng, xbar, radius, 10_000)
            assert len(X) > 1_000
            H = X - xbar
            norms = np.linalg.norm(H, axis=1)
            quotients = (H @ g)[norms > 0] / norms[norms > 0]
            assert quotients.max() <= radius


class TestProjection:
    """Nearest points."""

    def test_examples(self, half_line, annulus):
        assert Orthant(dim=2).project([-1, 2]).tolist() == [0.0, 2.0]
        assert np.allclose(annulus.project([0.1, 0.0]), [np.sqrt(2.0), 0.0])
        assert np.allclose(annulus.project([3.0, 4.0]), [0.6 * np.sqrt(5.0), 0.8 * np.sqrt(5.0)])
        assert Singleton(point=[1.0, 2.0]).project([5, 5]).tolist() == [1.0, 2.0]

    def test_annulus_centre_tie(self, annulus):
        assert np.allclose(annulus.project([0.0, 0.0]), [np.sqrt(2.0), 0.0])

    def test_omega1_regular_root(self, omega1):
        """The nearest boundary point to (2, 1) is (t^2, t) with t = (1 + sqrt 3) / 2."""
        t = (1.0 + np.sqrt(3.0)) / 2.0
        assert np.allclose(omega1.project([2.0, 1.0]), [t * t, t], atol=1e-9)

    def test_omega1_pole_case(self, omega1):
        assert np.allclose(omega1.project([1.0, 0.0]), [0.5, np.sqrt(0.5)], atol=1e-9)

    def test_inside_points_unchanged(self, omega1):
        assert omega1.project([-1.0, 0.5]).tolist() == [-1.0, 0.5]

    def test_polyhedron_matches_box_clip(self):
        rng = np.random.Generator(np.random.PCG64(4))
        X = rng.uniform(-3, 3, size=(100, 2))
        projected = Polyhedron(**UNIT_SQUARE).project_batch(X)
        assert np.allclose(projected, np.clip(X, 0.0, 1.0), atol=1e-6)

    def test_single_halfspace(self):
        H = Polyhedron(rows=[[1, 1]], rhs=[1])
        assert np.allclose(H.project([2, 2]), [0.5, 0.5])

    def test_polyhedron_with_only_zero_rows_is_whole_space(self):
        P = Polyhedron(rows=[[0, 0], [0, 0]], rhs=[1, 2])
        assert P.project([3.0, 4.0]).tolist() == [3.0, 4.0]
        assert np.array_equal(P.project_batch([[3.0, 4.0], [-1.0, 0.5]]), [[3.0, 4.0], [-1.0, 0.5]])

    @pytest.mark.parametrize("name", ["omega1", "annulus", "box", "polyhedron"])
    def test_idempotent(self, request, name):
        sets = {
            "box": Box(lower=[0, None], upper=[1, 2]),
            "polyhedron": Polyhedron(rows=[[1, 1], [-1, 2]], rhs=[1, 2]),
        }
        S = sets.get(name) or request.getfixturevalue(name)
        rng = np.random.Generator(np.random.PCG64(5))
        once = S.project_batch(rng.uniform(-4, 4, size=(300, 2)))
        assert np.all(S.contains_batch(once, 1e-8))
        assert np.allclose(S.project_batch(once), once, atol=1e-8)

    @pytest.mark.parametrize("name", ["omega1", "annulus"])
    def test_nearest_among_sampled_members(self, request, name):
        S = request.getfixturevalue(name)
        rng = np.random.Generator(np.random.PCG64(6))
        members = _points_in(S, rng, np.zeros(2), 4.0, 1_000)
        for x in rng.uniform(-3, 3, size=(20, 2)):
            best = np.linalg.norm(x - S.project(x))
            assert best <= np.min(np.linalg.norm(members - x, axis=1)) + 1e-9

    def test_distance(self):
        assert distance(Orthant(dim=2), [-3, 4]) == pytest.approx(3.0)


class TestValidation:
    """Schema and emptiness checks."""

    def test_empty_polyhedron(self):
        with pytest.raises(ValidationError, match="empty"):
            Polyhedron(rows=[[1], [-1]], rhs=[-1, 0])

    def test_empty_box(self):
        with pytest.raises(ValidationError):
            Box(lower=[1], upper=[0])

    def test_empty_quadratic(self):
        with pytest.raises(ValidationError, match="no points"):
            QuadraticSublevel(P=[[1, 0], [0, 1]], q=[0, 0], theta=(None, -1))

    def test_asymmetric_matrix(self):
        with pytest.raises(ValidationError, match="symmetric"):
            QuadraticSublevel(P=[[0, 1], [0, 0]], q=[0, 0], theta=(None, 1))

    def test_unknown_field_rejected(self):
        with pytest.raises(ValidationError):
            parse_set({"type": "orthant", "dim": 1, "radius": 2})

    def test_parse_tagged_product(self):
        S = parse_set({
            "type": "product",
            "factors": [{"type": "orthant", "dim": 1}, {"type": "box", "lower": [0], "upper": [1]}],
        })
        assert isinstance(S, ProductSet)
        assert S.dim == 2
        assert S.contains([3.0, 0.5])
        assert isinstance(S.normal_cone([0.0, 1.0]), Cone)
