import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import bbox_loop, walk_arc_length
from sqdmap.geometry import (
    MapElement, PerceptionRange, SE2Transform, apply_se2, as_polyline, clip_to_range,
    min_bounding_rect, polyline_length, relative_transform, resample_polyline,
)

coords = st.floats(-50, 50, allow_nan=False)
angles = st.floats(-math.pi, math.pi)
transforms = st.builds(SE2Transform, angles, coords, coords)


@st.composite
def polylines(draw, min_size=2, max_size=12, lo=-50, hi=50):
    pts = draw(st.lists(st.tuples(st.floats(lo, hi), st.floats(lo, hi)),
                        min_size=min_size, max_size=max_size))
    arr = np.array(pts)
    if polyline_length(arr) < 1e-3:
        arr = np.vstack([arr, arr[-1] + [1.0, 0.5]])
    return arr


class TestPolyline:
    def test_rejects_zero_length(self):
        with pytest.raises(ValueError, match="degenerate curve"):
            as_polyline([(1, 1), (1, 1)])

    def test_rejects_single_point_and_nan(self):
        with pytest.raises(ValueError):
            as_polyline([(0, 0)])
        with pytest.raises(ValueError):
            as_polyline([(0, 0), (np.nan, 1)])

    def test_map_element_equality(self):
        a = MapElement(1, [(0, 0), (1, 0)])
        assert a == MapElement(1, [(0, 0), (1, 0)])
        assert a != MapElement(2, [(0, 0), (1, 0)])


class TestResample:
    def test_straight_segment(self):
        np.testing.assert_allclose(resample_polyline([(0, 0), (10, 0)], 3), [(0, 0), (5, 0), (10, 0)])

    def test_endpoints_only(self):
        np.testing.assert_allclose(resample_polyline([(0, 0), (10, 0)], 2), [(0, 0), (10, 0)])

    def test_corner(self):
        # arc lengths 0, 2, 4, 6, 8 along an L
        expected = [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (4.0, 2.0), (4.0, 4.0)]
        poly = [(0, 0), (4, 0), (4, 4)]
        assert [walk_arc_length(poly, s) for s in (0, 2, 4, 6, 8)] == expected
        np.testing.assert_allclose(resample_polyline(poly, 5), expected, atol=1e-12)

    def test_degenerate(self):
        with pytest.raises(ValueError, match="degenerate curve"):
            resample_polyline([(2, 2), (2, 2), (2, 2)], 4)

    def test_n_too_small(self):
        with pytest.raises(ValueError):
            resample_polyline([(0, 0), (1, 0)], 1)

    @given(polylines(), st.integers(2, 40))
    def test_matches_arc_walk(self, poly, n):
        out = resample_polyline(poly, n)
        total = polyline_length(poly)
        for k, p in enumerate(out):
            ref = walk_arc_length(poly.tolist(), total * k / (n - 1))
            assert np.allclose(p, ref, atol=1e-6)
        assert np.allclose(out[0], poly[0], atol=1e-9)
        assert np.allclose(out[-1], poly[-1], atol=1e-9)

    @given(st.lists(st.tuples(st.floats(0.5, 5), st.floats(-1, 1)), min_size=1, max_size=5),
           st.integers(0, 30))
    def test_straight_line_length_preserved(self, steps, extra):
        # collinear input with resample count >= source count keeps arc length
        pts = np.cumsum([[0.0, 0.0]] + [[s, 0.0] for s, _ in steps], axis=0)
        n = len(pts) + extra
        out = resample_polyline(pts, n)
        assert polyline_length(out) == pytest.approx(polyline_length(pts), rel=1e-6)


class TestBoundingRect:
    def test_l_shape(self):
        r = min_bounding_rect([(0, 0), (4, 0), (4, 2)])
        assert (r.x, r.y, r.w, r.h) == (2, 1, 4, 2)

    def test_vertical_segment(self):
        r = min_bounding_rect([(1, 1), (1, 3)])
        assert (r.x, r.y, r.w, r.h) == (1, 2, 0, 2)

    def test_random_points(self):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-5, 5, size=(100, 2))
        r = min_bounding_rect(pts)
        assert (r.x, r.y, r.w, r.h) == pytest.approx(bbox_loop(pts.tolist()), abs=1e-12)

    @given(polylines())
    def test_contains_all_points(self, poly):
        r = min_bounding_rect(poly)
        assert np.all(poly[:, 0] >= r.x - r.w / 2 - 1e-9)
        assert np.all(poly[:, 0] <= r.x + r.w / 2 + 1e-9)
        assert np.all(poly[:, 1] >= r.y - r.h / 2 - 1e-9)
        assert np.all(poly[:, 1] <= r.y + r.h / 2 + 1e-9)


class TestSE2:
    def test_identity(self):
        poly = np.array([(0.3, 1.0), (2.0, -4.0)])
        np.testing.assert_array_equal(apply_se2(SE2Transform.identity(), poly), poly)

    def test_translation(self):
        poly = np.array([(0, 0), (1, 1), (3, -2)])
        np.testing.assert_allclose(apply_se2(SE2Transform(0, 1, 2), poly), poly + [1, 2])

    def test_quarter_turn(self):
        out = apply_se2(SE2Transform(math.pi / 2), [(1, 0), (2, 0)])
        np.testing.assert_allclose(out, [(0, 1), (0, 2)], atol=1e-15)

    def test_matrix_is_proper_rotation(self):
        m = SE2Transform(0.7, 1, 2).matrix
        r = m[:2, :2]
        np.testing.assert_allclose(r @ r.T, np.eye(2), atol=1e-15)
        assert np.linalg.det(r) == pytest.approx(1.0)
        back = SE2Transform.from_matrix(m)
        assert (back.rotation, back.tx, back.ty) == pytest.approx((0.7, 1, 2))

    @given(transforms, polylines())
    def test_inverse_round_trip(self, t, poly):
        np.testing.assert_allclose(apply_se2(t.inverse(), apply_se2(t, poly)), poly, atol=1e-9)

    @given(transforms)
    def test_inverse_compose_identity(self, t):
        np.testing.assert_allclose((t.inverse() @ t).matrix, np.eye(3), atol=1e-12)

    @given(transforms, transforms, transforms)
    def test_compose_associative(self, a, b, c):
        np.testing.assert_allclose(((a @ b) @ c).matrix, (a @ (b @ c)).matrix, atol=1e-9)

    @given(transforms, polylines())
    def test_compose_matches_matrix_product(self, t, poly):
        homog = np.column_stack([poly, np.ones(len(poly))]) @ t.matrix.T
        np.testing.assert_allclose(apply_se2(t, poly), homog[:, :2], atol=1e-9)


class TestRelativeTransform:
    @given(transforms)
    def test_same_pose_is_identity(self, p):
        t = relative_transform(p, p)
        assert t.rotation == 0.0
        np.testing.assert_allclose(t.matrix, np.eye(3), atol=1e-12)

    def test_forward_motion(self):
        t = relative_transform(SE2Transform(), SE2Transform(0, 2, 0))
        assert (t.rotation, t.tx, t.ty) == (0, -2, 0)

    def test_world_round_trip(self):
        prev, cur = SE2Transform(math.pi / 2, 3.0, -1.0), SE2Transform()
        world = np.array([[5.0, 7.0]])
        in_prev = prev.inverse().apply(world)
        in_cur = apply_se2(relative_transform(prev, cur), in_prev)
        np.testing.assert_allclose(cur.apply(in_cur), world, atol=1e-12)


class TestClip:
    rng = PerceptionRange(30, 15)

    def test_inside_unchanged(self):
        poly = np.array([(0, 0), (10, 5), (-20, -14)])
        np.testing.assert_array_equal(clip_to_range(poly, self.rng), poly)

    def test_axis_crossing(self):
        np.testing.assert_allclose(clip_to_range([(0, 0), (40, 0)], self.rng), [(0, 0), (30, 0)])

    def test_fully_outside(self):
        assert clip_to_range([(40, 0), (50, 0)], self.rng) is None
        assert clip_to_range([(40, -40), (40, 40)], self.rng) is None

    def test_corner_diagonal_matches_parametric_oracle(self):
        p0, p1 = np.array([20.0, 5.0]), np.array([40.0, 25.0])
        # brute force: sample the segment densely, keep the inside parameter span
        ts = np.linspace(0, 1, 2_000_001)
        pts = p0 + ts[:, None] * (p1 - p0)
        inside = (np.abs(pts[:, 0]) <= 30) & (np.abs(pts[:, 1]) <= 15)
        lo, hi = ts[inside][0], ts[inside][-1]
        out = clip_to_range([p0, p1], self.rng)
        np.testing.assert_allclose(out[0], p0 + lo * (p1 - p0), atol=1e-4)
        np.testing.assert_allclose(out[-1], p0 + hi * (p1 - p0), atol=1e-4)
        np.testing.assert_allclose(out[-1], (30, 15), atol=1e-12)

    def test_longest_piece_kept(self):
        # leaves the range and comes back; second piece is longer
        poly = [(-5, 0), (-5, 20), (5, 20), (5, -10)]
        out = clip_to_range(poly, self.rng)
        np.testing.assert_allclose(out, [(5, 15), (5, -10)])

    @given(polylines(lo=-60, hi=60))
    def test_output_inside(self, poly):
        out = clip_to_range(poly, self.rng)
        if out is not None:
            assert np.all(np.abs(out[:, 0]) <= 30 + 1e-9)
            assert np.all(np.abs(out[:, 1]) <= 15 + 1e-9)
            assert polyline_length(out) > 0

    @settings(max_examples=50)
    @given(polylines(lo=-60, hi=60))
    def test_clipped_points_lie_on_source(self, poly):
        out = clip_to_range(poly, self.rng)
        if out is None:
            return
        for p in out:
            # distance from p to the source polyline
            a, b = poly[:-1], poly[1:]
            d = b - a
            L2 = np.maximum(np.sum(d * d, axis=1), 1e-300)
            t = np.clip(np.sum((p - a) * d, axis=1) / L2, 0, 1)
            dist = np.hypot(*(a + t[:, None] * d - p).T).min()
            assert dist < 1e-7
