import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import chamfer_loop, decay_script
from sqdmap.geometry import BoundingRect, MapElement, min_bounding_rect
from sqdmap.noising import (
    NoiseParams, apply_box_noise_to_points, box_scale, box_shift, decay_rate, flip_label,
    make_noisy_instance, make_rng,
)

ZERO = NoiseParams(0, 0, 0, 0, 0.0, 0.2)
RECT = BoundingRect(1.0, -2.0, 4.0, 2.0)


def test_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(shift_x=1.0)
    with pytest.raises(ValueError):
        NoiseParams(label_flip_prob=1.5)
    with pytest.raises(ValueError):
        NoiseParams(gamma=0.0)


class TestBoxShift:
    def test_zero_scale(self):
        rect, noise = box_shift(RECT, ZERO, make_rng(0))
        assert rect == RECT
        assert noise.as_array().tolist() == [0, 0, 0, 0]

    def test_bounds(self):
        rng = make_rng(1)
        params = NoiseParams()
        dx = np.array([box_shift(RECT, params, rng)[1].dx for _ in range(10_000)])
        assert np.all(np.abs(dx) < 1.2)

    def test_uniform_ks(self):
        rng = make_rng(2)
        params = NoiseParams()
        dx = np.array([box_shift(RECT, params, rng)[1].dx for _ in range(10_000)])
        result = stats.kstest(dx, stats.uniform(loc=-1.2, scale=2.4).cdf)
        assert result.pvalue > 0.01

    def test_keeps_size(self):
        rect, noise = box_shift(RECT, NoiseParams(), make_rng(3))
        assert (rect.w, rect.h) == (RECT.w, RECT.h)
        assert (noise.dw, noise.dh) == (0, 0)
        assert rect.x == RECT.x + noise.dx and rect.y == RECT.y + noise.dy

    def test_zero_width_forces_zero_shift(self):
        rect, noise = box_shift(BoundingRect(0, 0, 0, 3), NoiseParams(), make_rng(4))
        assert noise.dx == 0 and rect.x == 0


class TestBoxScale:
    def test_zero_scale(self):
        rect, _ = box_scale(RECT, ZERO, make_rng(0))
        assert rect == RECT

    def test_interval_and_center(self):
        rng = make_rng(5)
        rect = BoundingRect(3.0, 4.0, 5.0, 2.0)
        for _ in range(10_000):
            out, noise = box_scale(rect, NoiseParams(), rng)
            assert 0.8 <= out.h <= 3.2
            assert 2.0 <= out.w <= 8.0
            assert (out.x, out.y) == (3.0, 4.0)
            assert noise.dx == 0 and noise.dy == 0
            assert noise.dw == out.w - rect.w and noise.dh == out.h - rect.h


class TestPointMapping:
    pts = np.array([(-1.0, -3.0), (0.5, -2.5), (3.0, -1.0)])

    def test_identity(self):
        rect = min_bounding_rect(self.pts)
        np.testing.assert_allclose(apply_box_noise_to_points(self.pts, rect, rect), self.pts, atol=1e-12)

    def test_pure_shift(self):
        rect = min_bounding_rect(self.pts)
        moved = BoundingRect(rect.x + 1, rect.y + 2, rect.w, rect.h)
        np.testing.assert_allclose(apply_box_noise_to_points(self.pts, rect, moved), self.pts + [1, 2])

    def test_scale_doubles_offsets(self):
        out = apply_box_noise_to_points([(1.0, 1.0)], BoundingRect(0, 0, 2, 2), BoundingRect(0, 0, 4, 4))
        np.testing.assert_allclose(out, [(2.0, 2.0)])

    def test_degenerate_axis_maps_to_center(self):
        out = apply_box_noise_to_points([(1, 0), (1, 2)], BoundingRect(1, 1, 0, 2), BoundingRect(5, 1, 3, 2))
        np.testing.assert_allclose(out[:, 0], [5, 5])

    @given(st.lists(st.tuples(st.floats(-20, 20), st.floats(-20, 20)), min_size=2, max_size=10),
           st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3), st.floats(0.1, 3))
    def test_invertible(self, pts, dx, dy, sw, sh):
        pts = np.array(pts)
        rect = min_bounding_rect(pts)
        if rect.w < 1e-3 or rect.h < 1e-3:
            return
        noised = BoundingRect(rect.x + dx, rect.y + dy, rect.w * sw, rect.h * sh)
        back = apply_box_noise_to_points(apply_box_noise_to_points(pts, rect, noised), noised, rect)
        np.testing.assert_allclose(back, pts, atol=1e-9)


class TestFlipLabel:
    def test_never(self):
        rng = make_rng(0)
        assert all(flip_label(2, 3, 0.0, rng) == 2 for _ in range(1000))

    def test_always(self):
        rng = make_rng(1)
        out = {flip_label(0, 3, 1.0, rng) for _ in range(2000)}
        assert out == {1, 2}

    def test_half(self):
        rng = make_rng(2)
        flips = sum(flip_label(1, 3, 0.5, rng) != 1 for _ in range(10_000))
        assert 0.48 <= flips / 10_000 <= 0.52

    def test_uniform_over_others(self):
        rng = make_rng(3)
        out = [flip_label(1, 4, 1.0, rng) for _ in range(9000)]
        counts = np.bincount(out, minlength=4)
        assert counts[1] == 0
        assert stats.chisquare(counts[[0, 2, 3]]).pvalue > 0.01

    def test_one_class(self):
        with pytest.raises(ValueError, match="cannot flip with one class"):
            flip_label(0, 1, 0.5, make_rng(0))
        assert flip_label(0, 1, 0.0, make_rng(0)) == 0


class TestDecayRate:
    def test_zero_distance(self):
        assert decay_rate(0.0, 0.3, 0.1, 0.2) == 1.0

    def test_root(self):
        delta, alpha, gamma = 0.3, 0.1, 0.2
        assert decay_rate(gamma * delta / alpha, delta, alpha, gamma) == pytest.approx(0.0, abs=1e-15)

    def test_scripted_value(self):
        assert decay_script(0.3, 0.3, 0.1, 0.2) == pytest.approx(0.5, abs=1e-15)
        assert decay_rate(0.3, 0.3, 0.1, 0.2) == pytest.approx(0.5, abs=1e-15)

    def test_clamped(self):
        assert decay_rate(100.0, 0.3, 0.1, 0.2) == 0.0

    def test_invalid_threshold(self):
        with pytest.raises(ValueError, match="invalid threshold"):
            decay_rate(0.1, 0.0, 0.1, 0.2)

    @given(st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 5), st.floats(0.01, 1), st.floats(0.01, 1))
    def test_monotone_and_bounded(self, d1, d2, delta, alpha, gamma):
        lo, hi = sorted((d1, d2))
        a, b = decay_rate(lo, delta, alpha, gamma), decay_rate(hi, delta, alpha, gamma)
        assert 0.0 <= b <= a <= 1.0
        assert decay_rate(lo, delta, alpha * 2, gamma) <= a

    # D within an ulp of delta rounds the decay to exactly 0.5, hence the 1e-9 margin
    @given(st.floats(0, 1 - 1e-9), st.floats(0.01, 10))
    def test_matched_pairs_keep_half(self, frac, delta):
        assert decay_rate(frac * delta, delta, 0.1, 0.2) > 0.5


def _element(seed):
    rng = np.random.default_rng(seed)
    pts = np.cumsum(rng.uniform(-2, 2, size=(20, 2)), axis=0)
    return MapElement(int(rng.integers(3)), pts)


class TestNoisyInstance:
    def test_zero_decay_keeps_points(self):
        el = _element(0)
        s = make_noisy_instance(el, 0.0, NoiseParams(), make_rng(0))
        np.testing.assert_allclose(s.element.points, el.points, atol=1e-9)
        assert s.decay == 0.0

    def test_zero_noise_keeps_points(self):
        el = _element(1)
        s = make_noisy_instance(el, 1.0, ZERO, make_rng(0))
        np.testing.assert_allclose(s.element.points, el.points, atol=1e-9)

    def test_rect_follows_eq(self):
        el = _element(2)
        s = make_noisy_instance(el, 0.7, NoiseParams(), make_rng(9))
        before, after = min_bounding_rect(el.points), min_bounding_rect(s.element.points)
        expected = before.as_array() + s.noise.as_array() * 0.7
        np.testing.assert_allclose(after.as_array(), expected, atol=1e-9)

    def test_chamfer_bound(self):
        rng = make_rng(11)
        params = NoiseParams()
        for k in range(1000):
            el = _element(100 + k % 50)
            decay = float(rng.random())
            s = make_noisy_instance(el, decay, params, rng)
            n = s.noise
            # each point moves by at most (|dx| + |dw|/2, |dy| + |dh|/2) * decay
            bound = 2 * decay * math.hypot(abs(n.dx) + abs(n.dw) / 2, abs(n.dy) + abs(n.dh) / 2)
            assert chamfer_loop(s.element.points.tolist(), el.points.tolist()) <= bound + 1e-9

    def test_deterministic(self):
        el = _element(3)
        a = [make_noisy_instance(el, 0.5, NoiseParams(), r) for r in [make_rng(4)] for _ in range(20)]
        b = [make_noisy_instance(el, 0.5, NoiseParams(), r) for r in [make_rng(4)] for _ in range(20)]
        for x, y in zip(a, b):
            assert x.element == y.element and x.noise == y.noise
