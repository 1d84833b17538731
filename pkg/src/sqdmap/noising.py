"""Curve noise: box shifting, box scaling, label flips and decay-scaled noise.

A curve is wrapped in its axis-aligned bounding rectangle; noise is drawn on
the rectangle and the points follow it, keeping their normalized position
inside the box. All randomness comes from an explicit
``numpy.random.Generator`` owned by the caller.
"""
import enum
from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_non_negative, check_positive, check_probability
from .geometry import BoundingRect, MapElement, min_bounding_rect


def make_rng(seed):
    """Deterministic generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class NoiseParams:
    shift_x: float = 0.6
    shift_y: float = 0.6
    scale_h: float = 0.6
    scale_w: float = 0.6
    label_flip_prob: float = 0.5
    gamma: float = 0.2

    def __post_init__(self):
        for name in ("shift_x", "shift_y", "scale_h", "scale_w"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {value!r}")
        check_probability(self.label_flip_prob, "label_flip_prob")
        check_positive(self.gamma, "gamma")


@dataclass(frozen=True)
class NoiseVector:
    dx: float = 0.0
    dy: float = 0.0
    dw: float = 0.0
    dh: float = 0.0

    def __add__(self, other):
        return NoiseVector(self.dx + other.dx, self.dy + other.dy,
                           self.dw + other.dw, self.dh + other.dh)

    def as_array(self):
        return np.array([self.dx, self.dy, self.dw, self.dh])


class SampleSource(str, enum.Enum):
    NORMAL = "normal"
    STREAM = "stream"


@dataclass(frozen=True, eq=False)
class NoisySample:
    element: MapElement
    original_index: int
    noise: NoiseVector
    decay: float
    source: SampleSource = SampleSource.NORMAL
    original_cls: int = -1


def _open_uniform(rng, half):
    # strictly inside (-half, half); an exact -half draw is rejected
    while True:
        u = rng.random()
        if u != 0.0:
            return (2.0 * u - 1.0) * half


def box_shift(rect, params, rng):
    """Shift the box center by at most half the scaled width/height."""
    dx = _open_uniform(rng, params.shift_x * rect.w / 2.0)
    dy = _open_uniform(rng, params.shift_y * rect.h / 2.0)
    noise = NoiseVector(dx=dx, dy=dy)
    return BoundingRect(rect.x + dx, rect.y + dy, rect.w, rect.h), noise


def box_scale(rect, params, rng):
    """Resample height and width around their current values; center is kept."""
    h = rng.uniform((1.0 - params.scale_h) * rect.h, (1.0 + params.scale_h) * rect.h)
    w = rng.uniform((1.0 - params.scale_w) * rect.w, (1.0 + params.scale_w) * rect.w)
    noise = NoiseVector(dw=w - rect.w, dh=h - rect.h)
    return BoundingRect(rect.x, rect.y, w, h), noise


def apply_box_noise_to_points(poly, rect, noised_rect):
    """Move points so their normalized box coordinates are preserved.

    A zero-width (or zero-height) source box maps that axis onto the noised
    center line.
    """
    pts = np.asarray(poly, dtype=float)
    u = (pts[:, 0] - rect.x) / rect.w if rect.w > 0 else np.zeros(len(pts))
    v = (pts[:, 1] - rect.y) / rect.h if rect.h > 0 else np.zeros(len(pts))
    return np.column_stack([noised_rect.x + u * noised_rect.w, noised_rect.y + v * noised_rect.h])


def flip_label(cls, num_classes, p, rng):
    """With probability ``p`` replace ``cls`` by a different, uniformly chosen class."""
    p = check_probability(p, "p")
    if num_classes < 2 and p > 0:
        raise ValueError("cannot flip with one class")
    if not 0 <= cls < num_classes:
        raise ValueError(f"class {cls} out of range for {num_classes} classes")
    if rng.random() >= p:
        return int(cls)
    other = int(rng.integers(num_classes - 1))
    return other + 1 if other >= cls else other


def decay_rate(D, delta, alpha, gamma):
    """Noise decay for an instance whose warped counterpart sits ``D`` away.

    ``1 - D / (gamma * delta / alpha)`` clamped to [0, 1].
    """
    if not delta > 0:
        raise ValueError("invalid threshold")
    check_positive(alpha, "alpha")
    check_positive(gamma, "gamma")
    check_non_negative(D, "D")
    return float(min(1.0, max(0.0, 1.0 - D * alpha / (gamma * delta))))


def make_noisy_instance(element, decay, params, rng, num_classes=3, original_index=0,
                        source=SampleSource.NORMAL):
    """Noise one map element.

    Shift and scale noise are drawn independently, summed into one vector,
    scaled once by ``decay`` and added to the bounding box. The label flip
    is independent of ``decay``.
    """
    decay = check_probability(decay, "decay")
    check_count(num_classes, "num_classes")
    rect = min_bounding_rect(element.points)
    _, shift = box_shift(rect, params, rng)
    _, scale = box_scale(rect, params, rng)
    eta = shift + scale
    noised = BoundingRect(*(rect.as_array() + eta.as_array() * decay))
    points = apply_box_noise_to_points(element.points, rect, noised)
    cls = flip_label(element.cls, num_classes, params.label_flip_prob, rng)
    return NoisySample(MapElement(cls, points), original_index, eta, decay, SampleSource(source),
                       original_cls=element.cls)
