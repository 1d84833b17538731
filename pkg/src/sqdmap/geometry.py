"""Planar polyline primitives in the ego frame (x forward, y left).

Polylines are plain ``(n, 2)`` float arrays; :func:`as_polyline` is the
validating constructor. Transforms and rectangles are small frozen
dataclasses so they can be shared freely between threads.
"""
from dataclasses import dataclass

import numpy as np

from ._validation import check_count, check_points, check_polyline, check_positive

DEFAULT_N_POINTS = 20

CLASS_NAMES = ("ped_crossing", "divider", "boundary")
PED_CROSSING, DIVIDER, BOUNDARY = range(3)


def as_polyline(points):
    """Validate and convert ``points`` into a polyline array.

    Raises ``ValueError("degenerate curve")`` for zero-length input.
    """
    return check_polyline(points)


def polyline_length(poly):
    poly = np.asarray(poly, dtype=float)
    return float(np.sum(np.hypot(*np.diff(poly, axis=0).T)))


@dataclass(frozen=True, eq=False)
class MapElement:
    """One map instance: class id plus an ordered polyline."""

    cls: int
    points: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", as_polyline(self.points))
        object.__setattr__(self, "cls", int(self.cls))

    def __eq__(self, other):
        if not isinstance(other, MapElement):
            return NotImplemented
        return self.cls == other.cls and np.array_equal(self.points, other.points)

    __hash__ = None


@dataclass(frozen=True)
class BoundingRect:
    """Axis-aligned rectangle given by its center and size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError(f"rect size must be non-negative, got w={self.w}, h={self.h}")

    def as_array(self):
        return np.array([self.x, self.y, self.w, self.h])


@dataclass(frozen=True)
class PerceptionRange:
    half_length: float = 30.0
    half_width: float = 15.0

    def __post_init__(self):
        check_positive(self.half_length, "half_length")
        check_positive(self.half_width, "half_width")


@dataclass(frozen=True)
class SE2Transform:
    """Planar rigid motion: rotate by ``rotation`` then translate by (tx, ty)."""

    rotation: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(float(np.arctan2(m[1, 0], m[0, 0])), float(m[0, 2]), float(m[1, 2]))

    @property
    def translation(self):
        return np.array([self.tx, self.ty])

    def rotation_matrix(self):
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    @property
    def matrix(self):
        m = np.eye(3)
        m[:2, :2] = self.rotation_matrix()
        m[:2, 2] = self.translation
        return m

    def _rotate(self, vec):
        c, s = np.cos(self.rotation), np.sin(self.rotation)
        return c * vec[0] - s * vec[1], s * vec[0] + c * vec[1]

    def inverse(self):
        rx, ry = SE2Transform(-self.rotation)._rotate((self.tx, self.ty))
        return SE2Transform(-self.rotation, -rx, -ry)

    def compose(self, other):
        """Return ``self ∘ other`` (apply ``other`` first)."""
        rx, ry = self._rotate((other.tx, other.ty))
        return SE2Transform(self.rotation + other.rotation, rx + self.tx, ry + self.ty)

    __matmul__ = compose

    def apply(self, points):
        pts = np.asarray(points, dtype=float)
        return pts @ self.rotation_matrix().T + self.translation


def apply_se2(t, poly):
    """Rotate then translate every point of ``poly``."""
    return t.apply(check_points(poly))


def relative_transform(pose_prev, pose_cur):
    """Map previous-ego-frame coordinates into the current ego frame."""
    return pose_cur.inverse() @ pose_prev


def resample_polyline(poly, n=DEFAULT_N_POINTS):
    """Return ``n`` points spaced evenly by arc length along ``poly``."""
    poly = as_polyline(poly)
    n = check_count(n, "n", minimum=2)
    seg = np.hypot(*np.diff(poly, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, cum[-1], n)
    out = np.column_stack([np.interp(targets, cum, poly[:, 0]), np.interp(targets, cum, poly[:, 1])])
    out[0] = poly[0]
    out[-1] = poly[-1]
    return out


def min_bounding_rect(poly):
    pts = check_points(poly)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center = (lo + hi) / 2.0
    size = hi - lo
    return BoundingRect(float(center[0]), float(center[1]), float(size[0]), float(size[1]))


def _clip_segment(p0, p1, xmin, xmax, ymin, ymax):
    # Liang-Barsky; returns the parametric interval kept or None.
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for p, q in ((-d[0], p0[0] - xmin), (d[0], xmax - p0[0]),
                 (-d[1], p0[1] - ymin), (d[1], ymax - p0[1])):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    return t0, t1


def clip_to_range(poly, rng):
    """Clip ``poly`` to the ego-centred rectangle of ``rng``.

    Boundary crossings are inserted exactly on the rectangle edge. If the
    curve leaves and re-enters, only the longest inside piece is kept.
    Returns ``None`` when nothing of positive length lies inside.
    """
    poly = check_points(poly, min_points=2)
    hl, hw = rng.half_length, rng.half_width
    if np.all(np.abs(poly[:, 0]) <= hl) and np.all(np.abs(poly[:, 1]) <= hw):
        return poly.copy()

    pieces, current = [], []
    for p0, p1 in zip(poly[:-1], poly[1:]):
        with np.errstate(over="ignore"):
            kept = _clip_segment(p0, p1, -hl, hl, -hw, hw)
        if kept is None:
            if current:
                pieces.append(current)
                current = []
            continue
        t0, t1 = kept
        a = p0 + t0 * (p1 - p0) if t0 > 0.0 else p0
        b = p0 + t1 * (p1 - p0) if t1 < 1.0 else p1
        if current and t0 > 0.0:
            pieces.append(current)
            current = []
        if not current:
            current = [a]
        current.append(b)
        if t1 < 1.0:
            pieces.append(current)
            current = []
    if current:
        pieces.append(current)

    best, best_len = None, 0.0
    for piece in pieces:
        arr = np.clip(np.array(piece), [-hl, -hw], [hl, hw])
        length = polyline_length(arr)
        if length > best_len:
            best, best_len = arr, length
    return best
