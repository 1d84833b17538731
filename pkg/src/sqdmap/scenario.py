"""Synthetic driving corridors, per-frame ground truth, and the text file formats.

Scenario files hold one frame per line::

    frame <index> <timestamp> <x> <y> <yaw> <count> {<cls> <npts> <x1> <y1> ... }*

Prediction files use the same element grammar with a score after the class::

    pred <frame_index> <count> {<cls> <score> <npts> <x1> <y1> ... }*

Blank lines and lines starting with ``#`` are ignored. Floats are written
with ``repr`` so a write/read round trip is exact.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_count, check_non_negative, check_positive
from .geometry import (
    BOUNDARY, DEFAULT_N_POINTS, DIVIDER, PED_CROSSING, MapElement, PerceptionRange, SE2Transform,
    clip_to_range, resample_polyline,
)
from .metrics import ScoredPrediction
from .noising import make_rng
from .streaming import FrameRecord


class ScenarioFormatError(ValueError):
    """Malformed scenario or prediction record."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


@dataclass(frozen=True, eq=False)
class WorldMap:
    elements: list
    extent: float
    start: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    num_frames: int = 20
    frame_interval: float = 0.5
    speed: float = 10.0
    yaw_rate: float = 0.0
    range: PerceptionRange = field(default_factory=PerceptionRange)
    n_points: int = DEFAULT_N_POINTS
    divider_density: float = 0.05
    boundary_density: float = 0.02
    crossing_density: float = 0.01
    num_lanes: int = 4
    lane_width: float = 3.5
    seed: int = 0

    def __post_init__(self):
        check_count(self.num_frames, "num_frames")
        check_positive(self.frame_interval, "frame_interval")
        check_non_negative(self.speed, "speed")
        check_count(self.n_points, "n_points", minimum=2)
        check_count(self.num_lanes, "num_lanes")
        check_positive(self.lane_width, "lane_width")
        for name in ("divider_density", "boundary_density", "crossing_density"):
            check_non_negative(getattr(self, name), name)

    @property
    def margin(self):
        return self.range.half_length + 20.0

    @property
    def corridor_length(self):
        travel = self.speed * self.frame_interval * (self.num_frames - 1)
        return travel + 2.0 * self.margin


def _count(density, length):
    # guard against 0.05 * 200 = 10.000000000000002
    return int(math.ceil(density * length - 1e-9))


def _wiggly_line(x0, x1, y, amplitude, phase, step=2.0):
    n = max(2, int(math.ceil((x1 - x0) / step)) + 1)
    xs = np.linspace(x0, x1, n)
    ys = y + amplitude * np.sin(2.0 * math.pi * (xs - x0) / 80.0 + phase)
    return np.column_stack([xs, ys])


def generate_world(cfg, rng):
    """Lay out a straight corridor along world +x starting at ``-margin``.

    Lane dividers are segments on interior lane lines, road boundaries tile
    both road edges, and crossings are closed rectangles across the road.
    """
    length = cfg.corridor_length
    x0 = -cfg.margin
    road_half = cfg.num_lanes * cfg.lane_width / 2.0
    elements = []

    for _ in range(_count(cfg.divider_density, length)):
        seg = min(length, rng.uniform(20.0, 80.0))
        start = rng.uniform(x0, x0 + length - seg)
        lane = int(rng.integers(1, cfg.num_lanes)) if cfg.num_lanes > 1 else 0
        y = -road_half + lane * cfg.lane_width
        pts = _wiggly_line(start, start + seg, y, rng.uniform(0.0, 0.4), rng.uniform(0, 2 * math.pi))
        elements.append(MapElement(DIVIDER, pts))

    n_bound = _count(cfg.boundary_density, length)
    sides = [(+1.0, (n_bound + 1) // 2), (-1.0, n_bound // 2)]
    for sign, count in sides:
        if count == 0:
            continue
        edges = np.linspace(x0, x0 + length, count + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            y = sign * (road_half + 0.5)
            pts = _wiggly_line(a, b, y, rng.uniform(0.0, 0.6), rng.uniform(0, 2 * math.pi))
            elements.append(MapElement(BOUNDARY, pts))

    for _ in range(_count(cfg.crossing_density, length)):
        cx = rng.uniform(x0, x0 + length)
        depth = rng.uniform(3.0, 6.0)
        pts = np.array([[cx - depth / 2, -road_half], [cx + depth / 2, -road_half],
                        [cx + depth / 2, road_half], [cx - depth / 2, road_half],
                        [cx - depth / 2, -road_half]])
        elements.append(MapElement(PED_CROSSING, pts))

    return WorldMap(elements, length, x0)


def frame_ground_truth(world, pose, rng_, n_points=DEFAULT_N_POINTS):
    """World elements seen from ``pose``: moved to the ego frame, clipped, resampled."""
    to_ego = pose.inverse()
    out = []
    for el in world.elements:
        clipped = clip_to_range(to_ego.apply(el.points), rng_)
        if clipped is None:
            continue
        out.append(MapElement(el.cls, resample_polyline(clipped, n_points)))
    return out


def ego_poses(cfg):
    """Constant speed / yaw-rate integration starting at the world origin."""
    x = y = yaw = 0.0
    dt, v, w = cfg.frame_interval, cfg.speed, cfg.yaw_rate
    poses = []
    for _ in range(cfg.num_frames):
        poses.append(SE2Transform(yaw, x, y))
        if abs(w) < 1e-12:
            x += v * dt * math.cos(yaw)
            y += v * dt * math.sin(yaw)
        else:
            x += v / w * (math.sin(yaw + w * dt) - math.sin(yaw))
            y -= v / w * (math.cos(yaw + w * dt) - math.cos(yaw))
        yaw += w * dt
    return poses


def generate_scenario(cfg=ScenarioConfig(), world=None):
    if world is None:
        world = generate_world(cfg, make_rng(cfg.seed))
    frames = []
    for i, pose in enumerate(ego_poses(cfg)):
        gt = frame_ground_truth(world, pose, cfg.range, cfg.n_points)
        frames.append(FrameRecord(i, i * cfg.frame_interval, pose, gt))
    return frames


# serialization

def _fmt(v):
    return repr(float(v))


def _points_tokens(points):
    toks = [str(len(points))]
    for x, y in points:
        toks += [_fmt(x), _fmt(y)]
    return toks


def format_frame(frame):
    p = frame.ego_pose
    toks = ["frame", str(frame.index), _fmt(frame.timestamp), _fmt(p.tx), _fmt(p.ty),
            _fmt(p.rotation), str(len(frame.elements))]
    for el in frame.elements:
        toks.append(str(el.cls))
        toks += _points_tokens(el.points)
    return " ".join(toks)


def write_scenario(frames, path):
    Path(path).write_text("".join(format_frame(f) + "\n" for f in frames))


class _Tokens:
    def __init__(self, path, lineno, line):
        self.toks = line.split()
        self.pos = 0
        self.path, self.lineno = path, lineno

    def fail(self, msg):
        raise ScenarioFormatError(self.path, self.lineno, msg)

    def next(self, conv, what):
        if self.pos >= len(self.toks):
            self.fail(f"truncated record: missing {what}")
        tok = self.toks[self.pos]
        self.pos += 1
        try:
            value = conv(tok)
        except ValueError:
            self.fail(f"bad {what}: {tok!r}")
        if isinstance(value, float) and not math.isfinite(value):
            self.fail(f"non-finite {what}: {tok!r}")
        return value

    def points(self):
        n = self.next(int, "point count")
        if n < 2:
            self.fail(f"polyline needs at least 2 points, got {n}")
        pts = [(self.next(float, "x"), self.next(float, "y")) for _ in range(n)]
        return np.array(pts)

    def element(self, cls, pts):
        try:
            return MapElement(cls, pts)
        except ValueError as exc:
            self.fail(str(exc))

    def done(self):
        if self.pos != len(self.toks):
            self.fail(f"{len(self.toks) - self.pos} trailing token(s)")


def _records(path, tag):
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        toks = _Tokens(path, lineno, stripped)
        if toks.next(str, "record tag") != tag:
            toks.fail(f"expected a {tag!r} record")
        yield toks


def read_scenario(path):
    frames = []
    for t in _records(path, "frame"):
        index = t.next(int, "frame index")
        stamp = t.next(float, "timestamp")
        x, y, yaw = t.next(float, "pose x"), t.next(float, "pose y"), t.next(float, "pose yaw")
        count = t.next(int, "element count")
        elements = []
        for _ in range(count):
            cls = t.next(int, "class")
            elements.append(t.element(cls, t.points()))
        t.done()
        frames.append(FrameRecord(index, stamp, SE2Transform(yaw, x, y), elements))
    return frames


def format_predictions(frame_index, preds):
    toks = ["pred", str(frame_index), str(len(preds))]
    for p in preds:
        toks += [str(p.element.cls), _fmt(p.score)]
        toks += _points_tokens(p.element.points)
    return " ".join(toks)


def write_predictions(pred_frames, path):
    """``pred_frames`` maps frame index -> list of ScoredPrediction (or a list in frame order)."""
    items = pred_frames.items() if isinstance(pred_frames, dict) else enumerate(pred_frames)
    Path(path).write_text("".join(format_predictions(i, p) + "\n" for i, p in items))


def read_predictions(path):
    """Return ``{frame_index: [ScoredPrediction, ...]}``."""
    out = {}
    for t in _records(path, "pred"):
        index = t.next(int, "frame index")
        preds = []
        for _ in range(t.next(int, "element count")):
            cls = t.next(int, "class")
            score = t.next(float, "score")
            if not 0.0 <= score <= 1.0:
                t.fail(f"score {score} outside [0, 1]")
            preds.append(ScoredPrediction(t.element(cls, t.points()), score))
        t.done()
        out.setdefault(index, []).extend(preds)
    return out
