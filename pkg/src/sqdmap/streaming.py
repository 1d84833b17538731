"""Frame-to-frame harness: query propagation, denoising batches, per-frame runs.

No decoder is executed. Stream-state scores are synthesized from the
Chamfer distance of each query's reference curve to the current ground
truth, which is enough to exercise top-k maintenance.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ._validation import check_count
from .embedding import EmbeddingConfig, NetworkBundle
from .geometry import (
    DEFAULT_N_POINTS, MapElement, PerceptionRange, SE2Transform, apply_se2, clip_to_range,
    relative_transform, resample_polyline,
)
from .matching import MatchParams, adaptive_temporal_match, chamfer
from .noising import NoiseParams, SampleSource, decay_rate, make_noisy_instance


@dataclass(frozen=True)
class StreamConfig:
    top_k: int = 33
    dn_query_budget: int = 60
    n_points: int = DEFAULT_N_POINTS
    num_classes: int = 3
    noise: NoiseParams = field(default_factory=NoiseParams)
    match: MatchParams = field(default_factory=MatchParams)
    range: PerceptionRange = field(default_factory=PerceptionRange)

    def __post_init__(self):
        check_count(self.top_k, "top_k")
        check_count(self.dn_query_budget, "dn_query_budget")
        check_count(self.n_points, "n_points", minimum=2)
        check_count(self.num_classes, "num_classes")


@dataclass(frozen=True, eq=False)
class StreamState:
    queries: np.ndarray
    scores: np.ndarray
    ref_points: List[np.ndarray]
    frame_index: int = 0

    def __post_init__(self):
        q = np.asarray(self.queries, dtype=float)
        s = np.asarray(self.scores, dtype=float)
        if q.ndim != 2:
            q = q.reshape(len(s), 0) if q.size == 0 else np.atleast_2d(q)
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "scores", s)
        if not (len(q) == len(s) == len(self.ref_points)):
            raise ValueError("queries, scores and ref_points must have equal length")
        if np.any((s < 0) | (s > 1)):
            raise ValueError("scores must lie in [0, 1]")

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True, eq=False)
class FrameRecord:
    index: int
    timestamp: float
    ego_pose: SE2Transform
    elements: List[MapElement]


@dataclass(frozen=True, eq=False)
class DnBatch:
    samples: list
    groups: int
    group_size: int

    @property
    def target_indices(self):
        return [s.original_index for s in self.samples]

    def __len__(self):
        return len(self.samples)


def flatten_transform(t):
    """Row-major flattening of the 3x3 homogeneous matrix."""
    return t.matrix.reshape(-1)


def top_k_indices(scores, k):
    """Indices of the ``k`` highest scores; ties keep the lower index first."""
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    return order[:k]


def propagate_queries(state, t, phi_t, k):
    """Carry the top-k queries and reference curves into the next ego frame.

    Queries get a residual update from ``phi_t`` applied to the query
    concatenated with the flattened transform; reference curves are moved
    rigidly by ``t``.
    """
    dim = state.queries.shape[1] if len(state) else phi_t.out_dim
    if phi_t.in_dim != dim + 9 or phi_t.out_dim != dim:
        raise ValueError(f"phi_t must map {dim + 9} -> {dim}, got {phi_t.in_dim} -> {phi_t.out_dim}")
    keep = top_k_indices(state.scores, k)
    queries = state.queries[keep]
    if len(keep):
        flat = np.broadcast_to(flatten_transform(t), (len(keep), 9))
        queries = phi_t(np.concatenate([queries, flat], axis=1)) + queries
    refs = [apply_se2(t, state.ref_points[i]) for i in keep]
    return StreamState(queries, state.scores[keep], refs, state.frame_index + 1)


def assemble_dn_batch(current_gt, prev_gt_warped, matches, cfg, rng):
    """Build the denoising samples for one frame.

    Matched elements are noised from their warped predecessor with a decay
    that shrinks as the warp error grows; unmatched ones are noised from the
    current element at full strength. The target is always the current GT.
    """
    n_gt = len(current_gt)
    if n_gt == 0:
        return DnBatch([], 0, 0)
    if len(matches) != n_gt:
        raise ValueError("matches must be aligned with current_gt")
    groups = max(1, cfg.dn_query_budget // n_gt)
    samples = []
    for _ in range(groups):
        for i, gt in enumerate(current_gt):
            m = matches[i]
            if m.matched:
                source = prev_gt_warped[m.prev_index]
                decay = decay_rate(m.distance_D, m.threshold_delta, cfg.match.alpha, cfg.noise.gamma)
                kind = SampleSource.STREAM
            else:
                source, decay, kind = gt, 1.0, SampleSource.NORMAL
            samples.append(make_noisy_instance(source, decay, cfg.noise, rng, cfg.num_classes,
                                               original_index=i, source=kind))
    return DnBatch(samples, groups, n_gt)


def warp_elements(elements, t, rng_, n_points):
    """Move elements into another ego frame, clip them, and restore the point count."""
    out = []
    for el in elements:
        moved = apply_se2(t, el.points)
        clipped = clip_to_range(moved, rng_)
        if clipped is None:
            continue
        if len(clipped) != n_points or not np.array_equal(clipped, moved):
            clipped = resample_polyline(clipped, n_points)
        out.append(MapElement(el.cls, clipped))
    return out


@dataclass(frozen=True, eq=False)
class FrameReport:
    frame_index: int
    timestamp: float
    num_gt: int
    num_prev_warped: int
    matches: list
    batch: DnBatch
    stream_size: int

    @property
    def matched_count(self):
        return sum(m.matched for m in self.matches)

    @property
    def matched_fraction(self):
        return self.matched_count / len(self.matches) if self.matches else 0.0

    @property
    def mean_D(self):
        ds = [m.distance_D for m in self.matches if m.matched]
        return float(np.mean(ds)) if ds else None

    @property
    def mean_decay(self):
        decays = [s.decay for s in self.batch.samples]
        return float(np.mean(decays)) if decays else None

    def to_record(self):
        samples = []
        for s in self.batch.samples:
            samples.append({
                "target": s.original_index,
                "source": s.source.value,
                "cls": s.element.cls,
                "original_cls": s.original_cls,
                "decay": s.decay,
                "noise": [s.noise.dx, s.noise.dy, s.noise.dw, s.noise.dh],
                "points": s.element.points.tolist(),
            })
        noise = np.array([[abs(s.noise.dx), abs(s.noise.dy), abs(s.noise.dw), abs(s.noise.dh)]
                          for s in self.batch.samples]).reshape(-1, 4)
        return {
            "frame_index": self.frame_index,
            "timestamp": self.timestamp,
            "num_gt": self.num_gt,
            "num_prev_warped": self.num_prev_warped,
            "matched_count": self.matched_count,
            "matched_fraction": self.matched_fraction,
            "mean_D": self.mean_D,
            "mean_decay": self.mean_decay,
            "dn_groups": self.batch.groups,
            "dn_group_size": self.batch.group_size,
            "num_samples": len(self.batch),
            "num_stream_samples": sum(s.source is SampleSource.STREAM for s in self.batch.samples),
            "mean_abs_noise": noise.mean(axis=0).tolist() if len(noise) else None,
            "stream_size": self.stream_size,
            "matches": [m.to_record() for m in self.matches],
            "samples": samples,
        }


def _score_refs(refs, gt_elements):
    if not gt_elements:
        return np.zeros(len(refs))
    scores = []
    for ref in refs:
        d = min(chamfer(ref, g.points) for g in gt_elements)
        scores.append(1.0 / (1.0 + d))
    return np.array(scores)


def run_stream_frame(state, frame, prev_frame, cfg, nets, rng):
    """Advance the pipeline by one frame; returns ``(new_state, report)``."""
    current = list(frame.elements)
    if prev_frame is not None:
        t = relative_transform(prev_frame.ego_pose, frame.ego_pose)
        prev_warped = warp_elements(prev_frame.elements, t, cfg.range, cfg.n_points)
    else:
        t = SE2Transform.identity()
        prev_warped = []
    matches = adaptive_temporal_match(prev_warped, current, cfg.match) if current else []
    batch = assemble_dn_batch(current, prev_warped, matches, cfg, rng)
    dn_queries = nets.queries([s.element.cls for s in batch.samples],
                              [s.element.points for s in batch.samples])

    if state is not None and len(state):
        carried = propagate_queries(state, t, nets.phi_t, cfg.top_k)
        queries = np.concatenate([carried.queries, dn_queries])
        refs = carried.ref_points + [s.element.points for s in batch.samples]
    else:
        queries = dn_queries
        refs = [s.element.points for s in batch.samples]
    scores = _score_refs(refs, current)
    keep = top_k_indices(scores, cfg.top_k)
    new_state = StreamState(queries[keep].reshape(len(keep), nets.cfg.dim), scores[keep],
                            [refs[i] for i in keep], frame.index)
    report = FrameReport(frame.index, frame.timestamp, len(current), len(prev_warped),
                         matches, batch, len(new_state))
    return new_state, report


def run_stream(frames, cfg, nets, rng):
    """Run every frame of a scenario in order; returns the list of reports."""
    state, prev, reports = None, None, []
    for frame in frames:
        state, report = run_stream_frame(state, frame, prev, cfg, nets, rng)
        reports.append(report)
        prev = frame
    return reports


def default_networks(cfg, dim=256, seed=0):
    ecfg = EmbeddingConfig(dim=dim, n_points=cfg.n_points, num_classes=cfg.num_classes,
                           coord_range=cfg.range)
    return NetworkBundle.random(ecfg, seed)
