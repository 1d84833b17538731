"""Chamfer distances and adaptive temporal matching between frames."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_positive
from .geometry import min_bounding_rect


def _as_point_set(points):
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(arr) == 0:
        raise ValueError("empty point set")
    return arr


def _pairwise(s1, s2):
    diff = s1[:, None, :] - s2[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def chamfer_directional(s1, s2):
    """Mean distance from each point of ``s1`` to its nearest point in ``s2``."""
    s1, s2 = _as_point_set(s1), _as_point_set(s2)
    return float(_pairwise(s1, s2).min(axis=1).mean())


def chamfer(s1, s2):
    """Bidirectional Chamfer distance: sum of both directional terms."""
    s1, s2 = _as_point_set(s1), _as_point_set(s2)
    d = _pairwise(s1, s2)
    # the sum is taken in a fixed order so chamfer(a, b) == chamfer(b, a) bit-exactly
    ab, ba = float(d.min(axis=1).mean()), float(d.min(axis=0).mean())
    return min(ab, ba) + max(ab, ba)


def adaptive_threshold(rect, alpha):
    """Per-instance matching tolerance ``alpha * (w + h) / 2``."""
    check_positive(alpha, "alpha")
    if rect.w + rect.h <= 0:
        raise ValueError("degenerate instance")
    return alpha * (rect.w + rect.h) / 2.0


@dataclass(frozen=True)
class MatchParams:
    alpha: float = 0.1

    def __post_init__(self):
        check_positive(self.alpha, "alpha")


@dataclass(frozen=True)
class MatchResult:
    current_index: int
    prev_index: Optional[int]
    distance_D: float
    threshold_delta: float
    matched: bool

    def to_record(self):
        """JSON-friendly dict; an absent match is stored as ``null``, not infinity."""
        has_prev = self.prev_index is not None
        return {
            "current_index": self.current_index,
            "prev_index": self.prev_index,
            "distance_D": self.distance_D if has_prev else None,
            "threshold_delta": self.threshold_delta,
            "matched": self.matched,
        }

    @classmethod
    def from_record(cls, rec):
        D = rec["distance_D"]
        return cls(int(rec["current_index"]), rec["prev_index"],
                   math.inf if D is None else float(D), float(rec["threshold_delta"]),
                   bool(rec["matched"]))


def adaptive_temporal_match(prev_warped, current, params=MatchParams()):
    """Assign each current element its nearest same-class warped predecessor.

    Every current element is matched independently (several current curves
    may claim the same previous curve). A candidate is accepted only when
    its Chamfer distance is strictly below the current element's adaptive
    threshold. Ties go to the lowest previous index. Inputs are expected to
    be resampled to a common point count beforehand.
    """
    results = []
    for i, cur in enumerate(current):
        delta = adaptive_threshold(min_bounding_rect(cur.points), params.alpha)
        best_j, best_d = None, math.inf
        for j, prev in enumerate(prev_warped):
            if prev.cls != cur.cls:
                continue
            d = chamfer(cur.points, prev.points)
            if d < best_d:
                best_j, best_d = j, d
        matched = best_j is not None and best_d < delta
        results.append(MatchResult(i, best_j, best_d, delta, matched))
    return results
