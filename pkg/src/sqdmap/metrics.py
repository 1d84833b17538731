"""Chamfer-threshold average precision and training loss terms."""
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._validation import check_non_negative, check_probability
from .geometry import CLASS_NAMES, MapElement, PerceptionRange
from .matching import chamfer

THRESHOLDS_30M = (0.5, 1.0, 1.5)
THRESHOLDS_50M = (1.0, 1.5, 2.0)


@dataclass(frozen=True)
class EvalConfig:
    thresholds: Sequence[float] = THRESHOLDS_30M
    classes: Sequence[int] = (0, 1, 2)
    range: PerceptionRange = field(default_factory=PerceptionRange)

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th or th[0] <= 0 or any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError(f"thresholds must be positive and strictly increasing, got {th}")
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))

    @classmethod
    def for_range(cls, half_length):
        """Standard thresholds for the 30 m or 50 m perception setting."""
        if half_length == 30:
            return cls(THRESHOLDS_30M, range=PerceptionRange(30.0, 15.0))
        if half_length == 50:
            return cls(THRESHOLDS_50M, range=PerceptionRange(50.0, 25.0))
        raise ValueError(f"no standard thresholds for a {half_length} m range")


@dataclass(frozen=True, eq=False)
class ScoredPrediction:
    element: MapElement
    score: float

    def __post_init__(self):
        check_probability(self.score, "score")


def _score_order(preds):
    return sorted(range(len(preds)), key=lambda i: -preds[i].score)


def instance_tp_fp(preds, gts, threshold):
    """Greedy TP/FP flags for class-homogeneous predictions.

    Predictions are visited by descending score (stable); each claims the
    nearest still-unclaimed GT when its Chamfer distance is below
    ``threshold``. Flags are returned in the original prediction order.
    """
    flags = [False] * len(preds)
    claimed = [False] * len(gts)
    if not gts:
        return flags
    dist = np.array([[chamfer(p.element.points, g.points) for g in gts] for p in preds]).reshape(
        len(preds), len(gts))
    for i in _score_order(preds):
        row = np.where(claimed, np.inf, dist[i])
        j = int(np.argmin(row))
        if row[j] < threshold:
            claimed[j] = True
            flags[i] = True
    return flags


def ap_from_flags(scores, flags, num_gt):
    """All-point interpolated AP from per-detection scores and TP flags."""
    if num_gt == 0:
        return 1.0 if len(scores) == 0 else 0.0
    if len(scores) == 0:
        return 0.0
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    tp = np.asarray(flags, dtype=float)[order]
    ctp = np.cumsum(tp)
    recall = ctp / num_gt
    precision = ctp / np.arange(1, len(tp) + 1)
    # precision envelope: best precision at any recall >= r
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


def average_precision(preds, gts, cfg):
    """AP for one class and one scene, averaged over ``cfg.thresholds``."""
    scores = [p.score for p in preds]
    aps = [ap_from_flags(scores, instance_tp_fp(preds, gts, th), len(gts)) for th in cfg.thresholds]
    return float(np.mean(aps))


def map_score(per_class_ap):
    if len(per_class_ap) == 0:
        raise ValueError("need at least one class AP")
    return float(np.mean(per_class_ap))


@dataclass(frozen=True)
class EvalReport:
    per_class: dict
    thresholds: tuple

    @property
    def class_ap(self):
        return {c: float(np.mean(v)) for c, v in self.per_class.items()}

    @property
    def mAP(self):
        return map_score(list(self.class_ap.values()))

    def to_record(self):
        return {
            "thresholds": list(self.thresholds),
            "per_class": {_class_name(c): {"ap": self.class_ap[c], "per_threshold": list(v)}
                          for c, v in self.per_class.items()},
            "mAP": self.mAP,
        }

    def table(self):
        head = f"{'class':<14}" + "".join(f"AP@{t:<6g}" for t in self.thresholds) + "AP"
        lines = [head]
        for c, v in self.per_class.items():
            lines.append(f"{_class_name(c):<14}" + "".join(f"{a:<9.4f}" for a in v)
                         + f"{self.class_ap[c]:.4f}")
        lines.append(f"{'mAP':<14}" + " " * 9 * len(self.thresholds) + f"{self.mAP:.4f}")
        return "\n".join(lines)


def _class_name(c):
    return CLASS_NAMES[c] if 0 <= c < len(CLASS_NAMES) else str(c)


def evaluate(pred_frames, gt_frames, cfg=EvalConfig()):
    """Dataset-level AP: TP/FP per frame, then pooled and ranked per class.

    ``pred_frames[i]`` holds the ScoredPredictions for ``gt_frames[i]``
    (a list of MapElements).
    """
    if len(pred_frames) != len(gt_frames):
        raise ValueError("need one prediction list per ground-truth frame")
    per_class = {}
    for c in cfg.classes:
        aps = []
        for th in cfg.thresholds:
            scores, flags, n_gt = [], [], 0
            for preds, gts in zip(pred_frames, gt_frames):
                p = [x for x in preds if x.element.cls == c]
                g = [x for x in gts if x.cls == c]
                n_gt += len(g)
                scores.extend(x.score for x in p)
                flags.extend(instance_tp_fp(p, g, th))
            aps.append(ap_from_flags(scores, flags, n_gt))
        per_class[c] = tuple(aps)
    return EvalReport(per_class, cfg.thresholds)


# losses

_EPS = 1e-12


def focal_loss(prob, target, alpha_f=0.25, gamma_f=2.0):
    p = min(max(float(prob), _EPS), 1.0 - _EPS)
    if target:
        return -alpha_f * (1.0 - p) ** gamma_f * math.log(p)
    return -(1.0 - alpha_f) * p ** gamma_f * math.log(1.0 - p)


def line_loss(pred, gt):
    """Mean per-point L1 distance, taking the better of the two gt directions."""
    pred, gt = np.asarray(pred, dtype=float), np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ValueError(f"point counts differ: {pred.shape} vs {gt.shape}")
    forward = np.abs(pred - gt).sum(axis=1).mean()
    backward = np.abs(pred - gt[::-1]).sum(axis=1).mean()
    return float(min(forward, backward))


@dataclass(frozen=True)
class LossWeights:
    focal: float = 4.0
    line: float = 50.0
    trans: float = 0.1
    dn_focal: float = 4.0
    dn_line: float = 50.0

    def __post_init__(self):
        for name in ("focal", "line", "trans", "dn_focal", "dn_line"):
            check_non_negative(getattr(self, name), name)


@dataclass(frozen=True)
class MapTerms:
    focal: float = 0.0
    line: float = 0.0
    trans: float = 0.0


@dataclass(frozen=True)
class DenoiseTerms:
    focal: float = 0.0
    line: float = 0.0


def total_losses(map_terms, dn_terms, w=LossWeights()):
    """Return ``(L_map, L_denoise, L_train)``; the translation term is taken as given."""
    l_map = w.focal * map_terms.focal + w.line * map_terms.line + w.trans * map_terms.trans
    l_dn = w.dn_focal * dn_terms.focal + w.dn_line * dn_terms.line
    return l_map, l_dn, l_map + l_dn
