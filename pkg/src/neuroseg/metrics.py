"""Detection, counting and segmentation scores plus the training-loss terms."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PixelClass, as_mask
from .errors import DimensionMismatch, EmptyGroundTruth, UndefinedRCE

PROB_EPS = 1e-7


def _same_shape(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(a.shape, b.shape)
    return a, b


@dataclass(frozen=True)
class DetectionCounts:
    tp: int
    fp: int
    fn: int


def match_detections(pred, centroids) -> DetectionCounts:
    """Match predicted objects against annotated ``(x, y)`` centroids.

    An object holding exactly one centroid is a TP, an object holding none is
    a FP. A centroid on background, or sharing its object with another
    centroid, is a FN (one per centroid), so ``tp + fn == len(centroids)``.
    """
    pred = np.asarray(pred)
    hits: dict[int, int] = {}
    fn = 0
    for x, y in centroids:
        lab = int(pred[y, x])
        if lab == 0:
            fn += 1
        else:
            hits[lab] = hits.get(lab, 0) + 1
    objects = np.unique(pred[pred != 0])
    tp = sum(1 for n in hits.values() if n == 1)
    fn += sum(n for n in hits.values() if n > 1)
    fp = int(objects.size) - len(hits)
    return DetectionCounts(tp, fp, fn)


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def precision_recall_f1(c: DetectionCounts) -> tuple[float, float, float]:
    """Precision, recall and F1; any 0/0 ratio is taken as 0."""
    return _prf(c.tp, c.fp, c.fn)


def rce(c: DetectionCounts) -> float:
    """Relative count error ``|FP - FN| / (TP + FN)``."""
    if c.tp + c.fn == 0:
        raise UndefinedRCE("relative count error needs at least one annotated object")
    return abs(c.fp - c.fn) / (c.tp + c.fn)


def dice(pred, gt) -> float:
    pred, gt = _same_shape(pred, gt)
    a, b = as_mask(pred), as_mask(gt)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2 * int((a & b).sum()) / total


@dataclass
class _Overlaps:
    """Sparse pairwise overlaps between the objects of two label maps."""

    gt_ids: np.ndarray
    pred_ids: np.ndarray
    gt_area: np.ndarray
    pred_area: np.ndarray
    # per gt index: list of (pred index, intersection)
    pairs: list

    @classmethod
    def build(cls, pred, gt):
        pred, gt = _same_shape(pred, gt)
        gt_ids, g_inv = np.unique(gt.ravel(), return_inverse=True)
        pred_ids, p_inv = np.unique(pred.ravel(), return_inverse=True)
        g_off = 1 if gt_ids.size and gt_ids[0] == 0 else 0
        p_off = 1 if pred_ids.size and pred_ids[0] == 0 else 0
        gt_area = np.bincount(g_inv, minlength=gt_ids.size)[g_off:]
        pred_area = np.bincount(p_inv, minlength=pred_ids.size)[p_off:]
        gi = g_inv.astype(np.int64) - g_off
        pj = p_inv.astype(np.int64) - p_off
        both = (gi >= 0) & (pj >= 0)
        n_pred = max(pred_ids.size - p_off, 1)
        keys, inter = np.unique(gi[both] * n_pred + pj[both], return_counts=True)
        pairs = [[] for _ in range(gt_ids.size - g_off)]
        for k, n in zip(keys.tolist(), inter.tolist()):
            pairs[k // n_pred].append((k % n_pred, n))
        return cls(gt_ids[g_off:], pred_ids[p_off:], gt_area, pred_area, pairs)

    def iou(self, i, j, inter):
        return inter / (self.gt_area[i] + self.pred_area[j] - inter)


def f1_seg(pred, gt, iou_threshold: float = 0.5) -> tuple[float, float, float]:
    """Object-level P, R, F1 where a match needs IoU strictly above the threshold."""
    ov = _Overlaps.build(pred, gt)
    used = set()
    tp = 0
    for i, cands in enumerate(ov.pairs):
        if not cands:
            continue
        # ties go to the lower pred label (pred indices ascend with label)
        j, inter = max(cands, key=lambda c: (ov.iou(i, c[0], c[1]), -c[0]))
        if ov.iou(i, j, inter) > iou_threshold and j not in used:
            used.add(j)
            tp += 1
    fp = len(ov.pred_ids) - tp
    fn = len(ov.gt_ids) - tp
    return _prf(tp, fp, fn)


def aji(pred, gt) -> float:
    """Aggregated Jaccard Index with one-to-one assignment.

    Ground-truth objects are visited in label order; each takes the unused
    predicted object of highest IoU (lower label on ties). A ground-truth
    object with no overlapping unused prediction adds nothing to the
    intersection and its own area to the union. Unused predictions are
    added to the union at the end.
    """
    ov = _Overlaps.build(pred, gt)
    if len(ov.gt_ids) == 0:
        raise EmptyGroundTruth("AJI is undefined without ground-truth objects")
    used = np.zeros(len(ov.pred_ids), dtype=bool)
    inter_sum = 0
    union_sum = 0
    for i, cands in enumerate(ov.pairs):
        free = [c for c in cands if not used[c[0]]]
        if not free:
            union_sum += int(ov.gt_area[i])
            continue
        j, inter = max(free, key=lambda c: (ov.iou(i, c[0], c[1]), -c[0]))
        used[j] = True
        inter_sum += inter
        union_sum += int(ov.gt_area[i] + ov.pred_area[j] - inter)
    union_sum += int(ov.pred_area[~used].sum())
    return inter_sum / union_sum


def cross_entropy(pm, gt_classes) -> float:
    """Mean categorical cross-entropy normalised by pixels times classes."""
    pm = np.asarray(pm, dtype=np.float64)
    gt_classes = np.asarray(gt_classes)
    if pm.shape[:2] != gt_classes.shape:
        raise DimensionMismatch(pm.shape[:2], gt_classes.shape)
    n, c = gt_classes.size, pm.shape[-1]
    p_true = np.take_along_axis(pm, gt_classes[..., None].astype(np.intp), axis=-1)
    p_true = np.clip(p_true, PROB_EPS, 1.0)
    # + 0.0 folds the -0.0 of a perfect prediction into 0.0
    return float(-np.log(p_true).sum() / (n * c)) + 0.0


def soft_dice(pred_channel, gt_channel) -> float:
    """Smoothed soft Dice loss ``1 - (2*sum(t*p) + 1) / (sum(t) + sum(p) + 1)``."""
    p, t = _same_shape(pred_channel, gt_channel)
    p = p.astype(np.float64)
    t = t.astype(np.float64)
    return float(1.0 - (2.0 * (t * p).sum() + 1.0) / (t.sum() + p.sum() + 1.0))


@dataclass(frozen=True)
class LossWeights:
    ce: float = 0.5
    dice_neuron: float = 0.3
    dice_contour: float = 0.2

    def __post_init__(self):
        if not math.isclose(self.ce + self.dice_neuron + self.dice_contour, 1.0, abs_tol=1e-12):
            raise ValueError("loss weights must sum to 1")


def compound_loss(pm, gt_classes, w: LossWeights = LossWeights()) -> float:
    pm = np.asarray(pm, dtype=np.float64)
    gt_classes = np.asarray(gt_classes)
    ce = cross_entropy(pm, gt_classes)
    d_neuron = soft_dice(pm[..., PixelClass.NEURON], gt_classes == PixelClass.NEURON)
    d_contour = soft_dice(pm[..., PixelClass.CONTOUR], gt_classes == PixelClass.CONTOUR)
    return w.ce * ce + w.dice_neuron * d_neuron + w.dice_contour * d_contour


METRIC_COLUMNS = ("F1_det", "P", "R", "RCE", "Dice", "F1_seg", "AJI")


def score_image(pred, gt, centroids) -> dict[str, float]:
    """All per-image scores; RCE is NaN when there are no centroids."""
    counts = match_detections(pred, centroids)
    p, r, f1 = precision_recall_f1(counts)
    try:
        count_err = rce(counts)
    except UndefinedRCE:
        count_err = float("nan")
    return {
        "F1_det": f1,
        "P": p,
        "R": r,
        "RCE": count_err,
        "Dice": dice(pred, gt),
        "F1_seg": f1_seg(pred, gt)[2],
        "AJI": aji(pred, gt),
    }
