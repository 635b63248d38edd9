#!/usr/bin/env python3
"""
Superpixel quality metrics against ground-truth label maps

Achievable segmentation accuracy (ASA) and boundary recall (BR). Boundaries
are one-sided (a pixel is on a boundary when its right or bottom neighbour
has a different label) and the recall tolerance is a square (Chebyshev)
neighbourhood of radius r.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Sequence

import numpy as np
from scipy import ndimage

try:
    from .exceptions import EvaluationError, ShapeMismatchError
except ImportError:
    from exceptions import EvaluationError, ShapeMismatchError

DEFAULT_TOLERANCE = 2


@dataclass
class AnnotationScore:
    """Metrics of a prediction against one ground-truth annotation"""
    asa: float
    br: float


@dataclass
class MetricsReport:
    """Metrics averaged over every annotation of one image"""
    asa: float
    br: float
    n_superpixels_used: int
    per_annotation: List[AnnotationScore] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MetricsReport':
        return cls(
            asa=data['asa'],
            br=data['br'],
            n_superpixels_used=data['n_superpixels_used'],
            per_annotation=[AnnotationScore(**score) for score in data.get('per_annotation', [])]
        )


def _check_shapes(operation: str, pred: np.ndarray, gt: np.ndarray) -> None:
    if pred.shape != gt.shape:
        raise ShapeMismatchError(operation, gt.shape, pred.shape)


def asa(pred: np.ndarray, gt: np.ndarray) -> float:
    """
    Achievable segmentation accuracy

    Every predicted superpixel is credited with its largest overlap with a
    single ground-truth segment; the credits are summed and divided by H*W.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    _check_shapes('asa', pred, gt)

    _, pred_index = np.unique(pred, return_inverse=True)
    _, gt_index = np.unique(gt, return_inverse=True)
    n_gt = int(gt_index.max()) + 1
    n_pred = int(pred_index.max()) + 1

    # contingency[s, g] = |pred_s ∩ gt_g|
    contingency = np.bincount(
        pred_index.ravel() * n_gt + gt_index.ravel(),
        minlength=n_pred * n_gt
    ).reshape(n_pred, n_gt)

    return float(contingency.max(axis=1).sum()) / pred.size


def boundary_map(labels: np.ndarray) -> np.ndarray:
    """Boolean map of pixels whose right or bottom 4-neighbour has a different label"""
    labels = np.asarray(labels)
    boundary = np.zeros(labels.shape, dtype=bool)
    boundary[:, :-1] |= labels[:, :-1] != labels[:, 1:]
    boundary[:-1, :] |= labels[:-1, :] != labels[1:, :]
    return boundary


def boundary_recall(pred: np.ndarray, gt: np.ndarray, r: int = DEFAULT_TOLERANCE) -> float:
    """
    Fraction of ground-truth boundary pixels with a predicted boundary pixel
    within Chebyshev distance r

    Returns 1.0 when the ground truth has no boundary pixels.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    _check_shapes('boundary_recall', pred, gt)
    if r < 0:
        raise EvaluationError(f"Boundary tolerance must be >= 0, got {r}")

    gt_boundary = boundary_map(gt)
    n_gt_boundary = int(gt_boundary.sum())
    if n_gt_boundary == 0:
        return 1.0

    pred_boundary = boundary_map(pred)
    if r > 0:
        pred_boundary = ndimage.binary_dilation(
            pred_boundary, structure=np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        )

    return float((gt_boundary & pred_boundary).sum()) / n_gt_boundary


def evaluate(pred: np.ndarray, gts: Sequence[np.ndarray], r: int = DEFAULT_TOLERANCE) -> MetricsReport:
    """
    ASA and BR of one prediction averaged over several annotations

    Raises:
        EvaluationError: If no annotations are given
        ShapeMismatchError: If any annotation differs in shape from pred
    """
    if len(gts) == 0:
        raise EvaluationError("At least one ground-truth annotation is required")

    pred = np.asarray(pred)
    scores = [AnnotationScore(asa=asa(pred, gt), br=boundary_recall(pred, gt, r)) for gt in gts]

    return MetricsReport(
        asa=float(np.mean([score.asa for score in scores])),
        br=float(np.mean([score.br for score in scores])),
        n_superpixels_used=int(len(np.unique(pred))),
        per_annotation=scores
    )
