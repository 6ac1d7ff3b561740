"""Assignment machinery for the evaluation pipeline.

Three layers:

* ``hungarian`` -- minimum-cost maximum-cardinality assignment on a
  rectangular cost matrix with a ``FORBIDDEN`` sentinel for disallowed pairs.
* ``match_frame_greedy`` -- score-ordered detection-to-GT matching used for
  detection PR curves (a detection takes the unmatched GT of highest overlap
  if that overlap clears the threshold).
* ``clear_correspond`` -- the temporal correspondence step of the CLEAR
  procedure: previous pairs persist while their overlap clears the threshold,
  then remaining boxes are matched to maximize total overlap.

Residual matching follows a documented deterministic rule: maximum
cardinality, then maximum total IoU, then, scanning ground-truth ids in
ascending order, each takes the smallest hypothesis id consistent with an
optimal overall assignment. Ties in total IoU closer than 1e-12 are treated
as equal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .datamodel import BBox, Detection
from .geometry import iou

FORBIDDEN = math.inf

_IOU_TIE_TOL = 1e-12


def hungarian(cost: Sequence[Sequence[float]]) -> dict[int, int]:
    """Min-cost max-cardinality assignment over allowed (finite-cost) pairs.

    Returns a partial row -> column map covering only allowed pairs.
    """
    mat = np.asarray(cost, dtype=float)
    if mat.size == 0:
        return {}
    allowed = np.isfinite(mat)
    if not allowed.any():
        return {}
    # Big-M: one forbidden pair costs more than any spread of finite costs,
    # so cardinality over allowed pairs is maximized first.
    big = 2.0 * float(np.abs(mat[allowed]).sum()) + 1.0
    filled = np.where(allowed, mat, big)
    rows, cols = linear_sum_assignment(filled)
    return {int(r): int(c) for r, c in zip(rows, cols) if allowed[r, c]}


@dataclass(frozen=True)
class FrameMatching:
    """One frame's correspondence: matched (gt, hyp, iou) plus leftovers."""

    pairs: tuple[tuple[Hashable, Hashable, float], ...]
    unmatched_gt: tuple[Hashable, ...]
    unmatched_hyp: tuple[Hashable, ...]

    def as_map(self) -> dict[Hashable, Hashable]:
        return {g: h for g, h, _ in self.pairs}


def match_frame_greedy(dets: Sequence[Detection], gts: Sequence[BBox],
                       iou_thr: float) -> FrameMatching:
    """Greedy score-ordered matching for detection PR evaluation.

    Detections are processed in descending score (ties by input order); each
    takes the unmatched GT of maximum IoU if that IoU >= iou_thr.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    free = set(range(len(gts)))
    pairs: list[tuple[int, int, float]] = []
    matched_det: set[int] = set()
    for di in order:
        best_gi = -1
        best_iou = 0.0
        for gi in free:
            v = iou(dets[di].box, gts[gi])
            if v > best_iou or (v == best_iou and v > 0.0 and gi < best_gi):
                best_gi, best_iou = gi, v
        if best_gi >= 0 and best_iou >= iou_thr:
            pairs.append((best_gi, di, best_iou))
            free.discard(best_gi)
            matched_det.add(di)
    return FrameMatching(
        pairs=tuple(pairs),
        unmatched_gt=tuple(sorted(free)),
        unmatched_hyp=tuple(i for i in range(len(dets)) if i not in matched_det),
    )


def _residual_value(iou_mat: np.ndarray, iou_thr: float) -> tuple[int, float]:
    """(cardinality, total IoU) of the optimal residual matching."""
    cost = np.where(iou_mat >= iou_thr, 1.0 - iou_mat, FORBIDDEN)
    assign = hungarian(cost)
    return len(assign), float(sum(iou_mat[r, c] for r, c in assign.items()))


def _residual_match(iou_mat: np.ndarray, iou_thr: float) -> list[tuple[int, int]]:
    """Optimal residual matching, canonicalized per the documented tie-break."""
    n, m = iou_mat.shape
    if n == 0 or m == 0:
        return []
    card, total = _residual_value(iou_mat, iou_thr)
    if card == 0:
        return []
    rows = list(range(n))
    cols = list(range(m))
    pairs: list[tuple[int, int]] = []
    for i in range(n):
        rows.remove(i)
        chosen = -1
        for j in cols:
            if iou_mat[i, j] < iou_thr:
                continue
            sub = iou_mat[np.ix_(rows, [c for c in cols if c != j])]
            sub_card, sub_total = _residual_value(sub, iou_thr)
            if sub_card + 1 == card and sub_total + iou_mat[i, j] >= total - _IOU_TIE_TOL:
                chosen = j
                card, total = sub_card, sub_total
                break
        if chosen >= 0:
            pairs.append((i, chosen))
            cols.remove(chosen)
        if card == 0:
            break
    return pairs


def clear_correspond(prev: Mapping[Hashable, Hashable] | None,
                     gts: Mapping[Hashable, BBox],
                     hyps: Mapping[Hashable, BBox],
                     iou_thr: float) -> FrameMatching:
    """One step of CLEAR temporal correspondence.

    `prev` maps gt id -> hyp id from the previous frame's correspondence.
    Rule 1: a previous pair persists if both boxes exist now and still overlap
    at >= iou_thr. Rule 2: leftovers are matched by optimal assignment
    maximizing total IoU subject to the threshold.
    """
    pairs: list[tuple[Hashable, Hashable, float]] = []
    used_gt: set[Hashable] = set()
    used_hyp: set[Hashable] = set()
    if prev:
        for g in sorted(prev):
            h = prev[g]
            if g in gts and h in hyps:
                v = iou(gts[g], hyps[h])
                if v >= iou_thr:
                    pairs.append((g, h, v))
                    used_gt.add(g)
                    used_hyp.add(h)

    rest_gt = sorted(g for g in gts if g not in used_gt)
    rest_hyp = sorted(h for h in hyps if h not in used_hyp)
    if rest_gt and rest_hyp:
        iou_mat = np.array([[iou(gts[g], hyps[h]) for h in rest_hyp]
                            for g in rest_gt])
        for gi, hj in _residual_match(iou_mat, iou_thr):
            g, h = rest_gt[gi], rest_hyp[hj]
            pairs.append((g, h, float(iou_mat[gi, hj])))
            used_gt.add(g)
            used_hyp.add(h)

    return FrameMatching(
        pairs=tuple(pairs),
        unmatched_gt=tuple(sorted(g for g in gts if g not in used_gt)),
        unmatched_hyp=tuple(sorted(h for h in hyps if h not in used_hyp)),
    )
