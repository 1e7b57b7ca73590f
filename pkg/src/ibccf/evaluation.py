"""One-pass evaluation and overlap metrics.

Frame 1 carries the annotation the tracker starts from and is excluded
from every metric. A frame counts as a success when IoU is strictly above
the threshold.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tracker
from .errors import ParameterError, TrackingFailure
from .geometry import iou
from .synthetic import Sequence

THRESHOLDS = np.linspace(0.0, 1.0, 21)


@dataclass
class TrackRecord:
    boxes: list
    diagnostics: list = field(default_factory=list)
    frame_times: list = field(default_factory=list)
    failed: bool = False
    failure_frame: int | None = None

    def __len__(self):
        return len(self.boxes)


def run_ope(seq: Sequence, cfg: tracker.TrackerConfig | None = None) -> TrackRecord:
    """Initialize on the first ground-truth box and step through, no resets."""
    cfg = cfg or tracker.TrackerConfig()
    t0 = time.perf_counter()
    state = tracker.init(seq.frames[0], seq.groundtruth[0], cfg)
    rec = TrackRecord([seq.groundtruth[0]], [state.diagnostics], [time.perf_counter() - t0])
    for i in range(1, len(seq)):
        t0 = time.perf_counter()
        try:
            state, box = tracker.step(state, seq.frames[i])
        except TrackingFailure:
            rec.failed = True
            rec.failure_frame = i + 1
            break
        rec.boxes.append(box)
        rec.diagnostics.append(state.diagnostics)
        rec.frame_times.append(time.perf_counter() - t0)
    return rec


def sequence_ious(boxes, groundtruth, allow_short: bool = False) -> np.ndarray:
    """IoU for frames 2..n; frames missing from a failed run count as 0."""
    if len(boxes) != len(groundtruth) and not (allow_short and len(boxes) < len(groundtruth)):
        raise ParameterError(f"{len(boxes)} predictions for {len(groundtruth)} ground-truth frames")
    out = np.zeros(len(groundtruth) - 1)
    for i in range(1, len(boxes)):
        out[i - 1] = iou(boxes[i], groundtruth[i])
    return out


def record_ious(rec: TrackRecord, seq: Sequence) -> np.ndarray:
    return sequence_ious(rec.boxes, seq.groundtruth, allow_short=rec.failed)


def op_from_ious(ious, threshold: float = 0.5) -> float:
    ious = np.asarray(ious, dtype=float)
    if ious.size == 0:
        raise ParameterError("no frames to score")
    return float(np.count_nonzero(ious > threshold)) / ious.size


@dataclass(frozen=True)
class SuccessCurve:
    thresholds: np.ndarray
    values: np.ndarray

    @property
    def auc(self) -> float:
        return float(np.mean(self.values))

    def at(self, threshold: float) -> float:
        i = int(np.argmin(np.abs(self.thresholds - threshold)))
        if not np.isclose(self.thresholds[i], threshold):
            raise ParameterError(f"{threshold} is not on the threshold grid")
        return float(self.values[i])


def curve_from_ious(ious, thresholds=THRESHOLDS) -> SuccessCurve:
    thresholds = np.asarray(thresholds, dtype=float)
    return SuccessCurve(thresholds, np.array([op_from_ious(ious, t) for t in thresholds]))


def overlap_precision(rec: TrackRecord, seq: Sequence, threshold: float = 0.5) -> float:
    return op_from_ious(record_ious(rec, seq), threshold)


def success_curve(rec: TrackRecord, seq: Sequence, thresholds=THRESHOLDS) -> SuccessCurve:
    return curve_from_ious(record_ious(rec, seq), thresholds)


def mean_overlap_precision(pairs, threshold: float = 0.5) -> float:
    """Mean of per-sequence OP over (record, sequence) pairs."""
    ops = [overlap_precision(r, s, threshold) for r, s in pairs]
    return float(np.mean(ops))
